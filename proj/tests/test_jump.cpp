#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ultradec/jump.hpp"
#include "ultradec/models.hpp"
#include "ultradec/run.hpp"

using namespace ultradec;

namespace {

IntegratorConfig tight() {
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-11;
    cfg.abs_tol = 1e-14;
    return cfg;
}

ReducedModel von_neumann_reduced(int outcomes, double coupling, double dephasing) {
    VonNeumannParams p;
    p.outcomes = outcomes;
    p.coupling = coupling;
    p.dephasing = dephasing;
    return compute_reduced(build_von_neumann(p));
}

}  // namespace

TEST_CASE("uniform back-reaction: exponential trace, frozen conditional state") {
    const ReducedModel red = von_neumann_reduced(2, 1.0, 100.0);
    const double chi = 0.01;
    std::mt19937_64 rng(5);
    const ComplexOperator rho0 = oracles::random_density(rng, 2);

    const std::vector<double> grid = linspace(0.0, 100.0, 21);
    const BackReactionTimeline tl =
        back_react(red.back_reaction[0], rho0, red.spec.system.hamiltonian, grid, tight());

    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double expected = std::exp(-2.0 * chi * grid[k]);
        CHECK(std::abs(tl.states[k].trace().real() - expected) < 1e-10);
        // back-reaction proportional to the identity leaves the normalised
        // conditional state untouched
        const ComplexOperator normalised = tl.states[k] / tl.states[k].trace().real();
        CHECK((normalised - rho0).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(is_psd(normalised, 1e-9));
    }
}

TEST_CASE("zero back-reaction freezes the state") {
    const ComplexOperator zero = ComplexOperator::Zero(2, 2);
    std::mt19937_64 rng(8);
    const ComplexOperator rho0 = oracles::random_density(rng, 2);
    const BackReactionTimeline tl = back_react(zero, rho0, zero, {0.0, 1.0, 5.0}, tight());
    for (const auto& state : tl.states) {
        CHECK((state - rho0).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("a trace-increasing loss operator is rejected") {
    const ComplexOperator gain = -0.5 * ComplexOperator::Identity(2, 2);
    const ComplexOperator rho0 = ComplexOperator::Identity(2, 2) / 2.0;
    CHECK_THROWS_AS(
        back_react(gain, rho0, ComplexOperator::Zero(2, 2), {0.0, 1.0}, IntegratorConfig{}),
        NumericalError);
}

TEST_CASE("two-site conditional trace matches the closed form") {
    TwoSiteParams p;  // hopping 1, coupling 1, dephasing 1 -> chi = 1
    const ReducedModel red = compute_reduced(build_two_site(p));
    ComplexOperator left = ComplexOperator::Zero(2, 2);
    left(0, 0) = 1.0;

    const std::vector<double> grid = linspace(0.0, 10.0, 101);
    const BackReactionTimeline tl =
        back_react(red.back_reaction[0], left, red.spec.system.hamiltonian, grid, tight());
    const SurvivalCurve curve = survival(tl);

    // value frozen from the closed form at t = 1 (chi = hopping = 1)
    CHECK(std::abs(curve.values[10] - 0.7198342196241818) < 1e-3);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        CHECK(std::abs(curve.values[k] - analytic_survival_two_site(1.0, 1.0, grid[k])) < 1e-9);
    }
}

TEST_CASE("survival curves start at one and never increase") {
    const ReducedModel red = compute_reduced(build_two_site(TwoSiteParams{}));
    ComplexOperator left = ComplexOperator::Zero(2, 2);
    left(0, 0) = 1.0;
    const BackReactionTimeline tl = back_react(red.back_reaction[0], left,
                                               red.spec.system.hamiltonian,
                                               linspace(0.0, 8.0, 200));
    const SurvivalCurve curve = survival(tl);
    CHECK(curve.values.front() == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t k = 1; k < curve.values.size(); ++k) {
        CHECK(curve.values[k] <= curve.values[k - 1]);
        CHECK(curve.values[k] >= 0.0);
    }
}

TEST_CASE("decoupled detector never clicks") {
    // chi -> 0: the conditional evolution is unitary and the trace stays 1
    TwoSiteParams p;
    p.coupling = 0.0;
    const ReducedModel red = compute_reduced(build_two_site(p));
    ComplexOperator left = ComplexOperator::Zero(2, 2);
    left(0, 0) = 1.0;
    const BackReactionTimeline tl = back_react(red.back_reaction[0], left,
                                               red.spec.system.hamiltonian,
                                               linspace(0.0, 10.0, 11), tight());
    const SurvivalCurve curve = survival(tl);
    for (double v : curve.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("conditional log-derivative equals the instantaneous loss rate") {
    const ReducedModel red = compute_reduced(build_two_site(TwoSiteParams{}));
    ComplexOperator left = ComplexOperator::Zero(2, 2);
    left(0, 0) = 1.0;
    const ComplexOperator loss = red.back_reaction[0] + red.back_reaction[0].adjoint();

    const double h = 1e-3;
    for (double t : {0.5, 1.0, 2.0}) {
        const BackReactionTimeline tl =
            back_react(red.back_reaction[0], left, red.spec.system.hamiltonian,
                       {0.0, t - h, t, t + h}, tight());
        const double s_minus = tl.states[1].trace().real();
        const double s_mid = tl.states[2].trace().real();
        const double s_plus = tl.states[3].trace().real();
        const double log_deriv = (std::log(s_plus) - std::log(s_minus)) / (2.0 * h);
        const double rate = -(loss * tl.states[2]).trace().real() / s_mid;
        CHECK(std::abs(log_deriv - rate) < 1e-4 * std::abs(rate));
    }
}

TEST_CASE("first-step distribution recovers the squared input amplitudes") {
    const ReducedModel red = von_neumann_reduced(2, 1.0, 2.0);  // chi = 0.5

    SUBCASE("0.36 / 0.64 amplitudes") {
        Eigen::VectorXcd psi(2);
        psi << std::sqrt(0.36), std::sqrt(0.64);
        const FirstStepDistribution dist =
            first_step_distribution(red, psi * psi.adjoint(), 0, 25.0, tight());
        CHECK(std::abs(dist.probabilities(1) - 0.36) < 1e-6);
        CHECK(std::abs(dist.probabilities(2) - 0.64) < 1e-6);
        CHECK(std::abs(dist.escape_total - 1.0) < 1e-6);
        CHECK(dist.remainder < 1e-6);
        CHECK(dist.warnings.empty());
    }

    SUBCASE("probe eigenstate maps to a deterministic first step") {
        ComplexOperator rho = ComplexOperator::Zero(2, 2);
        rho(0, 0) = 1.0;
        const FirstStepDistribution dist = first_step_distribution(red, rho, 0, 25.0, tight());
        CHECK(std::abs(dist.probabilities(1) - 1.0) < 1e-6);
        CHECK(std::abs(dist.probabilities(2)) < 1e-12);
    }

    SUBCASE("a too-short horizon triggers the slow-escape warning") {
        Eigen::VectorXcd psi(2);
        psi << std::sqrt(0.5), std::sqrt(0.5);
        const FirstStepDistribution dist =
            first_step_distribution(red, psi * psi.adjoint(), 0, 0.5, tight());
        REQUIRE(dist.warnings.size() == 1);
        CHECK(dist.remainder > 1e-6);
        CHECK(dist.escape_total < 1.0);
    }
}

TEST_CASE("two-site escape is total") {
    const ReducedModel red = compute_reduced(build_two_site(TwoSiteParams{}));
    ComplexOperator left = ComplexOperator::Zero(2, 2);
    left(0, 0) = 1.0;
    const FirstStepDistribution dist = first_step_distribution(red, left, 0, 40.0, tight());
    CHECK(std::abs(dist.probabilities(1) - 1.0) < 1e-6);
    CHECK(std::abs(dist.escape_total - 1.0) < 1e-6);
}

TEST_CASE("post-transition states") {
    const ReducedModel red = von_neumann_reduced(2, 1.0, 50.0);

    SUBCASE("projective device collapses onto the probed state") {
        std::mt19937_64 rng(13);
        for (int rep = 0; rep < 20; ++rep) {
            const ComplexOperator rho = oracles::random_density(rng, 2);
            for (int mu = 1; mu <= 2; ++mu) {
                if ((mu == 1 ? rho(0, 0) : rho(1, 1)).real() < 1e-6) continue;
                const ComplexOperator post = post_transition_state(red, rho, 0, mu);
                CHECK(std::abs(post.trace().real() - 1.0) < 1e-12);
                const double fidelity = post(mu - 1, mu - 1).real();
                CHECK(fidelity >= 1.0 - 1e-10);
            }
        }
    }

    SUBCASE("photon detector lowers the photon number by one") {
        PhotonDetectorParams p;
        p.fock_cutoff = 6;
        p.field_state = fock_state(2, 6);
        const PhotonDetectorModel model = build_photon_detector(p);
        const ReducedModel photon_red = compute_reduced(model.spec);
        const ComplexOperator post =
            post_transition_state(photon_red, model.field_state, 0, 1);
        CHECK((post - fock_state(1, 6)).cwiseAbs().maxCoeff() < 1e-14);
    }

    SUBCASE("zero-rate transitions are forbidden") {
        ComplexOperator rho = ComplexOperator::Zero(2, 2);
        rho(0, 0) = 1.0;  // orthogonal to the second probe state
        CHECK_THROWS_AS(post_transition_state(red, rho, 0, 2), ForbiddenTransitionError);
        // pointer levels are uncoupled among themselves
        CHECK_THROWS_AS(post_transition_state(red, rho, 1, 2), ForbiddenTransitionError);
    }
}

TEST_CASE("identical seeds reproduce trajectories bit for bit") {
    const ReducedModel red = von_neumann_reduced(2, 1.0, 10.0);  // chi = 0.1
    Eigen::VectorXcd psi(2);
    psi << std::sqrt(0.36), std::sqrt(0.64);
    const ClickSampler sampler(red, psi * psi.adjoint(), 0, 60.0);

    const Trajectory a = sampler.sample(42, 7);
    const Trajectory b = sampler.sample(42, 7);
    REQUIRE(a.events.size() == b.events.size());
    REQUIRE(a.censored == b.censored);
    for (std::size_t i = 0; i < a.events.size(); ++i) {
        CHECK(a.events[i].time == b.events[i].time);  // bit-exact
        CHECK(a.events[i].to_level == b.events[i].to_level);
        CHECK((a.events[i].post_state - b.events[i].post_state).cwiseAbs().maxCoeff() == 0.0);
    }

    const Trajectory c = sampler.sample(42, 8);
    const bool differs = c.censored != a.censored || c.events.size() != a.events.size() ||
                         (!c.events.empty() && c.events[0].time != a.events[0].time);
    CHECK(differs);

    // free-function wrapper matches stream index 0
    const Trajectory d = sample_first_click(red, psi * psi.adjoint(), 0, 42, 60.0);
    const Trajectory e = sampler.sample(42, 0);
    REQUIRE(d.events.size() == e.events.size());
    if (!d.events.empty()) CHECK(d.events[0].time == e.events[0].time);
}

TEST_CASE("click times follow the exponential law") {
    const ReducedModel red = von_neumann_reduced(2, 1.0, 10.0);  // chi = 0.1
    Eigen::VectorXcd psi(2);
    psi << std::sqrt(0.36), std::sqrt(0.64);
    const ClickSampler sampler(red, psi * psi.adjoint(), 0, 60.0);

    const std::size_t n = 20000;
    double sum = 0.0;
    std::size_t events = 0;
    std::size_t to_first = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Trajectory traj = sampler.sample(2024, i);
        if (traj.censored) continue;
        sum += traj.events[0].time;
        to_first += traj.events[0].to_level == 1 ? 1 : 0;
        ++events;
    }
    const double mean = sum / static_cast<double>(events);
    const double expected_mean = 1.0 / (2.0 * 0.1);
    const double se = expected_mean / std::sqrt(static_cast<double>(events));
    CHECK(std::abs(mean - expected_mean) < 3.0 * se);

    // label frequencies reproduce the squared amplitudes (binomial 3 sigma)
    const double freq = static_cast<double>(to_first) / static_cast<double>(events);
    const double sigma = std::sqrt(0.36 * 0.64 / static_cast<double>(events));
    CHECK(std::abs(freq - 0.36) < 3.0 * sigma);
}

TEST_CASE("empirical survival estimation") {
    const ReducedModel red = von_neumann_reduced(2, 1.0, 10.0);  // chi = 0.1
    Eigen::VectorXcd psi(2);
    psi << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    const ComplexOperator rho0 = psi * psi.adjoint();
    const std::vector<double> grid = linspace(0.0, 40.0, 41);

    SUBCASE("a single trajectory yields a step function") {
        const EmpiricalSurvival est = estimate_survival_mc(red, rho0, 0, 1, 5, grid);
        for (double v : est.p_emp) CHECK((v == 0.0 || v == 1.0));
        for (std::size_t k = 1; k < est.p_emp.size(); ++k) {
            CHECK(est.p_emp[k] <= est.p_emp[k - 1]);
        }
    }

    SUBCASE("matches the analytic curve within three sigma uniformly") {
        const EmpiricalSurvival est = estimate_survival_mc(red, rho0, 0, 20000, 99, grid);
        double max_hw = 0.0;
        for (double hw : est.ci_halfwidth) max_hw = std::max(max_hw, hw);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            const double ref = analytic_survival_von_neumann(0.1, grid[k]);
            CHECK(std::abs(est.p_emp[k] - ref) <= 3.0 * max_hw);
        }
    }

    SUBCASE("two-site ensemble tracks the closed form pointwise") {
        const ReducedModel ts = compute_reduced(build_two_site(TwoSiteParams{}));
        ComplexOperator left = ComplexOperator::Zero(2, 2);
        left(0, 0) = 1.0;
        const std::vector<double> ts_grid = linspace(0.0, 12.0, 25);
        const std::size_t n = 20000;
        const EmpiricalSurvival est = estimate_survival_mc(ts, left, 0, n, 17, ts_grid);
        for (std::size_t k = 0; k < ts_grid.size(); ++k) {
            const double ref = analytic_survival_two_site(1.0, 1.0, ts_grid[k]);
            const double sigma =
                std::sqrt(std::max(0.0, ref * (1.0 - ref)) / static_cast<double>(n));
            CHECK(std::abs(est.p_emp[k] - ref) <= 3.0 * sigma + 1e-12);
        }
    }

    SUBCASE("parallel execution is observationally identical to sequential") {
        const EmpiricalSurvival seq =
            estimate_survival_mc(red, rho0, 0, 4000, 7, grid, IntegratorConfig{}, 1);
        const EmpiricalSurvival par =
            estimate_survival_mc(red, rho0, 0, 4000, 7, grid, IntegratorConfig{}, 4);
        REQUIRE(seq.p_emp.size() == par.p_emp.size());
        for (std::size_t k = 0; k < seq.p_emp.size(); ++k) {
            CHECK(seq.p_emp[k] == par.p_emp[k]);  // bit-exact
        }
        CHECK(seq.censored == par.censored);
    }
}

TEST_CASE("censoring is recorded, never dropped") {
    const ReducedModel red = von_neumann_reduced(2, 1.0, 10.0);  // chi = 0.1
    Eigen::VectorXcd psi(2);
    psi << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    const double t_max = 1.0;
    const ClickSampler sampler(red, psi * psi.adjoint(), 0, t_max);

    const std::size_t n = 2000;
    std::size_t censored = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Trajectory traj = sampler.sample(31, i);
        if (traj.censored) {
            ++censored;
            CHECK(traj.events.empty());
        } else {
            CHECK(traj.events[0].time <= t_max);
        }
    }
    const double expected = std::exp(-2.0 * 0.1 * t_max);  // survival at the horizon
    const double sigma = std::sqrt(expected * (1.0 - expected) / static_cast<double>(n));
    CHECK(std::abs(static_cast<double>(censored) / n - expected) < 3.0 * sigma);
}

TEST_CASE("chain sampling keeps clicking past the first event") {
    const ReducedModel red = von_neumann_reduced(2, 1.0, 5.0);  // chi = 0.2
    Eigen::VectorXcd psi(2);
    psi << std::sqrt(0.36), std::sqrt(0.64);
    const ClickSampler sampler(red, psi * psi.adjoint(), 0, 50.0);

    bool saw_multi = false;
    for (std::uint64_t i = 0; i < 20; ++i) {
        const Trajectory traj = sampler.sample(3, i, true);
        if (traj.events.size() > 1) saw_multi = true;
        double last = 0.0;
        for (std::size_t k = 0; k < traj.events.size(); ++k) {
            CHECK(traj.events[k].time >= last);
            CHECK(traj.events[k].time <= 50.0);
            last = traj.events[k].time;
            if (k > 0) CHECK(traj.events[k].from_level == traj.events[k - 1].to_level);
        }
        // chains are reproducible too
        const Trajectory again = sampler.sample(3, i, true);
        REQUIRE(again.events.size() == traj.events.size());
        for (std::size_t k = 0; k < traj.events.size(); ++k) {
            CHECK(again.events[k].time == traj.events[k].time);
        }
    }
    CHECK(saw_multi);
}
