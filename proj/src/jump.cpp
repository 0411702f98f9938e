#include "ultradec/jump.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace ultradec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// tr(a b) without forming the product.
Complex trace_product(const ComplexOperator& a, const ComplexOperator& b) {
    return a.transpose().cwiseProduct(b).sum();
}

// d/dt r = -i (H_eff r - r H_eff†) with H_eff = H - iG, written as
// -i (W - W†), W = H_eff r, which preserves hermiticity exactly.
class ConditionalRhs {
  public:
    ConditionalRhs(const ComplexOperator& h, const ComplexOperator& gamma_op)
        : heff_(h - Complex(0, 1) * gamma_op),
          dim_(static_cast<int>(heff_.rows())),
          w_(dim_, dim_) {}

    int dim() const { return dim_; }

    void operator()(double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        Eigen::Map<const Eigen::MatrixXcd> rho(y.data(), dim_, dim_);
        Eigen::Map<Eigen::MatrixXcd> out(dy.data(), dim_, dim_);
        w_.noalias() = heff_ * rho;
        w_ *= Complex(0, -1);
        out = w_;
        out += w_.adjoint();
    }

  private:
    ComplexOperator heff_;
    int dim_;
    Eigen::MatrixXcd w_;
};

void require_state(const ComplexOperator& rho, int dim, const char* who,
                   const Tolerances& tol) {
    if (rho.rows() != dim || rho.cols() != dim) {
        throw std::invalid_argument(std::string(who) + ": state has wrong dimension");
    }
    if (std::abs(rho.trace().real() - 1.0) > tol.trace ||
        std::abs(rho.trace().imag()) > tol.trace) {
        throw std::invalid_argument(std::string(who) + ": state must have unit trace");
    }
    if (!is_psd(rho, tol.psd)) {
        throw std::invalid_argument(std::string(who) +
                                    ": state must be hermitian positive semidefinite");
    }
}

// Dense cache of the conditional evolution over [0, span], refined until the
// survival value is linearly interpolable to interp_tol.
struct CachedCurve {
    std::vector<double> times;
    std::vector<ComplexOperator> states;
    std::vector<double> survs;
};

CachedCurve build_cached_curve(const ComplexOperator& gamma_op, const ComplexOperator& h,
                               const ComplexOperator& rho0, double span,
                               const IntegratorConfig& cfg, double interp_tol) {
    ConditionalRhs rhs(h, gamma_op);
    const int d = rhs.dim();
    auto rhs_fn = [&rhs](double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        rhs(t, y, dy);
    };
    auto advance = [&](const ComplexOperator& from, double t0, double t1) {
        Eigen::VectorXcd y(d * d);
        Eigen::Map<Eigen::MatrixXcd>(y.data(), d, d) = from;
        integrate(rhs_fn, t0, t1, y, cfg);
        return ComplexOperator(Eigen::Map<const Eigen::MatrixXcd>(y.data(), d, d));
    };

    CachedCurve cache;
    cache.times.push_back(0.0);
    cache.states.push_back(rho0);
    cache.survs.push_back(rho0.trace().real());

    // Bisect each segment until the survival midpoint matches the chord.
    constexpr int kMaxDepth = 36;
    auto refine = [&](auto&& self, double ta, const ComplexOperator& ra, double sa, double tb,
                      const ComplexOperator& rb, double sb, int depth) -> void {
        const double tm = 0.5 * (ta + tb);
        if (depth >= kMaxDepth || tm <= ta || tm >= tb) {
            cache.times.push_back(tb);
            cache.states.push_back(rb);
            cache.survs.push_back(sb);
            return;
        }
        const ComplexOperator rm = advance(ra, ta, tm);
        const double sm = rm.trace().real();
        if (std::abs(sm - 0.5 * (sa + sb)) <= interp_tol) {
            cache.times.push_back(tm);
            cache.states.push_back(rm);
            cache.survs.push_back(sm);
            cache.times.push_back(tb);
            cache.states.push_back(rb);
            cache.survs.push_back(sb);
            return;
        }
        self(self, ta, ra, sa, tm, rm, sm, depth + 1);
        self(self, tm, rm, sm, tb, rb, sb, depth + 1);
    };

    constexpr int kSeedSegments = 16;
    ComplexOperator prev = rho0;
    double t_prev = 0.0;
    double s_prev = cache.survs.front();
    for (int k = 1; k <= kSeedSegments; ++k) {
        const double t_next = span * k / kSeedSegments;
        const ComplexOperator next = advance(prev, t_prev, t_next);
        const double s_next = next.trace().real();
        refine(refine, t_prev, prev, s_prev, t_next, next, s_next, 0);
        prev = cache.states.back();
        t_prev = cache.times.back();
        s_prev = cache.survs.back();
    }
    return cache;
}

struct CacheDraw {
    double time = 0.0;
    ComplexOperator state;  // unnormalised, interpolated
    double trace = 0.0;
};

constexpr std::size_t kNoTarget = static_cast<std::size_t>(-1);

// One weighted draw over the per-target rates out of `state`; kNoTarget when
// every rate vanishes.
std::size_t pick_weighted_target(const std::vector<std::pair<int, ComplexOperator>>& targets,
                                 const ComplexOperator& state, std::mt19937_64& eng) {
    double total = 0.0;
    std::vector<double> weights(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) {
        weights[i] = std::max(0.0, trace_product(targets[i].second, state).real());
        total += weights[i];
    }
    if (!(total > 0.0)) return kNoTarget;

    const double pick = uniform01(eng) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        acc += weights[i];
        if (pick <= acc) return i;
    }
    return targets.size() - 1;
}

// Inverse transform: the time at which the cached survival crosses u, with
// linear interpolation of both the value and the state.
CacheDraw draw_time(const std::vector<double>& times, const std::vector<ComplexOperator>& states,
                    const std::vector<double>& survs, double u) {
    auto it = std::lower_bound(survs.begin(), survs.end(), u,
                               [](double elem, double val) { return elem > val; });
    std::size_t j = static_cast<std::size_t>(it - survs.begin());
    if (j == 0) j = 1;
    if (j >= survs.size()) j = survs.size() - 1;
    const std::size_t a = j - 1;
    const double denom = survs[a] - survs[j];
    double theta = denom > 0.0 ? (survs[a] - u) / denom : 0.5;
    theta = std::clamp(theta, 0.0, 1.0);

    CacheDraw draw;
    draw.time = times[a] + theta * (times[j] - times[a]);
    draw.state = (1.0 - theta) * states[a] + theta * states[j];
    draw.trace = draw.state.trace().real();
    return draw;
}

}  // namespace

BackReactionTimeline back_react(const ComplexOperator& gamma_op, const ComplexOperator& rho0,
                                const ComplexOperator& h_q, const std::vector<double>& t_grid,
                                const IntegratorConfig& cfg, const Tolerances& tol) {
    check_config(cfg);
    const int d = static_cast<int>(rho0.rows());
    require_state(rho0, d, "back_react", tol);
    if (gamma_op.rows() != d || gamma_op.cols() != d || h_q.rows() != d || h_q.cols() != d) {
        throw std::invalid_argument("back_react: operator dimensions do not match the state");
    }
    if (!is_hermitian(h_q, tol.hermiticity)) {
        throw std::invalid_argument("back_react: H_Q must be hermitian");
    }
    if (t_grid.empty() || t_grid.front() != 0.0) {
        throw std::invalid_argument("back_react: t_grid must start at 0");
    }
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > t_grid[i - 1])) {
            throw std::invalid_argument("back_react: t_grid must increase strictly");
        }
    }

    ConditionalRhs rhs(h_q, gamma_op);
    auto rhs_fn = [&rhs](double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        rhs(t, y, dy);
    };

    Eigen::VectorXcd y(d * d);
    Eigen::Map<Eigen::MatrixXcd>(y.data(), d, d) = rho0;

    BackReactionTimeline tl;
    tl.times = t_grid;
    tl.states.reserve(t_grid.size());

    double last_trace = kInf;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (k > 0) integrate(rhs_fn, t_grid[k - 1], t_grid[k], y, cfg);
        ComplexOperator state = Eigen::Map<const Eigen::MatrixXcd>(y.data(), d, d);
        const double tr = state.trace().real();
        if (tr > last_trace + tol.trace) {
            throw NumericalError(
                "back_react: trace increased at t = " + std::to_string(t_grid[k]) +
                "; the loss operator has the wrong sign or convention");
        }
        last_trace = tr;
        tl.states.push_back(std::move(state));
    }
    return tl;
}

SurvivalCurve survival(const BackReactionTimeline& timeline, const Tolerances& tol) {
    SurvivalCurve curve;
    curve.times = timeline.times;
    curve.values.reserve(timeline.states.size());
    for (std::size_t k = 0; k < timeline.states.size(); ++k) {
        double v = timeline.states[k].trace().real();
        if (!curve.values.empty()) {
            const double prev = curve.values.back();
            if (v > prev) {
                if (v - prev > tol.trace) {
                    throw NumericalError("survival: curve increased by more than tolerance at t = " +
                                         std::to_string(timeline.times[k]));
                }
                v = prev;
            }
        }
        curve.values.push_back(std::clamp(v, 0.0, 1.0));
    }
    return curve;
}

FirstStepDistribution first_step_distribution(const ReducedModel& red,
                                              const ComplexOperator& rho0, int mu, double t_max,
                                              const IntegratorConfig& cfg,
                                              double escape_cutoff) {
    check_config(cfg);
    const int L = red.spec.levels();
    const int d = red.spec.dim();
    if (mu < 0 || mu >= L) {
        throw std::invalid_argument("first_step_distribution: source level out of range");
    }
    require_state(rho0, d, "first_step_distribution", Tolerances{});
    if (!(t_max > 0.0)) {
        throw std::invalid_argument("first_step_distribution: t_max must be positive");
    }

    std::vector<std::pair<int, ComplexOperator>> targets;
    for (int nu = 0; nu < L; ++nu) {
        if (nu != mu && red.coupled(nu, mu)) targets.emplace_back(nu, red.f.at({nu, mu}));
    }

    ConditionalRhs cond(red.spec.system.hamiltonian, red.back_reaction[mu]);
    const std::size_t n_acc = targets.size();
    auto rhs_fn = [&](double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        cond(t, y, dy);
        Eigen::Map<const Eigen::MatrixXcd> rho(y.data(), d, d);
        for (std::size_t i = 0; i < n_acc; ++i) {
            dy(d * d + static_cast<Eigen::Index>(i)) = trace_product(targets[i].second, rho);
        }
    };

    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(d * d + static_cast<Eigen::Index>(n_acc));
    Eigen::Map<Eigen::MatrixXcd>(y.data(), d, d) = rho0;
    integrate(rhs_fn, 0.0, t_max, y, cfg);

    FirstStepDistribution dist;
    dist.source = mu;
    dist.probabilities = Eigen::VectorXd::Zero(L);
    for (std::size_t i = 0; i < n_acc; ++i) {
        dist.probabilities(targets[i].first) =
            y(d * d + static_cast<Eigen::Index>(i)).real();
    }
    dist.escape_total = dist.probabilities.sum();
    dist.remainder =
        Eigen::Map<const Eigen::MatrixXcd>(y.data(), d, d).trace().real();
    if (dist.remainder >= escape_cutoff) {
        dist.warnings.push_back(
            "slow escape: survival mass at the horizon is " + std::to_string(dist.remainder) +
            " (cutoff " + std::to_string(escape_cutoff) +
            "); first-step weights miss at most that much");
    }
    return dist;
}

ComplexOperator post_transition_state(const ReducedModel& red, const ComplexOperator& rho,
                                      int mu, int nu, double deg_tol) {
    const int L = red.spec.levels();
    const int d = red.spec.dim();
    if (mu < 0 || mu >= L || nu < 0 || nu >= L || mu == nu) {
        throw std::invalid_argument("post_transition_state: bad level pair");
    }
    if (rho.rows() != d || rho.cols() != d) {
        throw std::invalid_argument("post_transition_state: state has wrong dimension");
    }
    if (!red.coupled(nu, mu)) {
        throw ForbiddenTransitionError("post_transition_state: levels " + std::to_string(mu) +
                                       " and " + std::to_string(nu) + " are uncoupled");
    }

    const ComplexOperator numerator = red.spec.coupling_block(nu, mu) * rho * red.k.at({mu, nu}) +
                                      red.k.at({nu, mu}) * rho * red.spec.coupling_block(mu, nu);
    const double tr = numerator.trace().real();
    if (tr <= deg_tol) {
        throw ForbiddenTransitionError(
            "post_transition_state: transition " + std::to_string(mu) + " -> " +
            std::to_string(nu) + " has zero rate out of this state");
    }
    ComplexOperator post = 0.5 * (numerator + numerator.adjoint()) / tr;
    return post;
}

// -------------------------------- ClickSampler --------------------------------

ClickSampler::ClickSampler(const ReducedModel& red, ComplexOperator rho0, int mu0, double t_max,
                           IntegratorConfig cfg, double interp_tol)
    : red_(red), rho0_(std::move(rho0)), mu0_(mu0), t_max_(t_max), cfg_(std::move(cfg)),
      interp_tol_(interp_tol) {
    check_config(cfg_);
    const int L = red_.spec.levels();
    const int d = red_.spec.dim();
    if (mu0 < 0 || mu0 >= L) {
        throw std::invalid_argument("ClickSampler: conditioning level out of range");
    }
    require_state(rho0_, d, "ClickSampler", Tolerances{});
    if (!(t_max_ > 0.0)) throw std::invalid_argument("ClickSampler: t_max must be positive");
    if (!(interp_tol_ > 0.0)) {
        throw std::invalid_argument("ClickSampler: interp_tol must be positive");
    }

    for (int nu = 0; nu < L; ++nu) {
        if (nu != mu0 && red_.coupled(nu, mu0)) targets_.emplace_back(nu, red_.f.at({nu, mu0}));
    }

    CachedCurve cache = build_cached_curve(red_.back_reaction[mu0_],
                                           red_.spec.system.hamiltonian, rho0_, t_max_, cfg_,
                                           interp_tol_);
    times_ = std::move(cache.times);
    states_ = std::move(cache.states);

    BackReactionTimeline tl;
    tl.times = times_;
    tl.states = states_;
    curve_ = survival(tl);
}

ClickSampler::Draw ClickSampler::draw_from_cache(double u, std::mt19937_64& eng) const {
    Draw out;
    if (u < curve_.values.back()) {
        out.censored = true;
        return out;
    }

    const CacheDraw cd = draw_time(times_, states_, curve_.values, u);
    if (!(cd.trace > 0.0)) {
        throw NumericalError("ClickSampler: interpolated state has nonpositive trace");
    }

    const std::size_t chosen = pick_weighted_target(targets_, cd.state, eng);
    if (chosen == kNoTarget) {
        throw NumericalError("ClickSampler: total transition rate vanished at the event time");
    }

    out.time = cd.time;
    out.target = targets_[chosen].first;
    out.post = post_transition_state(red_, ComplexOperator(cd.state / cd.trace), mu0_,
                                     out.target);
    return out;
}

Trajectory ClickSampler::sample(std::uint64_t master_seed, std::uint64_t index,
                                bool chain) const {
    std::mt19937_64 eng(trajectory_stream_seed(master_seed, index));
    Trajectory traj;
    traj.seed = master_seed;
    traj.index = index;

    const double u = uniform01(eng);
    Draw first = draw_from_cache(u, eng);
    if (first.censored) {
        traj.censored = true;
        return traj;
    }
    traj.events.push_back({first.time, mu0_, first.target, first.post});

    if (chain) append_chain(traj, eng);
    return traj;
}

void ClickSampler::append_chain(Trajectory& traj, std::mt19937_64& eng) const {
    constexpr std::size_t kMaxEvents = 100000;
    int level = traj.events.back().to_level;
    ComplexOperator state = traj.events.back().post_state;
    double t = traj.events.back().time;

    while (traj.events.size() < kMaxEvents) {
        const double span = t_max_ - t;
        if (!(span > 0.0)) break;

        std::vector<std::pair<int, ComplexOperator>> targets;
        for (int nu = 0; nu < red_.spec.levels(); ++nu) {
            if (nu != level && red_.coupled(nu, level)) {
                targets.emplace_back(nu, red_.f.at({nu, level}));
            }
        }
        if (targets.empty()) break;

        const CachedCurve cache =
            build_cached_curve(red_.back_reaction[level], red_.spec.system.hamiltonian, state,
                               span, cfg_, interp_tol_);
        const double u = uniform01(eng);
        if (u < cache.survs.back()) break;

        const CacheDraw cd = draw_time(cache.times, cache.states, cache.survs, u);
        if (!(cd.trace > 0.0)) break;

        const std::size_t chosen = pick_weighted_target(targets, cd.state, eng);
        if (chosen == kNoTarget) break;

        const int target = targets[chosen].first;
        const ComplexOperator post =
            post_transition_state(red_, ComplexOperator(cd.state / cd.trace), level, target);
        t += cd.time;
        traj.events.push_back({t, level, target, post});
        level = target;
        state = post;
    }
}

Trajectory sample_first_click(const ReducedModel& red, const ComplexOperator& rho0, int mu0,
                              std::uint64_t seed, double t_max, const IntegratorConfig& cfg) {
    return ClickSampler(red, rho0, mu0, t_max, cfg).sample(seed, 0);
}

EmpiricalSurvival estimate_survival_mc(const ReducedModel& red, const ComplexOperator& rho0,
                                       int mu0, std::size_t n_traj, std::uint64_t seed,
                                       const std::vector<double>& t_grid,
                                       const IntegratorConfig& cfg, int threads) {
    if (n_traj < 1) throw std::invalid_argument("estimate_survival_mc: n_traj must be >= 1");
    if (t_grid.empty()) throw std::invalid_argument("estimate_survival_mc: empty t_grid");

    const ClickSampler sampler(red, rho0, mu0, t_grid.back(), cfg);

    std::vector<double> click_times(n_traj, kInf);
    const int n_workers = std::clamp<int>(threads, 1, static_cast<int>(n_traj));

    auto worker = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const Trajectory traj = sampler.sample(seed, i);
            if (!traj.censored) click_times[i] = traj.events.front().time;
        }
    };
    if (n_workers == 1) {
        worker(0, n_traj);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
        const std::size_t chunk = (n_traj + n_workers - 1) / n_workers;
        for (int w = 0; w < n_workers; ++w) {
            const std::size_t lo = w * chunk;
            const std::size_t hi = std::min(n_traj, lo + chunk);
            if (lo >= hi) continue;
            pool.emplace_back([&, w, lo, hi] {
                try {
                    worker(lo, hi);
                } catch (...) {
                    errors[static_cast<std::size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& err : errors) {
            if (err) std::rethrow_exception(err);
        }
    }

    EmpiricalSurvival est;
    est.times = t_grid;
    est.n_traj = n_traj;
    est.censored = static_cast<std::size_t>(
        std::count(click_times.begin(), click_times.end(), kInf));

    std::vector<double> sorted = click_times;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(n_traj);
    for (double t : t_grid) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), t);
        const double survivors = static_cast<double>(sorted.end() - it);
        const double p = survivors / n;
        est.p_emp.push_back(p);
        est.ci_halfwidth.push_back(std::sqrt(std::max(0.0, p * (1.0 - p)) / n));
    }
    return est;
}

}  // namespace ultradec
