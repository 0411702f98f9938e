// jump.hpp — The emergent classical stochastic layer: conditional
// (trace-decreasing) back-reaction evolution, survival curves, first-step
// distributions, post-transition states, and seeded Monte Carlo sampling of
// measurement clicks.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ultradec/core.hpp"
#include "ultradec/integrate.hpp"
#include "ultradec/reduction.hpp"

namespace ultradec {

// Pr(T ≥ t): the probability that no transition out of the conditioning
// level has happened by time t.
struct SurvivalCurve {
    std::vector<double> times;   // increasing, starting at 0
    std::vector<double> values;  // values[0] = 1, nonincreasing, within [0,1]
};

struct FirstStepDistribution {
    int source = 0;
    // probabilities(nu) = chance that the first transition lands on level nu;
    // the source entry is zero.
    Eigen::VectorXd probabilities;
    double escape_total = 0.0;  // sum of probabilities
    double remainder = 0.0;     // survival mass left at the horizon (bound on the missed weight)
    std::vector<std::string> warnings;
};

struct ClickEvent {
    double time = 0.0;
    int from_level = 0;
    int to_level = 0;
    ComplexOperator post_state;  // unit-trace PSD state of the measured system
};

struct Trajectory {
    std::uint64_t seed = 0;   // master seed
    std::uint64_t index = 0;  // stream index within the ensemble
    std::vector<ClickEvent> events;  // length ≤ 1 unless sampled in chain mode
    bool censored = false;           // no click before the horizon
};

struct BackReactionTimeline {
    std::vector<double> times;
    std::vector<ComplexOperator> states;  // unnormalised conditional states
};

// ------------------------------- RNG streams ---------------------------------
//
// Trajectory i draws from std::mt19937_64 seeded with
// splitmix64(master ^ splitmix64(i + 1)), so every trajectory is a pure
// function of (master seed, index) and parallel ensembles reproduce the
// sequential ones bit for bit.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t trajectory_stream_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(master ^ splitmix64(index + 1));
}

// 53-bit uniform in (0, 1].
inline double uniform01(std::mt19937_64& eng) {
    return static_cast<double>((eng() >> 11) + 1) * 0x1.0p-53;
}

// -------------------------- conditional evolution -----------------------------

// Integrates the trace-decreasing conditional dynamics
//
//   d/dt r = -i (H_eff r - r H_eff†),   H_eff = H - i G,
//
// for the back-reaction operator G of the conditioning level. With H = 0 this
// is d/dt r = -(G r + r G†). rho0 must be a unit-trace PSD state; the sampled
// states are unnormalised. A trace increase beyond tol.trace aborts: the loss
// operator has the wrong sign or convention.
BackReactionTimeline back_react(const ComplexOperator& gamma_op, const ComplexOperator& rho0,
                                const ComplexOperator& h_q, const std::vector<double>& t_grid,
                                const IntegratorConfig& cfg = {}, const Tolerances& tol = {});

// Pr(T ≥ t) = tr of each unnormalised state. Sub-tolerance integrator wiggle
// is clamped to keep the curve nonincreasing; anything larger throws.
SurvivalCurve survival(const BackReactionTimeline& timeline, const Tolerances& tol = {});

// First-step probabilities by quadrature of tr(F(nu,mu) r(t)) along the
// back-reaction evolution, accumulated inside the integrator so the error is
// controlled by the solver tolerances. Warns when the survival mass at t_max
// is still above escape_cutoff, reporting the remainder as a bound on the
// missed weight.
FirstStepDistribution first_step_distribution(const ReducedModel& red,
                                              const ComplexOperator& rho0, int mu, double t_max,
                                              const IntegratorConfig& cfg = {},
                                              double escape_cutoff = 1e-6);

// State of the measured system right after the device transition mu → nu:
//
//   ( V(nu,mu) rho K(mu,nu) + K(nu,mu) rho V(mu,nu) ) / trace.
//
// Throws ForbiddenTransitionError when the normalisation trace is at or below
// deg_tol (the transition has zero rate out of rho).
ComplexOperator post_transition_state(const ReducedModel& red, const ComplexOperator& rho,
                                      int mu, int nu, double deg_tol = 1e-12);

// ------------------------------ click sampling --------------------------------

// Samples first-click times by inverse transform on the survival curve: the
// curve is cached on a grid refined until linear interpolation is accurate to
// interp_tol, and each draw costs one binary search. Construction is
// deterministic; sample() is a pure function of (master seed, index).
class ClickSampler {
  public:
    ClickSampler(const ReducedModel& red, ComplexOperator rho0, int mu0, double t_max,
                 IntegratorConfig cfg = {}, double interp_tol = 1e-6);

    // chain = false: first click only. chain = true: keep sampling from each
    // post-click state until the horizon — an extrapolation beyond the
    // first-click semantics, integrating per trajectory past the first event.
    Trajectory sample(std::uint64_t master_seed, std::uint64_t index = 0,
                      bool chain = false) const;

    const SurvivalCurve& curve() const { return curve_; }
    double horizon() const { return t_max_; }

  private:
    struct Draw {
        double time = 0.0;
        int target = -1;
        ComplexOperator post;
        bool censored = false;
    };

    Draw draw_from_cache(double u, std::mt19937_64& eng) const;
    void append_chain(Trajectory& traj, std::mt19937_64& eng) const;

    ReducedModel red_;  // owned copy; the sampler stays valid on its own
    ComplexOperator rho0_;
    int mu0_ = 0;
    double t_max_ = 0.0;
    IntegratorConfig cfg_;
    double interp_tol_ = 1e-6;
    std::vector<double> times_;
    std::vector<ComplexOperator> states_;  // unnormalised conditional states
    SurvivalCurve curve_;
    std::vector<std::pair<int, ComplexOperator>> targets_;  // (level, rate operator)
};

// One-shot convenience wrapper around ClickSampler.
Trajectory sample_first_click(const ReducedModel& red, const ComplexOperator& rho0, int mu0,
                              std::uint64_t seed, double t_max, const IntegratorConfig& cfg = {});

struct EmpiricalSurvival {
    std::vector<double> times;
    std::vector<double> p_emp;
    std::vector<double> ci_halfwidth;  // one standard error, normal approximation
    std::size_t n_traj = 0;
    std::size_t censored = 0;
};

// Direct survival estimate from n_traj independent trajectories (censoring
// only at the horizon, never dropped). threads > 1 fans the ensemble out over
// worker threads; the result is identical to the sequential one.
EmpiricalSurvival estimate_survival_mc(const ReducedModel& red, const ComplexOperator& rho0,
                                       int mu0, std::size_t n_traj, std::uint64_t seed,
                                       const std::vector<double>& t_grid,
                                       const IntegratorConfig& cfg = {}, int threads = 1);

}  // namespace ultradec
