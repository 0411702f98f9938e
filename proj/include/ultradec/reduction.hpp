// reduction.hpp — Adiabatic elimination of the fast-damped coherence blocks:
// the derived jump operators K, the rate operators F, the back-reaction
// operators, and the classical master equation for the diagonal blocks.

#pragma once

#include <map>
#include <utility>
#include <vector>

#include "ultradec/core.hpp"
#include "ultradec/integrate.hpp"
#include "ultradec/lindblad.hpp"

namespace ultradec {

// How the K operators are evaluated. `exact` uses the closed-form frequency
// response in the eigenbasis of the system Hamiltonian; `resonant` uses the
// flat-response limit K = V / gamma, which is exact when every coupled
// transition is resonant and guarantees positivity of the reduced dynamics.
enum class KMode { exact, resonant };

// The operators defining the emergent classical jump process, derived once
// from a ModelSpec. Immutable after construction.
struct ReducedModel {
    ModelSpec spec;  // provenance
    KMode mode = KMode::resonant;

    // K(mu,nu) for every coupled ordered pair; K(nu,mu) = K(mu,nu)†.
    std::map<std::pair<int, int>, ComplexOperator> k;
    // F(mu,nu) = K(nu,mu) V(mu,nu) + V(nu,mu) K(mu,nu), the rate operator of
    // the device transition nu → mu.
    std::map<std::pair<int, int>, ComplexOperator> f;
    // back_reaction[mu] = sum_{l != mu} V(mu,l) K(l,mu).
    std::vector<ComplexOperator> back_reaction;

    bool coupled(int mu, int nu) const { return f.count({mu, nu}) > 0; }

    // F(mu,nu), zero when the pair is uncoupled.
    ComplexOperator rate_operator(int mu, int nu) const;
};

// K(mu,nu) in the requested mode. Requires mu != nu and a positive pairwise
// dephasing rate; a vanishing rate means the level pair never decoheres and
// the elimination is undefined (throws std::invalid_argument).
//
// In exact mode the matrix elements in the eigenbasis of H_Q (eigenvalues E)
// are V_ab / (gamma + i (gap + E_a - E_b)); in resonant mode K = V / gamma.
ComplexOperator compute_K(const ModelSpec& spec, int mu, int nu, KMode mode);

// All K, F and back-reaction operators for every coupled pair.
ReducedModel compute_reduced(const ModelSpec& spec, KMode mode = KMode::resonant);

// Integrates the closed equation for the diagonal blocks,
//
//   d/dt s_mu = -i [H, s_mu] - (G_mu s_mu + s_mu G_mu†)
//               + sum_{l != mu} ( V(mu,l) s_l K(l,mu) + K(mu,l) s_l V(l,mu) ),
//
// with G_mu the back-reaction operator of level mu. The Schroedinger-picture
// commutator term carries exactly the interaction-picture time dependence of
// the coefficient operators; sampled states are rotated back to the
// interaction picture so they compare directly against evolve_full output.
//
// diag0 holds one dim x dim block per level with total trace 1. In resonant
// mode total probability is conserved and drift is renormalised + logged; in
// exact mode drift is reported as a warning only, and a positivity violation
// beyond tol.psd aborts with a diagnostic recommending resonant mode.
Timeline evolve_diagonal(const ReducedModel& red, const std::vector<ComplexOperator>& diag0,
                         const std::vector<double>& t_grid, const IntegratorConfig& cfg = {},
                         const Tolerances& tol = {});

// Transition rates out of level `source` for a unit-trace PSD state:
// W(mu) = tr(F(mu,source) rho). Nonnegative in resonant mode; exact mode may
// return small negative values, which are reported as-is.
Eigen::VectorXd transition_rates(const ReducedModel& red, const ComplexOperator& rho,
                                 int source);

}  // namespace ultradec
