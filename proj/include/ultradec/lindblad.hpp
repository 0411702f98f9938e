// lindblad.hpp — Reference integration of the joint device+system master
// equation in block form. This is the ground truth the reduced solvers are
// validated against.

#pragma once

#include <string>
#include <vector>

#include "ultradec/core.hpp"
#include "ultradec/integrate.hpp"

namespace ultradec {

struct Timeline {
    std::vector<double> times;
    std::vector<BlockDensityMatrix> states;
    std::vector<std::string> warnings;
};

// Integrates the interaction-picture block equation
//
//   d/dt rho(mu,nu) = -i sum_l [ e^{i W(mu,l) t} V^I(mu,l) rho(l,nu)
//                              - rho(mu,l) V^I(l,nu) e^{i W(l,nu) t} ]
//                     - g(mu,nu) rho(mu,nu),
//
// where W are the device energy gaps, g the pairwise dephasing rates and
// V^I(t) = e^{+iHt} V e^{-iHt} is evaluated through the eigendecomposition of
// the system Hamiltonian, computed once per call.
//
// t_grid must start at 0 and increase strictly; the returned Timeline is
// sampled exactly there. Trace drift beyond tol.trace is renormalised away
// and logged in Timeline.warnings; hermiticity or positivity loss beyond
// tolerance aborts with NumericalError. In adaptive mode the step is bounded
// by 0.1 / max dephasing rate to keep the fast-damped coherences stable.
Timeline evolve_full(const ModelSpec& spec, const BlockDensityMatrix& rho0,
                     const std::vector<double>& t_grid, const IntegratorConfig& cfg = {},
                     const Tolerances& tol = {});

// Level populations p(mu) = Re tr rho(mu,mu). An imaginary residue above tol
// signals integrator corruption and throws NumericalError.
Eigen::VectorXd device_populations(const BlockDensityMatrix& rho, double tol = 1e-9);

// Frobenius norms of the coherence blocks; symmetric with zero diagonal.
// The largest entry is the standard diagnostic for how deep in the
// ultradecoherence regime a run is.
Eigen::MatrixXd coherence_norms(const BlockDensityMatrix& rho);

}  // namespace ultradec
