// integrate.hpp — Fixed-step RK4 and adaptive RK45 (Dormand–Prince) steppers
// for complex linear ODE systems on flat state vectors.

#pragma once

#include <functional>
#include <limits>

#include <Eigen/Dense>

#include "ultradec/core.hpp"

namespace ultradec {

enum class StepMethod { rk4, rk45 };

struct IntegratorConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-12;
    // Upper bound on the step size. For the fixed-step method this is the
    // step itself and must be finite.
    double max_step = std::numeric_limits<double>::infinity();
    StepMethod method = StepMethod::rk45;
};

// Throws std::invalid_argument when tolerances or the step bound are unusable.
void check_config(const IntegratorConfig& cfg);

// dy/dt = f(t, y); f writes its result into the preallocated third argument.
using OdeRhs = std::function<void(double, const Eigen::VectorXcd&, Eigen::VectorXcd&)>;

// Advances y in place from t0 to t1 (t1 ≥ t0). Throws NumericalError on
// step-size underflow, the signature of a system too stiff for the
// configured bounds.
void integrate(const OdeRhs& f, double t0, double t1, Eigen::VectorXcd& y,
               const IntegratorConfig& cfg = {});

}  // namespace ultradec
