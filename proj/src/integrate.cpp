#include "ultradec/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ultradec {

namespace {

// Dormand–Prince 5(4) tableau.
constexpr double kC2 = 1.0 / 5, kC3 = 3.0 / 10, kC4 = 4.0 / 5, kC5 = 8.0 / 9;
constexpr double kA21 = 1.0 / 5;
constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187, kA53 = 64448.0 / 6561,
                 kA54 = -212.0 / 729;
constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33, kA63 = 46732.0 / 5247,
                 kA64 = 49.0 / 176, kA65 = -5103.0 / 18656;
constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192, kB5 = -2187.0 / 6784,
                 kB6 = 11.0 / 84;
// Difference between the 5th- and the embedded 4th-order weights.
constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                 kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

double error_norm(const Eigen::VectorXcd& err, const Eigen::VectorXcd& y0,
                  const Eigen::VectorXcd& y1, double atol, double rtol) {
    const Eigen::Index n = err.size();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sc = atol + rtol * std::max(std::abs(y0(i)), std::abs(y1(i)));
        const double e = std::abs(err(i)) / sc;
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(n));
}

void integrate_rk4(const OdeRhs& f, double t0, double t1, Eigen::VectorXcd& y, double step) {
    const double span = t1 - t0;
    const int n_steps = std::max(1, static_cast<int>(std::ceil(span / step)));
    const double h = span / n_steps;
    const Eigen::Index n = y.size();

    Eigen::VectorXcd k1(n), k2(n), k3(n), k4(n), tmp(n);
    double t = t0;
    for (int s = 0; s < n_steps; ++s) {
        f(t, y, k1);
        tmp = y + (0.5 * h) * k1;
        f(t + 0.5 * h, tmp, k2);
        tmp = y + (0.5 * h) * k2;
        f(t + 0.5 * h, tmp, k3);
        tmp = y + h * k3;
        f(t + h, tmp, k4);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = t0 + (s + 1) * h;
    }
}

void integrate_rk45(const OdeRhs& f, double t0, double t1, Eigen::VectorXcd& y,
                    const IntegratorConfig& cfg) {
    const Eigen::Index n = y.size();
    Eigen::VectorXcd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y5(n), err(n);

    double t = t0;
    double h = std::min(cfg.max_step, t1 - t0);

    f(t, y, k1);  // k1 always holds f(t, y) at the top of the loop (FSAL)
    while (true) {
        const double h_floor = 16.0 * std::numeric_limits<double>::epsilon() *
                               std::max({std::abs(t), std::abs(t1), 1.0});
        const double remaining = t1 - t;
        if (remaining <= h_floor) break;  // within roundoff of the endpoint
        h = std::min(h, remaining);
        if (h < h_floor) {
            throw NumericalError(
                "integrate: step size underflow at t = " + std::to_string(t) +
                "; the system is too stiff for the configured bounds "
                "(keep max_step at or below ~0.1 / largest damping rate, or relax tolerances)");
        }

        ytmp = y + h * (kA21 * k1);
        f(t + kC2 * h, ytmp, k2);
        ytmp = y + h * (kA31 * k1 + kA32 * k2);
        f(t + kC3 * h, ytmp, k3);
        ytmp = y + h * (kA41 * k1 + kA42 * k2 + kA43 * k3);
        f(t + kC4 * h, ytmp, k4);
        ytmp = y + h * (kA51 * k1 + kA52 * k2 + kA53 * k3 + kA54 * k4);
        f(t + kC5 * h, ytmp, k5);
        ytmp = y + h * (kA61 * k1 + kA62 * k2 + kA63 * k3 + kA64 * k4 + kA65 * k5);
        f(t + h, ytmp, k6);
        y5 = y + h * (kB1 * k1 + kB3 * k3 + kB4 * k4 + kB5 * k5 + kB6 * k6);
        f(t + h, y5, k7);

        err = h * (kE1 * k1 + kE3 * k3 + kE4 * k4 + kE5 * k5 + kE6 * k6 + kE7 * k7);
        const double e = error_norm(err, y, y5, cfg.abs_tol, cfg.rel_tol);

        if (!std::isfinite(e)) {
            h *= 0.1;
            continue;
        }
        if (e <= 1.0) {
            t += h;
            y.swap(y5);
            k1.swap(k7);
            const double factor = (e == 0.0) ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
            h = std::min(factor * h, cfg.max_step);
        } else {
            h *= std::clamp(0.9 * std::pow(e, -0.2), 0.2, 0.9);
        }
    }
}

}  // namespace

void check_config(const IntegratorConfig& cfg) {
    if (!(cfg.rel_tol > 0.0) || !(cfg.abs_tol > 0.0)) {
        throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
    }
    if (!(cfg.max_step > 0.0)) {
        throw std::invalid_argument("IntegratorConfig: max_step must be positive");
    }
    if (cfg.method == StepMethod::rk4 && !std::isfinite(cfg.max_step)) {
        throw std::invalid_argument("IntegratorConfig: the fixed-step method needs a finite max_step");
    }
}

void integrate(const OdeRhs& f, double t0, double t1, Eigen::VectorXcd& y,
               const IntegratorConfig& cfg) {
    check_config(cfg);
    if (t1 < t0) throw std::invalid_argument("integrate: t1 must not precede t0");
    if (t1 == t0) return;

    if (cfg.method == StepMethod::rk4) {
        integrate_rk4(f, t0, t1, y, cfg.max_step);
    } else {
        integrate_rk45(f, t0, t1, y, cfg);
    }
}

}  // namespace ultradec
