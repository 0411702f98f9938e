#include <doctest.h>

#include <cmath>

#include "ultradec/integrate.hpp"

using namespace ultradec;

namespace {

// dy/dt = lambda * y
OdeRhs scalar_decay(Complex lambda) {
    return [lambda](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        dy = lambda * y;
    };
}

}  // namespace

TEST_CASE("adaptive stepper reproduces an exponential to tolerance") {
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-10;
    cfg.abs_tol = 1e-14;
    Eigen::VectorXcd y(1);
    y(0) = 1.0;
    integrate(scalar_decay(Complex(-2.0, 0.0)), 0.0, 3.0, y, cfg);
    CHECK(std::abs(y(0) - std::exp(-6.0)) < 1e-10);
}

TEST_CASE("adaptive stepper handles oscillatory dynamics") {
    IntegratorConfig cfg;
    cfg.rel_tol = 1e-10;
    cfg.abs_tol = 1e-12;
    Eigen::VectorXcd y(1);
    y(0) = 1.0;
    integrate(scalar_decay(Complex(0.0, 1.0)), 0.0, 10.0, y, cfg);
    CHECK(std::abs(y(0) - std::polar(1.0, 10.0)) < 1e-8);
    CHECK(std::abs(std::abs(y(0)) - 1.0) < 1e-9);  // norm preserved
}

TEST_CASE("fixed-step method converges at fourth order") {
    auto solve_rk4 = [](double step) {
        IntegratorConfig cfg;
        cfg.method = StepMethod::rk4;
        cfg.max_step = step;
        Eigen::VectorXcd y(1);
        y(0) = 1.0;
        integrate(scalar_decay(Complex(-1.0, 0.5)), 0.0, 2.0, y, cfg);
        return y(0);
    };
    const Complex exact = std::exp(Complex(-1.0, 0.5) * 2.0);
    const double err_h = std::abs(solve_rk4(0.02) - exact);
    const double err_h2 = std::abs(solve_rk4(0.01) - exact);
    CHECK(err_h2 < err_h);
    const double order = std::log2(err_h / err_h2);
    CHECK(order > 3.5);
    CHECK(order < 4.5);
}

TEST_CASE("halving the step changes the result by less than 10x rel_tol") {
    auto solve = [](double step) {
        IntegratorConfig cfg;
        cfg.method = StepMethod::rk4;
        cfg.max_step = step;
        Eigen::VectorXcd y(2);
        y << Complex(1.0, 0.0), Complex(0.0, 0.0);
        // two coupled modes
        auto rhs = [](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
            dv(0) = Complex(0, -1) * v(1) - 0.3 * v(0);
            dv(1) = Complex(0, -1) * v(0) - 0.3 * v(1);
        };
        integrate(rhs, 0.0, 5.0, y, cfg);
        return y;
    };
    const Eigen::VectorXcd a = solve(0.01);
    const Eigen::VectorXcd b = solve(0.005);
    CHECK((a - b).cwiseAbs().maxCoeff() < 10.0 * IntegratorConfig{}.rel_tol);
}

TEST_CASE("max_step is honoured") {
    int evals = 0;
    auto rhs = [&evals](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        ++evals;
        dy = -0.01 * y;
    };
    IntegratorConfig cfg;
    cfg.max_step = 0.05;
    Eigen::VectorXcd y(1);
    y(0) = 1.0;
    integrate(rhs, 0.0, 1.0, y, cfg);
    CHECK(evals >= 20 * 6);  // at least span/max_step steps, 6 fresh stages each
}

TEST_CASE("non-finite derivatives drive the step to underflow") {
    auto rhs = [](double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        dy = std::numeric_limits<double>::quiet_NaN() * y;
    };
    Eigen::VectorXcd y(1);
    y(0) = 1.0;
    CHECK_THROWS_AS(integrate(rhs, 0.0, 1.0, y, IntegratorConfig{}), NumericalError);
}

TEST_CASE("bad configurations are rejected up front") {
    Eigen::VectorXcd y(1);
    y(0) = 1.0;

    IntegratorConfig bad;
    bad.rel_tol = -1.0;
    CHECK_THROWS_AS(integrate(scalar_decay(-1.0), 0.0, 1.0, y, bad), std::invalid_argument);

    IntegratorConfig rk4_inf;
    rk4_inf.method = StepMethod::rk4;  // default max_step is infinite
    CHECK_THROWS_AS(integrate(scalar_decay(-1.0), 0.0, 1.0, y, rk4_inf), std::invalid_argument);

    CHECK_THROWS_AS(integrate(scalar_decay(-1.0), 1.0, 0.0, y, IntegratorConfig{}),
                    std::invalid_argument);
}
