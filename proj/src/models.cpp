#include "ultradec/models.hpp"

#include <cmath>

namespace ultradec {

ModelSpec build_von_neumann(const VonNeumannParams& p) {
    if (p.outcomes < 1) {
        throw std::invalid_argument("build_von_neumann: need at least one outcome");
    }
    if (p.dephasing < 0.0) {
        throw std::invalid_argument("build_von_neumann: dephasing rate must be nonnegative");
    }
    const int m = p.outcomes;

    ComplexOperator basis = p.probe_basis;
    if (basis.size() == 0) basis = ComplexOperator::Identity(m, m);
    if (basis.rows() != m || basis.cols() != m) {
        throw std::invalid_argument(
            "build_von_neumann: probe basis must be square with one column per outcome");
    }
    if ((basis.adjoint() * basis - ComplexOperator::Identity(m, m)).cwiseAbs().maxCoeff() >
        1e-10) {
        throw std::invalid_argument("build_von_neumann: probe basis is not orthonormal");
    }

    ModelSpec spec;
    spec.device.energies = Eigen::VectorXd::Zero(m + 1);
    spec.device.dephasing_rates = Eigen::VectorXd::Constant(m + 1, p.dephasing);
    spec.system.dim = m;
    spec.system.hamiltonian = ComplexOperator::Zero(m, m);
    for (int mu = 1; mu <= m; ++mu) {
        const Eigen::VectorXcd s = basis.col(mu - 1);
        spec.coupling.set(mu, 0, p.coupling * s * s.adjoint());
    }
    return spec;
}

ComplexOperator lowering_operator(int fock_cutoff) {
    if (fock_cutoff < 1) {
        throw std::invalid_argument("lowering_operator: cutoff must be at least 1");
    }
    const int dim = fock_cutoff + 1;
    ComplexOperator a = ComplexOperator::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

ComplexOperator fock_state(int n, int fock_cutoff) {
    if (n < 0 || n > fock_cutoff) {
        throw std::invalid_argument("fock_state: photon number outside the truncated space");
    }
    const int dim = fock_cutoff + 1;
    ComplexOperator rho = ComplexOperator::Zero(dim, dim);
    rho(n, n) = 1.0;
    return rho;
}

ComplexOperator coherent_state(Complex alpha, int fock_cutoff, double* truncation_weight) {
    const int dim = fock_cutoff + 1;
    Eigen::VectorXcd amp(dim);
    // amplitude(n) = alpha^n / sqrt(n!), built recursively to avoid overflow
    amp(0) = 1.0;
    for (int n = 1; n < dim; ++n) amp(n) = amp(n - 1) * alpha / std::sqrt(static_cast<double>(n));
    amp *= std::exp(-0.5 * std::norm(alpha));

    const double kept = amp.squaredNorm();
    if (truncation_weight != nullptr) *truncation_weight = std::max(0.0, 1.0 - kept);
    if (!(kept > 0.0)) {
        throw std::invalid_argument("coherent_state: amplitude too large for the cutoff");
    }
    amp /= std::sqrt(kept);
    return amp * amp.adjoint();
}

double PhotonDetectorModel::click_rate(const ComplexOperator& rho) const {
    return (2.0 / dephasing) * (e_minus * e_plus * rho).trace().real();
}

PhotonDetectorModel build_photon_detector(const PhotonDetectorParams& p) {
    if (p.fock_cutoff < 1) {
        throw std::invalid_argument("build_photon_detector: fock_cutoff must be at least 1");
    }
    if (!(p.dephasing > 0.0)) {
        throw std::invalid_argument("build_photon_detector: dephasing rate must be positive");
    }
    const int dim = p.fock_cutoff + 1;

    PhotonDetectorModel model;
    model.dephasing = p.dephasing;
    model.field_state = p.field_state.size() == 0 ? fock_state(0, p.fock_cutoff) : p.field_state;
    if (model.field_state.rows() != dim || model.field_state.cols() != dim) {
        throw std::invalid_argument(
            "build_photon_detector: field state does not match the truncated space");
    }
    if (std::abs(model.field_state.trace().real() - 1.0) > 1e-8 ||
        !is_psd(model.field_state, 1e-8)) {
        throw std::invalid_argument(
            "build_photon_detector: field state must be a unit-trace PSD density operator");
    }

    const ComplexOperator a = lowering_operator(p.fock_cutoff);
    model.e_plus = p.coupling * a;
    model.e_minus = model.e_plus.adjoint();
    model.k10 = model.e_plus / p.dephasing;

    // Mean photon number near the cutoff means the truncated space clips the
    // field appreciably.
    const double mean_n = (a.adjoint() * a * model.field_state).trace().real();
    if (mean_n > 0.25 * p.fock_cutoff) {
        model.warnings.push_back(
            "field intensity " + std::to_string(mean_n) + " is above fock_cutoff/4 = " +
            std::to_string(0.25 * p.fock_cutoff) + "; truncation error may be noticeable");
    }

    ModelSpec& spec = model.spec;
    spec.device.energies = Eigen::VectorXd::Zero(2);
    spec.device.energies(1) = p.transition_energy;
    spec.device.dephasing_rates = Eigen::VectorXd::Constant(2, p.dephasing);
    spec.system.dim = dim;
    // Single resonant mode: the field oscillates at the detector transition
    // energy, so the derived K operators reduce to e_plus / dephasing exactly.
    Eigen::VectorXcd diag(dim);
    for (int n = 0; n < dim; ++n) diag(n) = p.transition_energy * n;
    spec.system.hamiltonian = diag.asDiagonal();
    spec.coupling.set(1, 0, model.e_plus);

    return model;
}

ModelSpec build_two_site(const TwoSiteParams& p) {
    if (!(p.hopping > 0.0)) {
        throw std::invalid_argument("build_two_site: hopping energy must be positive");
    }
    if (!(p.dephasing > 0.0)) {
        throw std::invalid_argument("build_two_site: dephasing rate must be positive");
    }

    ModelSpec spec;
    spec.device.energies = Eigen::VectorXd::Zero(2);
    spec.device.dephasing_rates = Eigen::VectorXd::Constant(2, p.dephasing);
    spec.system.dim = 2;
    spec.system.hamiltonian = ComplexOperator::Zero(2, 2);
    spec.system.hamiltonian(0, 1) = -p.hopping;
    spec.system.hamiltonian(1, 0) = -p.hopping;
    ComplexOperator right = ComplexOperator::Zero(2, 2);
    right(1, 1) = p.coupling;
    spec.coupling.set(1, 0, right);
    return spec;
}

double analytic_survival_von_neumann(double chi, double t) {
    if (chi < 0.0 || t < 0.0) {
        throw std::invalid_argument("analytic_survival_von_neumann: chi and t must be nonnegative");
    }
    return std::exp(-2.0 * chi * t);
}

double analytic_survival_two_site(double delta, double chi, double t) {
    if (!(delta > 0.0) || chi < 0.0 || t < 0.0) {
        throw std::invalid_argument("analytic_survival_two_site: need delta > 0, chi >= 0, t >= 0");
    }
    const double four_d2 = 4.0 * delta * delta;
    const double chi2 = chi * chi;
    const double s = chi2 - four_d2;

    // Near critical damping the oscillatory and hyperbolic branches both
    // suffer 0/0 cancellation; switch to the limit polynomial there.
    if (std::abs(s) <= 1e-9 * std::max(four_d2, chi2)) {
        return std::exp(-chi * t) * (1.0 + chi * t + 0.5 * chi2 * t * t);
    }
    if (s < 0.0) {
        const double w = std::sqrt(-s);
        return std::exp(-chi * t) *
               (four_d2 - chi2 * std::cos(w * t) + chi * w * std::sin(w * t)) / (w * w);
    }
    // hyperbolic continuation, with the exponents combined so neither factor
    // overflows at large t (kappa < chi always)
    const double kappa = std::sqrt(s);
    return (0.5 * (chi2 + chi * kappa) * std::exp((kappa - chi) * t) +
            0.5 * (chi2 - chi * kappa) * std::exp(-(kappa + chi) * t) -
            four_d2 * std::exp(-chi * t)) /
           (kappa * kappa);
}

double analytic_survival_photon_detector(const ComplexOperator& field_state, double coupling,
                                         double dephasing, double t) {
    if (!(dephasing > 0.0) || t < 0.0) {
        throw std::invalid_argument(
            "analytic_survival_photon_detector: need dephasing > 0 and t >= 0");
    }
    const double chi = coupling * coupling / dephasing;
    double sum = 0.0;
    for (int n = 0; n < field_state.rows(); ++n) {
        sum += field_state(n, n).real() * std::exp(-2.0 * chi * n * t);
    }
    return sum;
}

}  // namespace ultradec
