#include "ultradec/lindblad.hpp"

#include <cmath>
#include <sstream>

namespace ultradec {

namespace {

// Everything needed to evaluate the right-hand side in the eigenbasis of the
// system Hamiltonian, precomputed once per run.
struct BlockFrame {
    int levels = 0;
    int dim = 0;
    int n = 0;                 // levels * dim
    Eigen::MatrixXcd basis;    // eigenvectors of H (columns)
    Eigen::VectorXd energies;  // eigenvalues of H
    Eigen::MatrixXcd coupling; // assembled V, rotated into the eigenbasis
    Eigen::MatrixXd freq;      // per-entry phase frequency
    Eigen::MatrixXcd damp;     // per-entry pairwise dephasing rate (real values)
    bool static_coupling = false;  // no nonzero coupling entry carries a phase
};

BlockFrame make_frame(const ModelSpec& spec) {
    BlockFrame fr;
    fr.levels = spec.levels();
    fr.dim = spec.dim();
    fr.n = fr.levels * fr.dim;

    Eigen::SelfAdjointEigenSolver<ComplexOperator> es(spec.system.hamiltonian);
    if (es.info() != Eigen::Success) {
        throw NumericalError("evolve_full: eigendecomposition of H_Q failed");
    }
    fr.basis = es.eigenvectors();
    fr.energies = es.eigenvalues();

    fr.coupling = Eigen::MatrixXcd::Zero(fr.n, fr.n);
    fr.freq = Eigen::MatrixXd::Zero(fr.n, fr.n);
    fr.damp = Eigen::MatrixXcd::Zero(fr.n, fr.n);

    for (int mu = 0; mu < fr.levels; ++mu) {
        for (int nu = 0; nu < fr.levels; ++nu) {
            if (mu != nu && spec.coupling.present(mu, nu)) {
                fr.coupling.block(mu * fr.dim, nu * fr.dim, fr.dim, fr.dim) =
                    fr.basis.adjoint() * spec.coupling_block(mu, nu) * fr.basis;
            }
            const double gap = spec.device.energy_gap(mu, nu);
            const double g = spec.device.pair_dephasing(mu, nu);
            for (int a = 0; a < fr.dim; ++a) {
                for (int b = 0; b < fr.dim; ++b) {
                    fr.freq(mu * fr.dim + a, nu * fr.dim + b) =
                        gap + fr.energies(a) - fr.energies(b);
                    fr.damp(mu * fr.dim + a, nu * fr.dim + b) = g;
                }
            }
        }
    }

    double max_phased = 0.0;
    for (int i = 0; i < fr.n; ++i)
        for (int j = 0; j < fr.n; ++j)
            if (fr.coupling(i, j) != Complex(0, 0))
                max_phased = std::max(max_phased, std::abs(fr.freq(i, j)));
    fr.static_coupling = (max_phased == 0.0);

    return fr;
}

class FullRhs {
  public:
    explicit FullRhs(const BlockFrame& fr)
        : fr_(fr), w_(fr.n, fr.n), tmp_(fr.n, fr.n) {}

    void operator()(double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        const int n = fr_.n;
        Eigen::Map<const Eigen::MatrixXcd> rho(y.data(), n, n);
        Eigen::Map<Eigen::MatrixXcd> out(dy.data(), n, n);

        const Eigen::MatrixXcd* v = &fr_.coupling;
        if (!fr_.static_coupling) {
            const Complex* v0 = fr_.coupling.data();
            const double* fq = fr_.freq.data();
            Complex* wd = w_.data();
            const Eigen::Index sz = fr_.coupling.size();
            for (Eigen::Index i = 0; i < sz; ++i) {
                wd[i] = (v0[i] == Complex(0, 0)) ? Complex(0, 0)
                                                 : v0[i] * std::polar(1.0, fq[i] * t);
            }
            v = &w_;
        }

        tmp_.noalias() = (*v) * rho;
        tmp_.noalias() -= rho * (*v);
        out = Complex(0, -1) * tmp_;
        out -= fr_.damp.cwiseProduct(rho);
    }

  private:
    const BlockFrame& fr_;
    Eigen::MatrixXcd w_;
    Eigen::MatrixXcd tmp_;
};

// Rotate all blocks of a state with the same system-basis change.
BlockDensityMatrix rotate_blocks(const BlockDensityMatrix& rho, const Eigen::MatrixXcd& u) {
    BlockDensityMatrix out(rho.levels(), rho.dim());
    for (int mu = 0; mu < rho.levels(); ++mu)
        for (int nu = 0; nu < rho.levels(); ++nu)
            out.block(mu, nu) = u.adjoint() * rho.block(mu, nu) * u;
    return out;
}

std::string fmt_sci(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

}  // namespace

Timeline evolve_full(const ModelSpec& spec, const BlockDensityMatrix& rho0,
                     const std::vector<double>& t_grid, const IntegratorConfig& cfg,
                     const Tolerances& tol) {
    check_config(cfg);
    if (auto violations = validate(spec, tol); !violations.empty()) {
        throw std::invalid_argument("evolve_full: invalid model spec: " + violations.front());
    }
    if (rho0.levels() != spec.levels() || rho0.dim() != spec.dim()) {
        throw std::invalid_argument("evolve_full: initial state does not match the model spec");
    }
    if (auto violations = validate(rho0, tol); !violations.empty()) {
        throw std::invalid_argument("evolve_full: invalid initial state: " + violations.front());
    }
    if (t_grid.empty() || t_grid.front() != 0.0) {
        throw std::invalid_argument("evolve_full: t_grid must start at 0");
    }
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        if (!(t_grid[k] > t_grid[k - 1])) {
            throw std::invalid_argument("evolve_full: t_grid must increase strictly");
        }
    }

    BlockFrame frame = make_frame(spec);
    FullRhs rhs(frame);

    IntegratorConfig eff = cfg;
    const double gamma_max = spec.device.dephasing_rates.maxCoeff();
    if (cfg.method == StepMethod::rk45 && gamma_max > 0.0) {
        eff.max_step = std::min(eff.max_step, 0.1 / gamma_max);
    }

    // Integrate in the eigenbasis of H_Q; rotate back at the sample points.
    BlockDensityMatrix rho_eig = rotate_blocks(rho0, frame.basis);
    Eigen::VectorXcd y(frame.n * frame.n);
    {
        Eigen::Map<Eigen::MatrixXcd> m(y.data(), frame.n, frame.n);
        m = assemble_full(rho_eig);
    }

    Timeline tl;
    tl.times = t_grid;
    tl.states.reserve(t_grid.size());

    auto rhs_fn = [&rhs](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
        rhs(t, v, dv);
    };

    for (std::size_t k = 0; k < t_grid.size(); ++k) {
        if (k > 0) {
            try {
                integrate(rhs_fn, t_grid[k - 1], t_grid[k], y, eff);
            } catch (const NumericalError& e) {
                throw NumericalError(std::string(e.what()) + " [gamma_max = " +
                                     fmt_sci(gamma_max) + ", gamma_max * max_step = " +
                                     fmt_sci(gamma_max * eff.max_step) + "]");
            }
        }

        Eigen::Map<Eigen::MatrixXcd> m(y.data(), frame.n, frame.n);
        const double tr = m.trace().real();
        if (std::abs(tr - 1.0) > tol.trace) {
            if (tr <= 0.0) {
                throw NumericalError("evolve_full: trace collapsed at t = " +
                                     std::to_string(t_grid[k]));
            }
            m /= tr;
            tl.warnings.push_back("t = " + std::to_string(t_grid[k]) + ": trace drift " +
                                  fmt_sci(tr - 1.0) + " renormalised");
        }

        BlockDensityMatrix state =
            rotate_blocks(disassemble(m, frame.levels, frame.dim), frame.basis.adjoint());

        const ComplexOperator assembled = assemble_full(state);
        const double herm_dev = (assembled - assembled.adjoint()).cwiseAbs().maxCoeff();
        if (herm_dev > tol.hermiticity) {
            throw NumericalError("evolve_full: hermiticity violated by " + fmt_sci(herm_dev) +
                                 " at t = " + std::to_string(t_grid[k]));
        }
        const double min_eig = min_eigenvalue(assembled);
        if (min_eig < -tol.psd) {
            throw NumericalError("evolve_full: positivity violated (min eigenvalue " +
                                 fmt_sci(min_eig) + ") at t = " + std::to_string(t_grid[k]));
        }

        tl.states.push_back(std::move(state));
    }

    return tl;
}

Eigen::VectorXd device_populations(const BlockDensityMatrix& rho, double tol) {
    Eigen::VectorXd p(rho.levels());
    for (int mu = 0; mu < rho.levels(); ++mu) {
        const Complex tr = rho.block(mu, mu).trace();
        if (std::abs(tr.imag()) > tol) {
            throw NumericalError("device_populations: population " + std::to_string(mu) +
                                 " has imaginary residue " + std::to_string(tr.imag()));
        }
        p(mu) = tr.real();
    }
    return p;
}

Eigen::MatrixXd coherence_norms(const BlockDensityMatrix& rho) {
    Eigen::MatrixXd norms = Eigen::MatrixXd::Zero(rho.levels(), rho.levels());
    for (int mu = 0; mu < rho.levels(); ++mu)
        for (int nu = 0; nu < rho.levels(); ++nu)
            if (mu != nu) norms(mu, nu) = rho.block(mu, nu).norm();
    return norms;
}

}  // namespace ultradec
