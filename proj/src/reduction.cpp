#include "ultradec/reduction.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace ultradec {

namespace {

std::string pair_name(int mu, int nu) {
    return "(" + std::to_string(mu) + "," + std::to_string(nu) + ")";
}

std::string fmt_sci(double x) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << x;
    return os.str();
}

void require_valid(const ModelSpec& spec, const char* who) {
    if (auto violations = validate(spec); !violations.empty()) {
        throw std::invalid_argument(std::string(who) + ": invalid model spec: " +
                                    violations.front());
    }
}

}  // namespace

ComplexOperator ReducedModel::rate_operator(int mu, int nu) const {
    auto it = f.find({mu, nu});
    if (it == f.end()) return ComplexOperator::Zero(spec.dim(), spec.dim());
    return it->second;
}

ComplexOperator compute_K(const ModelSpec& spec, int mu, int nu, KMode mode) {
    require_valid(spec, "compute_K");
    if (mu == nu) throw std::invalid_argument("compute_K: needs two distinct levels");
    if (mu < 0 || mu >= spec.levels() || nu < 0 || nu >= spec.levels()) {
        throw std::invalid_argument("compute_K: level index out of range");
    }
    const double gamma = spec.device.pair_dephasing(mu, nu);
    if (!(gamma > 0.0)) {
        throw std::invalid_argument(
            "compute_K: pairwise dephasing rate for levels " + pair_name(mu, nu) +
            " vanishes; the level pair never decoheres and the elimination is undefined");
    }

    const ComplexOperator v = spec.coupling_block(mu, nu);
    if (mode == KMode::resonant) return v / gamma;

    Eigen::SelfAdjointEigenSolver<ComplexOperator> es(spec.system.hamiltonian);
    if (es.info() != Eigen::Success) {
        throw NumericalError("compute_K: eigendecomposition of H_Q failed");
    }
    const Eigen::MatrixXcd& u = es.eigenvectors();
    const Eigen::VectorXd& e = es.eigenvalues();
    const double gap = spec.device.energy_gap(mu, nu);

    ComplexOperator k_eig = u.adjoint() * v * u;
    for (int a = 0; a < spec.dim(); ++a) {
        for (int b = 0; b < spec.dim(); ++b) {
            k_eig(a, b) /= Complex(gamma, gap + e(a) - e(b));
        }
    }
    return u * k_eig * u.adjoint();
}

ReducedModel compute_reduced(const ModelSpec& spec, KMode mode) {
    require_valid(spec, "compute_reduced");

    ReducedModel red;
    red.spec = spec;
    red.mode = mode;

    const int L = spec.levels();
    const int d = spec.dim();

    for (int mu = 0; mu < L; ++mu) {
        for (int nu = 0; nu < L; ++nu) {
            if (mu == nu || !spec.coupling.present(mu, nu)) continue;
            red.k[{mu, nu}] = compute_K(spec, mu, nu, mode);
        }
    }

    for (const auto& [key, k_mn] : red.k) {
        const auto [mu, nu] = key;
        const ComplexOperator v_mn = spec.coupling_block(mu, nu);
        const ComplexOperator v_nm = spec.coupling_block(nu, mu);
        red.f[{mu, nu}] = red.k.at({nu, mu}) * v_mn + v_nm * k_mn;
    }

    red.back_reaction.assign(L, ComplexOperator::Zero(d, d));
    for (int mu = 0; mu < L; ++mu) {
        for (int lambda = 0; lambda < L; ++lambda) {
            if (lambda == mu || !spec.coupling.present(mu, lambda)) continue;
            red.back_reaction[mu] += spec.coupling_block(mu, lambda) * red.k.at({lambda, mu});
        }
    }

    return red;
}

namespace {

// Precomputed coefficient operators for the diagonal-block equation.
struct DiagonalGenerator {
    int levels = 0;
    int dim = 0;
    ComplexOperator hamiltonian;
    std::vector<ComplexOperator> loss;  // back-reaction operator per level
    struct Gain {
        int into = 0;
        int from = 0;
        ComplexOperator v;  // V(into,from)
        ComplexOperator k;  // K(from,into)
    };
    std::vector<Gain> gains;
};

class DiagonalRhs {
  public:
    explicit DiagonalRhs(const DiagonalGenerator& gen)
        : gen_(gen), tmp_(gen.dim, gen.dim), acc_(gen.dim, gen.dim) {}

    void operator()(double, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) {
        const int d = gen_.dim;
        const auto block = [d](const Eigen::VectorXcd& v, int mu) {
            return Eigen::Map<const Eigen::MatrixXcd>(v.data() + mu * d * d, d, d);
        };
        for (int mu = 0; mu < gen_.levels; ++mu) {
            Eigen::Map<Eigen::MatrixXcd> out(dy.data() + mu * d * d, d, d);
            auto s = block(y, mu);
            tmp_.noalias() = gen_.hamiltonian * s;
            tmp_.noalias() -= s * gen_.hamiltonian;
            out = Complex(0, -1) * tmp_;
            tmp_.noalias() = gen_.loss[mu] * s;
            out -= tmp_;
            out -= tmp_.adjoint();  // s G† = (G s)† for hermitian s
        }
        for (const auto& g : gen_.gains) {
            Eigen::Map<Eigen::MatrixXcd> out(dy.data() + g.into * d * d, d, d);
            auto s = block(y, g.from);
            tmp_.noalias() = g.v * s;
            acc_.noalias() = tmp_ * g.k;
            out += acc_;
            out += acc_.adjoint();  // K s V = (V s K)† for hermitian s
        }
    }

  private:
    const DiagonalGenerator& gen_;
    Eigen::MatrixXcd tmp_;
    Eigen::MatrixXcd acc_;
};

}  // namespace

Timeline evolve_diagonal(const ReducedModel& red, const std::vector<ComplexOperator>& diag0,
                         const std::vector<double>& t_grid, const IntegratorConfig& cfg,
                         const Tolerances& tol) {
    check_config(cfg);
    const int L = red.spec.levels();
    const int d = red.spec.dim();

    if (static_cast<int>(diag0.size()) != L) {
        throw std::invalid_argument("evolve_diagonal: need one block per device level");
    }
    double tr0 = 0.0;
    for (int mu = 0; mu < L; ++mu) {
        if (diag0[mu].rows() != d || diag0[mu].cols() != d) {
            throw std::invalid_argument("evolve_diagonal: block " + std::to_string(mu) +
                                        " has wrong dimension");
        }
        if (!is_psd(diag0[mu], tol.psd)) {
            throw std::invalid_argument("evolve_diagonal: block " + std::to_string(mu) +
                                        " is not positive semidefinite");
        }
        tr0 += diag0[mu].trace().real();
    }
    if (std::abs(tr0 - 1.0) > tol.trace) {
        throw std::invalid_argument("evolve_diagonal: blocks must have total trace 1");
    }
    if (t_grid.empty() || t_grid.front() != 0.0) {
        throw std::invalid_argument("evolve_diagonal: t_grid must start at 0");
    }
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
        if (!(t_grid[i] > t_grid[i - 1])) {
            throw std::invalid_argument("evolve_diagonal: t_grid must increase strictly");
        }
    }

    DiagonalGenerator gen;
    gen.levels = L;
    gen.dim = d;
    gen.hamiltonian = red.spec.system.hamiltonian;
    gen.loss = red.back_reaction;
    for (const auto& kv : red.k) {
        const auto [mu, nu] = kv.first;
        gen.gains.push_back({mu, nu, red.spec.coupling_block(mu, nu), red.k.at({nu, mu})});
    }

    // Validity of the elimination requires the diagonal blocks to move much
    // slower than the coherences decay.
    Timeline tl;
    tl.times = t_grid;
    {
        double gamma_min = std::numeric_limits<double>::infinity();
        for (const auto& kv : red.k) {
            gamma_min = std::min(gamma_min,
                                 red.spec.device.pair_dephasing(kv.first.first, kv.first.second));
        }
        double max_rate = 0.0;
        for (int mu = 0; mu < L; ++mu) {
            max_rate = std::max(
                max_rate, (gen.loss[mu] + gen.loss[mu].adjoint()).cwiseAbs().maxCoeff());
        }
        if (std::isfinite(gamma_min) && max_rate / gamma_min > 0.1) {
            tl.warnings.push_back(
                "timescale separation is weak: max transition rate / min dephasing rate = " +
                fmt_sci(max_rate / gamma_min) + " > 0.1; the reduction may be inaccurate");
        }
    }

    DiagonalRhs rhs(gen);
    auto rhs_fn = [&rhs](double t, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
        rhs(t, v, dv);
    };

    Eigen::SelfAdjointEigenSolver<ComplexOperator> es(red.spec.system.hamiltonian);
    const Eigen::MatrixXcd& u = es.eigenvectors();
    const Eigen::VectorXd& e = es.eigenvalues();
    const bool rotate = (red.spec.system.hamiltonian.cwiseAbs().maxCoeff() > 0.0);

    Eigen::VectorXcd y(L * d * d);
    for (int mu = 0; mu < L; ++mu) {
        Eigen::Map<Eigen::MatrixXcd>(y.data() + mu * d * d, d, d) = diag0[mu];
    }

    tl.states.reserve(t_grid.size());
    bool exact_drift_warned = false;

    for (std::size_t kk = 0; kk < t_grid.size(); ++kk) {
        if (kk > 0) integrate(rhs_fn, t_grid[kk - 1], t_grid[kk], y, cfg);
        const double t = t_grid[kk];

        double tr = 0.0;
        for (int mu = 0; mu < L; ++mu) {
            tr += Eigen::Map<const Eigen::MatrixXcd>(y.data() + mu * d * d, d, d).trace().real();
        }
        if (std::abs(tr - 1.0) > tol.trace) {
            if (red.mode == KMode::resonant) {
                if (tr <= 0.0) {
                    throw NumericalError("evolve_diagonal: trace collapsed at t = " +
                                         std::to_string(t));
                }
                y /= tr;
                tl.warnings.push_back("t = " + std::to_string(t) + ": trace drift " +
                                      fmt_sci(tr - 1.0) + " renormalised");
            } else if (!exact_drift_warned) {
                tl.warnings.push_back("t = " + std::to_string(t) + ": total probability drift " +
                                      fmt_sci(tr - 1.0) +
                                      " (exact K conserves probability only approximately)");
                exact_drift_warned = true;
            }
        }

        BlockDensityMatrix state(L, d);
        for (int mu = 0; mu < L; ++mu) {
            ComplexOperator s = Eigen::Map<const Eigen::MatrixXcd>(y.data() + mu * d * d, d, d);
            const double min_eig = min_eigenvalue(s);
            if (min_eig < -tol.psd) {
                if (red.mode == KMode::exact) {
                    throw NumericalError(
                        "evolve_diagonal: block " + std::to_string(mu) +
                        " lost positivity (min eigenvalue " + fmt_sci(min_eig) + ") at t = " +
                        std::to_string(t) + "; exact K does not guarantee positivity — "
                        "rerun with resonant K");
                }
                throw NumericalError("evolve_diagonal: block " + std::to_string(mu) +
                                     " lost positivity (min eigenvalue " + fmt_sci(min_eig) +
                                     ") at t = " + std::to_string(t));
            }
            if (rotate) {
                // interaction picture: e^{+iHt} s e^{-iHt}
                ComplexOperator s_eig = u.adjoint() * s * u;
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b)
                        s_eig(a, b) *= std::polar(1.0, (e(a) - e(b)) * t);
                s = u * s_eig * u.adjoint();
            }
            state.block(mu, mu) = std::move(s);
        }
        tl.states.push_back(std::move(state));
    }

    return tl;
}

Eigen::VectorXd transition_rates(const ReducedModel& red, const ComplexOperator& rho,
                                 int source) {
    const int L = red.spec.levels();
    const int d = red.spec.dim();
    if (source < 0 || source >= L) {
        throw std::invalid_argument("transition_rates: source level out of range");
    }
    if (rho.rows() != d || rho.cols() != d) {
        throw std::invalid_argument("transition_rates: state has wrong dimension");
    }
    if (std::abs(rho.trace().real() - 1.0) > 1e-6) {
        throw std::invalid_argument("transition_rates: state must have unit trace");
    }
    if (!is_psd(rho, 1e-6)) {
        throw std::invalid_argument("transition_rates: state must be positive semidefinite");
    }

    Eigen::VectorXd w = Eigen::VectorXd::Zero(L);
    for (int mu = 0; mu < L; ++mu) {
        if (mu == source || !red.coupled(mu, source)) continue;
        const Complex tr = (red.f.at({mu, source}) * rho).trace();
        if (std::abs(tr.imag()) > 1e-9) {
            throw NumericalError("transition_rates: rate " + std::to_string(mu) +
                                 " has imaginary residue " + std::to_string(tr.imag()));
        }
        w(mu) = tr.real();
    }
    return w;
}

}  // namespace ultradec
