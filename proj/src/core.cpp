#include "ultradec/core.hpp"

#include <cmath>
#include <sstream>

namespace ultradec {

double min_eigenvalue(const ComplexOperator& a) {
    ComplexOperator h = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<ComplexOperator> solver(h, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("min_eigenvalue: eigenvalue computation failed");
    }
    return solver.eigenvalues().minCoeff();
}

bool is_psd(const ComplexOperator& a, double tol) {
    if (!is_hermitian(a, tol)) return false;
    return min_eigenvalue(a) >= -tol;
}

// ------------------------------- CouplingSpec --------------------------------

void CouplingSpec::set(int mu, int nu, ComplexOperator v) {
    if (mu >= nu) {
        blocks_[{mu, nu}] = std::move(v);
    } else {
        blocks_[{nu, mu}] = v.adjoint();
    }
}

bool CouplingSpec::present(int mu, int nu) const {
    return blocks_.count(mu >= nu ? std::pair{mu, nu} : std::pair{nu, mu}) > 0;
}

ComplexOperator CouplingSpec::block(int mu, int nu, int dim) const {
    auto it = blocks_.find(mu >= nu ? std::pair{mu, nu} : std::pair{nu, mu});
    if (it == blocks_.end()) return ComplexOperator::Zero(dim, dim);
    if (mu >= nu) return it->second;
    return it->second.adjoint();
}

// ---------------------------- BlockDensityMatrix -----------------------------

BlockDensityMatrix::BlockDensityMatrix(int levels, int dim)
    : levels_(levels), dim_(dim),
      blocks_(static_cast<std::size_t>(levels) * levels, ComplexOperator::Zero(dim, dim)) {
    if (levels < 1 || dim < 1) {
        throw std::invalid_argument("BlockDensityMatrix: levels and dim must be positive");
    }
}

ComplexOperator& BlockDensityMatrix::block(int mu, int nu) {
    return blocks_.at(static_cast<std::size_t>(mu) * levels_ + nu);
}

const ComplexOperator& BlockDensityMatrix::block(int mu, int nu) const {
    return blocks_.at(static_cast<std::size_t>(mu) * levels_ + nu);
}

double BlockDensityMatrix::total_trace() const {
    double sum = 0.0;
    for (int mu = 0; mu < levels_; ++mu) sum += block(mu, mu).trace().real();
    return sum;
}

BlockDensityMatrix product_state(int level, const ComplexOperator& rho_q, int levels) {
    if (level < 0 || level >= levels) {
        throw std::invalid_argument("product_state: level index out of range");
    }
    BlockDensityMatrix rho(levels, static_cast<int>(rho_q.rows()));
    rho.block(level, level) = rho_q;
    return rho;
}

ComplexOperator assemble_full(const BlockDensityMatrix& rho) {
    const int L = rho.levels();
    const int d = rho.dim();
    ComplexOperator full(L * d, L * d);
    for (int mu = 0; mu < L; ++mu)
        for (int nu = 0; nu < L; ++nu) full.block(mu * d, nu * d, d, d) = rho.block(mu, nu);
    return full;
}

BlockDensityMatrix disassemble(const ComplexOperator& full, int levels, int dim) {
    if (full.rows() != levels * dim || full.cols() != levels * dim) {
        throw std::invalid_argument("disassemble: matrix does not match levels*dim");
    }
    BlockDensityMatrix rho(levels, dim);
    for (int mu = 0; mu < levels; ++mu)
        for (int nu = 0; nu < levels; ++nu)
            rho.block(mu, nu) = full.block(mu * dim, nu * dim, dim, dim);
    return rho;
}

// -------------------------------- validation ---------------------------------

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

}  // namespace

std::vector<std::string> validate(const ModelSpec& spec, const Tolerances& tol) {
    std::vector<std::string> out;
    const int L = spec.device.levels();
    const int d = spec.system.dim;

    if (L < 2) {
        out.push_back("device: needs the ready level plus at least one outcome level");
    }
    if (spec.device.dephasing_rates.size() != spec.device.energies.size()) {
        out.push_back("device: expected " + std::to_string(L) + " dephasing rates, got " +
                      std::to_string(spec.device.dephasing_rates.size()));
    } else {
        for (int mu = 0; mu < L; ++mu) {
            if (spec.device.dephasing_rates(mu) < 0.0) {
                out.push_back("device level " + std::to_string(mu) +
                              ": dephasing rate must be nonnegative, got " +
                              fmt(spec.device.dephasing_rates(mu)));
            }
        }
    }

    if (d < 1) {
        out.push_back("system: dimension must be positive");
    } else if (spec.system.hamiltonian.rows() != d || spec.system.hamiltonian.cols() != d) {
        out.push_back("system H_Q: expected " + std::to_string(d) + "x" + std::to_string(d) +
                      ", got " + std::to_string(spec.system.hamiltonian.rows()) + "x" +
                      std::to_string(spec.system.hamiltonian.cols()));
    } else if (!is_hermitian(spec.system.hamiltonian, tol.hermiticity)) {
        out.push_back("system H_Q: not hermitian within tolerance " + fmt(tol.hermiticity));
    }

    for (const auto& [key, v] : spec.coupling.stored()) {
        const auto [mu, nu] = key;
        const std::string where =
            "coupling block (" + std::to_string(mu) + "," + std::to_string(nu) + ")";
        if (mu < 0 || mu >= L || nu < 0 || nu >= L) {
            out.push_back(where + ": level index out of range");
            continue;
        }
        if (d >= 1 && (v.rows() != d || v.cols() != d)) {
            out.push_back(where + ": expected " + std::to_string(d) + "x" + std::to_string(d) +
                          ", got " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
            continue;
        }
        if (mu == nu && v.cwiseAbs().maxCoeff() > 0.0) {
            out.push_back(where + ": diagonal coupling blocks must vanish");
        }
    }

    return out;
}

std::vector<std::string> validate(const BlockDensityMatrix& rho, const Tolerances& tol) {
    std::vector<std::string> out;
    const int L = rho.levels();

    for (int mu = 0; mu < L; ++mu) {
        for (int nu = mu; nu < L; ++nu) {
            const double dev =
                (rho.block(mu, nu) - rho.block(nu, mu).adjoint()).cwiseAbs().maxCoeff();
            if (dev > tol.hermiticity) {
                out.push_back("state block (" + std::to_string(mu) + "," + std::to_string(nu) +
                              "): hermiticity violated by " + fmt(dev));
            }
        }
    }

    const double tr = rho.total_trace();
    if (std::abs(tr - 1.0) > tol.trace) {
        out.push_back("state: total trace " + fmt(tr) + " deviates from 1 beyond tolerance");
    }

    for (int mu = 0; mu < L; ++mu) {
        const Complex p = rho.block(mu, mu).trace();
        if (std::abs(p.imag()) > tol.trace) {
            out.push_back("state population " + std::to_string(mu) +
                          ": imaginary residue " + fmt(p.imag()));
        }
        if (p.real() < -tol.trace || p.real() > 1.0 + tol.trace) {
            out.push_back("state population " + std::to_string(mu) + ": value " + fmt(p.real()) +
                          " outside [0,1]");
        }
    }

    if (min_eigenvalue(assemble_full(rho)) < -tol.psd) {
        out.push_back("state: assembled matrix not positive semidefinite within tolerance");
    }

    return out;
}

}  // namespace ultradec
