// core.hpp — Operators, device/system/coupling specifications, block density
// matrices, and structural validation shared by all solvers.

#pragma once

#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ultradec {

using Complex = std::complex<double>;

// Dense square matrix of complex amplitudes acting on the measured system.
// Natural units throughout (hbar = 1).
using ComplexOperator = Eigen::MatrixXcd;

// An integration or a derived quantity broke a physical invariant beyond
// tolerance. The CLI maps this to exit code 2.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// The requested device transition has zero rate, so no post-transition state
// is defined.
class ForbiddenTransitionError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

struct Tolerances {
    double trace = 1e-9;
    double hermiticity = 1e-10;
    double psd = 1e-8;
};

// --------------------------- operator predicates ----------------------------

template <typename Derived>
bool is_hermitian(const Eigen::MatrixBase<Derived>& a, double tol) {
    if (a.rows() != a.cols()) return false;
    return ((a - a.adjoint()).cwiseAbs().maxCoeff()) <= tol;
}

// Smallest eigenvalue of the hermitian part (a + a†)/2.
double min_eigenvalue(const ComplexOperator& a);

// Hermitian within tol and smallest eigenvalue ≥ -tol.
bool is_psd(const ComplexOperator& a, double tol);

// ------------------------------- model specs ---------------------------------

// Measurement device: levels 0..M of the preferred basis, level 0 being the
// ready state and levels ≥ 1 the pointer states.
struct DeviceSpec {
    Eigen::VectorXd energies;         // one per level
    Eigen::VectorXd dephasing_rates;  // nonnegative, one per level

    int levels() const { return static_cast<int>(energies.size()); }
    int num_outcomes() const { return levels() - 1; }

    // Energy difference of levels mu and nu (antisymmetric).
    double energy_gap(int mu, int nu) const { return energies(mu) - energies(nu); }

    // Pairwise dephasing rate: the mean of the two level rates for mu ≠ nu,
    // zero on the diagonal.
    double pair_dephasing(int mu, int nu) const {
        return mu == nu ? 0.0 : 0.5 * (dephasing_rates(mu) + dephasing_rates(nu));
    }
};

// The measured quantum system.
struct SystemSpec {
    int dim = 0;
    ComplexOperator hamiltonian;  // hermitian, dim x dim
};

// Interaction blocks V(mu,nu), each coupling the device transition nu → mu to
// an operator on the measured system. Only one orientation per pair is
// stored; the mirror block is the adjoint of the stored one, so the pairwise
// hermiticity constraint holds by construction.
class CouplingSpec {
  public:
    // Stores v under the canonical orientation (larger index first); passing
    // mu < nu stores the adjoint. Diagonal blocks are kept as given so that
    // validate() can flag them.
    void set(int mu, int nu, ComplexOperator v);

    bool present(int mu, int nu) const;

    // V(mu,nu): the stored block, the adjoint of its mirror, or zero(dim)
    // when the pair is uncoupled.
    ComplexOperator block(int mu, int nu, int dim) const;

    const std::map<std::pair<int, int>, ComplexOperator>& stored() const { return blocks_; }

  private:
    std::map<std::pair<int, int>, ComplexOperator> blocks_;
};

// Complete description of a device coupled to a measured system. Immutable
// value semantics; safe to share across threads once built.
struct ModelSpec {
    DeviceSpec device;
    SystemSpec system;
    CouplingSpec coupling;

    int levels() const { return device.levels(); }
    int dim() const { return system.dim; }
    int joint_dim() const { return levels() * dim(); }

    ComplexOperator coupling_block(int mu, int nu) const {
        return coupling.block(mu, nu, dim());
    }
};

// --------------------------- block density matrix ----------------------------

// Joint state expanded over the device preferred basis: a levels x levels
// grid of dim x dim operators on the measured system. Diagonal blocks carry
// the level populations, off-diagonal blocks the device coherences.
class BlockDensityMatrix {
  public:
    BlockDensityMatrix() = default;
    BlockDensityMatrix(int levels, int dim);

    int levels() const { return levels_; }
    int dim() const { return dim_; }

    ComplexOperator& block(int mu, int nu);
    const ComplexOperator& block(int mu, int nu) const;

    // Sum of the diagonal block traces (real part).
    double total_trace() const;

  private:
    int levels_ = 0;
    int dim_ = 0;
    std::vector<ComplexOperator> blocks_;
};

// |level⟩⟨level| ⊗ rho_q.
BlockDensityMatrix product_state(int level, const ComplexOperator& rho_q, int levels);

// Single (levels·dim) square matrix with block (mu,nu) at row offset mu·dim
// and column offset nu·dim. disassemble() is its exact inverse.
ComplexOperator assemble_full(const BlockDensityMatrix& rho);
BlockDensityMatrix disassemble(const ComplexOperator& full, int levels, int dim);

// -------------------------------- validation ---------------------------------

// Every violated invariant of the spec, each phrased with a human-readable
// location. Empty result = valid. Violations are data, not failures; this
// never throws.
std::vector<std::string> validate(const ModelSpec& spec, const Tolerances& tol = {});

// Structural checks for a state: blockwise hermiticity, unit total trace,
// positive semidefiniteness of the assembled matrix, populations in [0,1].
std::vector<std::string> validate(const BlockDensityMatrix& rho, const Tolerances& tol = {});

}  // namespace ultradec
