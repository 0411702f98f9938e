// models.hpp — Builders and closed-form reference curves for the three
// concrete devices: the ideal projective measurement, the narrow-band
// single-photon detector, and the two-site arrival detector.

#pragma once

#include <string>
#include <vector>

#include "ultradec/core.hpp"

namespace ultradec {

// ------------------------- ideal projective device ---------------------------

struct VonNeumannParams {
    int outcomes = 2;          // number of pointer levels M
    double coupling = 1.0;     // uniform pointer coupling strength
    double dephasing = 100.0;  // uniform level dephasing rate
    // Columns are the probed system states; must be orthonormal and complete
    // (square). Empty selects the computational basis.
    ComplexOperator probe_basis;

    double chi() const { return coupling * coupling / dephasing; }
};

// Device with M pointer levels, flat level energies, uniform dephasing, and
// ready-to-pointer couplings that project onto the probed states. The system
// dimension equals the number of outcomes.
ModelSpec build_von_neumann(const VonNeumannParams& p);

// --------------------------- single-photon detector ---------------------------

struct PhotonDetectorParams {
    double coupling = 0.1;           // field-mode coupling strength
    double dephasing = 10.0;         // mean dephasing rate of ready/clicked
    double transition_energy = 1.0;  // energy difference between clicked and ready
    int fock_cutoff = 20;            // highest retained photon number
    // Field density operator on the truncated number basis; empty = vacuum.
    ComplexOperator field_state;
};

// Two-level detector coupled to a single resonant field mode on a truncated
// number basis, plus the derived operators the resonant reduction produces
// in closed form.
struct PhotonDetectorModel {
    ModelSpec spec;
    ComplexOperator field_state;
    ComplexOperator e_plus;   // coupling * lowering operator
    ComplexOperator e_minus;  // adjoint of e_plus
    ComplexOperator k10;      // e_plus / dephasing
    double dephasing = 0.0;
    std::vector<std::string> warnings;

    // (2 / dephasing) tr(rho E- E+): proportional to the field intensity.
    double click_rate(const ComplexOperator& rho) const;
};

PhotonDetectorModel build_photon_detector(const PhotonDetectorParams& p);

// Number-basis helpers on a space truncated at fock_cutoff (dimension
// fock_cutoff + 1).
ComplexOperator lowering_operator(int fock_cutoff);
ComplexOperator fock_state(int n, int fock_cutoff);
// Truncated coherent state, renormalised; *truncation_weight (optional)
// receives the probability weight dropped above the cutoff.
ComplexOperator coherent_state(Complex alpha, int fock_cutoff,
                               double* truncation_weight = nullptr);

// ----------------------------- two-site arrival ------------------------------

struct TwoSiteParams {
    double hopping = 1.0;    // tunnelling energy between the two sites
    double coupling = 1.0;   // detector coupling at the right site
    double dephasing = 1.0;  // mean dephasing rate of ready/clicked

    double chi() const { return coupling * coupling / dephasing; }
};

// A particle hopping between |L> and |R> with a two-level detector probing
// the right site. Basis order (|L>, |R>); runs conventionally start at |L>.
ModelSpec build_two_site(const TwoSiteParams& p);

// ------------------------ closed-form survival curves -------------------------

// Ideal projective device: Pr(no click by t) = exp(-2 chi t).
double analytic_survival_von_neumann(double chi, double t);

// Two-site arrival detector started at |L>:
//   underdamped  (chi < 2 delta): e^{-chi t} (4 d^2 - chi^2 cos wt + chi w sin wt)/w^2,
//                                 w = sqrt(4 d^2 - chi^2);
//   overdamped   (chi > 2 delta): the hyperbolic continuation (w -> i kappa);
//   critical     (chi = 2 delta): e^{-chi t} (1 + chi t + chi^2 t^2 / 2).
double analytic_survival_two_site(double delta, double chi, double t);

// Single-photon detector: the back-reaction operator is diagonal in the
// number basis, so Pr(no click by t) = sum_n p_n exp(-2 (g^2/gamma) n t).
double analytic_survival_photon_detector(const ComplexOperator& field_state, double coupling,
                                         double dephasing, double t);

}  // namespace ultradec
