#pragma once

#include <Eigen/Dense>

#include "dbec/units.hpp"

namespace dbec {

/// Real Gaussian width parameters (A_r, A_z) of a stationary trial state, in
/// inverse squared dipole lengths.
struct WidthVector {
    double a_r = 0.0;
    double a_z = 0.0;

    /// Cloud aspect kappa = sigma_z / sigma_r = sqrt(A_r / A_z).
    double kappa() const;
    /// |A|^2 of the normalized Gaussian, (2/pi)^{3/2} A_r sqrt(A_z).
    double norm_amplitude_sq() const;
    void validate() const;
};

/// Scaled mean-field energy split into the four terms of the Hamiltonian.
/// "Scaled" means N^2 times the per-particle energy in units of E_d, i.e. the
/// energy of the formal one-boson problem at trap frequencies N^2 gamma.
struct EnergyBreakdown {
    double kinetic = 0.0;
    double trap = 0.0;
    double contact = 0.0;
    double dipolar = 0.0;
    double total = 0.0;
};

namespace meanfield {

/// Dipolar anisotropy function F(kappa), kappa = sqrt(A_r / A_z).
/// F(1) = 0, F -> 1 as kappa -> inf (prolate), F -> -2 as kappa -> 0.
double anisotropy_function(double kappa);

EnergyBreakdown mean_field_energy(const WidthVector& w, const TrapParams& p);

/// Analytic (dE/dA_r, dE/dA_z).
Eigen::Vector2d energy_gradient(const WidthVector& w, const TrapParams& p);

/// Analytic second derivatives in (A_r, A_z).
Eigen::Matrix2d energy_hessian(const WidthVector& w, const TrapParams& p);

/// Gaussian expectation of the mean-field operator: kinetic + trap +
/// 2 (contact + dipolar).
double chemical_potential(const WidthVector& w, const TrapParams& p);

/// Gradient of the interaction energy (contact + dipolar) only; the
/// time-dependent equations of motion are driven by it.
Eigen::Vector2d interaction_gradient(const WidthVector& w, const TrapParams& p);

/// Natural energy scale of a parameter set, N^2 gamma_bar.
double energy_scale(const TrapParams& p);

}  // namespace meanfield
}  // namespace dbec
