#pragma once

#include <cstdint>
#include <string>

namespace dbec {

/// Atomic species entering the dipole length: mass in electron masses and
/// magnetic moment in Bohr magnetons.
struct AtomSpec {
    double mass_ratio = 0.0;       // m / m_e
    double magnetic_moment = 0.0;  // mu / mu_B

    /// 52Cr with the given moment (6 mu_B for the fully polarized atom).
    static AtomSpec chromium52(double moment = 6.0);
    /// Lookup by short element name ("cr", "cr52"); throws on unknown names.
    static AtomSpec from_element(const std::string& element, double moment);
};

/// Scaled trap configuration in dipole units.
///
/// Only the particle-number invariant combinations are stored: the
/// scattering length a/a_d and the scaled trap frequencies N^2 gamma_{r,z}.
/// `dipole_coupling` multiplies the dipole-dipole term; it is 1 for the
/// physical model and 0 for the contact-only reference model.
struct TrapParams {
    double scattering_ratio = 0.0;
    double scaled_gamma_r = 1.0;
    double scaled_gamma_z = 1.0;
    double dipole_coupling = 1.0;

    /// From aspect ratio lambda = gamma_z / gamma_r and the scaled geometric
    /// mean N^2 gamma_bar = N^2 gamma_r^{2/3} gamma_z^{1/3}.
    static TrapParams from_mean(double scaled_gamma_bar, double aspect_ratio,
                                double scattering_ratio = 0.0);

    double aspect_ratio() const { return scaled_gamma_z / scaled_gamma_r; }
    double scaled_gamma_bar() const;

    TrapParams with_scattering(double a) const {
        TrapParams p = *this;
        p.scattering_ratio = a;
        return p;
    }

    /// Throws std::invalid_argument unless both frequencies are positive and
    /// finite.
    void validate() const;
};

struct DipoleUnits {
    double length_bohr;   // a_d / a_0
    double length_m;
    double energy_ev;     // E_d
    double omega_rad_s;   // omega_d = E_d / hbar
    double frequency_hz;  // omega_d / 2 pi
};

/// a_d = (alpha^2 / 2)(m / m_e)(mu / mu_B)^2 a_0, returned in Bohr radii.
double dipole_length(const AtomSpec& spec);

/// Energy and frequency units E_d = hbar^2 / (2 m a_d^2), omega_d = E_d / hbar.
DipoleUnits derived_units(const AtomSpec& spec);

/// Laboratory trap description.
struct LabTrap {
    std::uint64_t particle_number = 1;
    double freq_r_hz = 0.0;  // omega_r / 2 pi
    double freq_z_hz = 0.0;  // omega_z / 2 pi
    double scattering_bohr = 0.0;
};

/// gamma = omega / (2 omega_d), multiplied by N^2; a/a_d from a in Bohr radii.
TrapParams scale_lab_to_params(const LabTrap& lab, const AtomSpec& spec);

/// Dutta-Meystre / Ronen dipole strength D = sqrt(N^2 gamma_r / 2).
double d_parameter(const TrapParams& params);

}  // namespace dbec
