#include "dbec/units.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "dbec/constants.hpp"

namespace dbec {

namespace c = constants;

AtomSpec AtomSpec::chromium52(double moment) {
    return AtomSpec{c::chromium52_mass_u * c::atomic_mass_unit_kg / c::electron_mass_kg, moment};
}

AtomSpec AtomSpec::from_element(const std::string& element, double moment) {
    std::string key = element;
    std::transform(key.begin(), key.end(), key.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (key == "cr" || key == "cr52" || key == "52cr") return chromium52(moment);
    throw std::invalid_argument("unknown element '" + element + "' (supported: cr)");
}

TrapParams TrapParams::from_mean(double scaled_gamma_bar, double aspect_ratio,
                                 double scattering_ratio) {
    if (!(scaled_gamma_bar > 0.0) || !(aspect_ratio > 0.0))
        throw std::invalid_argument("gamma_bar and lambda must be positive");
    TrapParams p;
    p.scattering_ratio = scattering_ratio;
    p.scaled_gamma_r = scaled_gamma_bar / std::cbrt(aspect_ratio);
    p.scaled_gamma_z = aspect_ratio * p.scaled_gamma_r;
    return p;
}

double TrapParams::scaled_gamma_bar() const {
    return std::cbrt(scaled_gamma_r * scaled_gamma_r * scaled_gamma_z);
}

void TrapParams::validate() const {
    if (!(scaled_gamma_r > 0.0) || !(scaled_gamma_z > 0.0) || !std::isfinite(scaled_gamma_r) ||
        !std::isfinite(scaled_gamma_z))
        throw std::invalid_argument("scaled trap frequencies must be positive and finite");
    if (!std::isfinite(scattering_ratio))
        throw std::invalid_argument("scattering ratio must be finite");
}

double dipole_length(const AtomSpec& spec) {
    if (!(spec.mass_ratio > 0.0)) throw std::invalid_argument("mass ratio must be positive");
    if (spec.magnetic_moment < 0.0) throw std::invalid_argument("magnetic moment must be >= 0");
    return 0.5 * c::fine_structure * c::fine_structure * spec.mass_ratio * spec.magnetic_moment *
           spec.magnetic_moment;
}

DipoleUnits derived_units(const AtomSpec& spec) {
    const double ad_bohr = dipole_length(spec);
    if (!(ad_bohr > 0.0)) throw std::invalid_argument("dipole units need a nonzero moment");
    const double ad = ad_bohr * c::bohr_radius_m;
    const double mass = spec.mass_ratio * c::electron_mass_kg;
    const double ed_j = c::hbar_js * c::hbar_js / (2.0 * mass * ad * ad);
    const double omega = ed_j / c::hbar_js;
    return DipoleUnits{ad_bohr, ad, ed_j / c::electron_volt_j, omega, omega / (2.0 * c::pi)};
}

TrapParams scale_lab_to_params(const LabTrap& lab, const AtomSpec& spec) {
    if (lab.particle_number == 0) throw std::invalid_argument("particle number must be positive");
    if (!(lab.freq_r_hz > 0.0) || !(lab.freq_z_hz > 0.0))
        throw std::invalid_argument("trap frequencies must be positive");
    const DipoleUnits u = derived_units(spec);
    const double n = static_cast<double>(lab.particle_number);
    const double n2 = n * n;
    // gamma = omega / (2 omega_d) = f / (2 f_d)
    TrapParams p;
    p.scaled_gamma_r = n2 * (lab.freq_r_hz / (2.0 * u.frequency_hz));
    p.scaled_gamma_z = n2 * (lab.freq_z_hz / (2.0 * u.frequency_hz));
    p.scattering_ratio = lab.scattering_bohr / u.length_bohr;
    return p;
}

double d_parameter(const TrapParams& params) {
    if (params.scaled_gamma_r < 0.0) throw std::invalid_argument("negative trap frequency");
    return std::sqrt(0.5 * params.scaled_gamma_r);
}

}  // namespace dbec
