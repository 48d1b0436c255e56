#pragma once

// CODATA 2018 values (SI). Every unit conversion in the library reads from
// this table so that reference checks are reproducible.

namespace dbec::constants {

inline constexpr double fine_structure = 7.2973525693e-3;
inline constexpr double bohr_radius_m = 5.29177210903e-11;
inline constexpr double hbar_js = 1.054571817e-34;
inline constexpr double electron_mass_kg = 9.1093837015e-31;
inline constexpr double electron_volt_j = 1.602176634e-19;
inline constexpr double atomic_mass_unit_kg = 1.66053906660e-27;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double sqrt_pi = 1.77245385090551602730;

/// Atomic mass of 52Cr in u (AME2016).
inline constexpr double chromium52_mass_u = 51.9405062;

}  // namespace dbec::constants
