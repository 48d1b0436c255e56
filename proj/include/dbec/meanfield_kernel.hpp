#pragma once

// Closed-form Gaussian-ansatz energy functional, templated on the scalar so
// the same expressions serve the real solvers and the complex continuation.
//
// For psi = A exp(-(A_r rho^2 + A_z z^2)) with unit norm, in dipole units and
// with gamma standing for the scaled frequencies N^2 gamma:
//
//   kinetic = 2 A_r + A_z
//   trap    = gamma_r^2 / (2 A_r) + gamma_z^2 / (4 A_z)
//   contact = (4 / sqrt(pi)) (a/a_d) A_r sqrt(A_z)
//   dipolar = -(2 / (3 sqrt(pi))) A_r sqrt(A_z) F(A_r / A_z - 1)
//
// Interaction terms carry the Hartree weight 1/2 here; the chemical
// potential counts them with weight 1.

#include <array>

#include "dbec/anisotropy.hpp"
#include "dbec/constants.hpp"

namespace dbec::meanfield::kernel {

inline constexpr double kContactCoeff = 4.0 / constants::sqrt_pi;
inline constexpr double kDipolarCoeff = 2.0 / (3.0 * constants::sqrt_pi);

template <class T>
struct Terms {
    T kinetic, trap, contact, dipolar;
    T total() const { return kinetic + trap + contact + dipolar; }
    T chemical_potential() const { return kinetic + trap + 2.0 * (contact + dipolar); }
};

/// Parameters of the functional; `a` may be complex for continuation.
template <class T>
struct Coefficients {
    T scattering;
    double gamma_r;
    double gamma_z;
    double dipole_coupling;
};

template <class T>
Terms<T> terms(T ar, T az, const Coefficients<T>& c) {
    const T width = ar * std::sqrt(az);
    const auto f = anisotropy_jet(ar / az - 1.0);
    return Terms<T>{2.0 * ar + az,
                    c.gamma_r * c.gamma_r / (2.0 * ar) + c.gamma_z * c.gamma_z / (4.0 * az),
                    kContactCoeff * c.scattering * width,
                    -kDipolarCoeff * c.dipole_coupling * width * f.value};
}

/// Gradient and Hessian of the interaction part alone (contact + dipolar).
template <class T>
struct InteractionDerivs {
    std::array<T, 2> grad;
    std::array<T, 3> hess;  // rr, rz, zz
};

template <class T>
InteractionDerivs<T> interaction_derivs(T ar, T az, const Coefficients<T>& c) {
    const T sz = std::sqrt(az);
    // P = A_r sqrt(A_z)
    const T p = ar * sz;
    const T p_r = sz;
    const T p_z = ar / (2.0 * sz);
    const T p_rz = 1.0 / (2.0 * sz);
    const T p_zz = -ar / (4.0 * az * sz);
    // b = A_r / A_z - 1
    const T b_r = 1.0 / az;
    const T b_z = -ar / (az * az);
    const T b_rz = -1.0 / (az * az);
    const T b_zz = 2.0 * ar / (az * az * az);
    const auto f = anisotropy_jet(ar / az - 1.0);

    // D = P F(b)
    const T d_r = p_r * f.value + p * f.d1 * b_r;
    const T d_z = p_z * f.value + p * f.d1 * b_z;
    const T d_rr = 2.0 * p_r * f.d1 * b_r + p * f.d2 * b_r * b_r;
    const T d_rz = p_rz * f.value + (p_r * b_z + p_z * b_r) * f.d1 + p * f.d2 * b_r * b_z +
                   p * f.d1 * b_rz;
    const T d_zz = p_zz * f.value + 2.0 * p_z * f.d1 * b_z + p * f.d2 * b_z * b_z +
                   p * f.d1 * b_zz;

    const T g = kContactCoeff * c.scattering;
    const T h = -kDipolarCoeff * c.dipole_coupling;
    return InteractionDerivs<T>{{g * p_r + h * d_r, g * p_z + h * d_z},
                                {h * d_rr, g * p_rz + h * d_rz, g * p_zz + h * d_zz}};
}

template <class T>
std::array<T, 2> gradient(T ar, T az, const Coefficients<T>& c) {
    const auto in = interaction_derivs(ar, az, c);
    const double gr2 = c.gamma_r * c.gamma_r;
    const double gz2 = c.gamma_z * c.gamma_z;
    return {2.0 - gr2 / (2.0 * ar * ar) + in.grad[0], 1.0 - gz2 / (4.0 * az * az) + in.grad[1]};
}

template <class T>
std::array<T, 3> hessian(T ar, T az, const Coefficients<T>& c) {
    const auto in = interaction_derivs(ar, az, c);
    const double gr2 = c.gamma_r * c.gamma_r;
    const double gz2 = c.gamma_z * c.gamma_z;
    return {gr2 / (ar * ar * ar) + in.hess[0], in.hess[1], gz2 / (2.0 * az * az * az) + in.hess[2]};
}

}  // namespace dbec::meanfield::kernel
