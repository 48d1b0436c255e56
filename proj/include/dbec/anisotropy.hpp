#pragma once

#include <cmath>
#include <complex>
#include <cstdlib>
#include <type_traits>

namespace dbec::meanfield {

/// Value and first two derivatives of the dipolar anisotropy function with
/// respect to b = kappa^2 - 1 = A_r / A_z - 1.
template <class T>
struct AnisotropyJet {
    T value;
    T d1;
    T d2;
};

namespace detail {

template <class T>
struct is_complex : std::false_type {};
template <class T>
struct is_complex<std::complex<T>> : std::true_type {};

inline constexpr double kSeriesRadius = 0.2;
inline constexpr int kSeriesTerms = 32;

// F(b) = sum_{n>=1} c_n b^n with c_1 = 2/5, c_{n+1} = -c_n (2n+2)/(2n+5).
// Branch points sit at b = -1, so the series is used only for |b| < 0.2 where
// the closed forms lose digits to cancellation.
template <class T>
AnisotropyJet<T> anisotropy_series(T b) {
    T value{0.0}, d1{0.0}, d2{0.0};
    T pow_nm2{0.0};  // b^(n-2)
    T pow_nm1{1.0};  // b^(n-1)
    double c = 0.4;
    for (int n = 1; n <= kSeriesTerms; ++n) {
        value += c * (pow_nm1 * b);
        d1 += (c * n) * pow_nm1;
        d2 += (c * n * (n - 1)) * pow_nm2;
        pow_nm2 = pow_nm1;
        pow_nm1 *= b;
        c *= -(2.0 * n + 2.0) / (2.0 * n + 5.0);
    }
    return {value, d1, d2};
}

// S(b) = asinh(sqrt b)/sqrt b, analytic in b away from the cut b < -1.
template <class T>
T asinh_ratio(T b, T k) {
    if constexpr (is_complex<T>::value) {
        (void)k;
        const T s = std::sqrt(b);
        return std::asinh(s) / s;
    } else {
        if (b > 0.0) {
            const T s = std::sqrt(b);
            return std::atanh(s / k) / s;  // prolate: artanh form
        }
        const T t = std::sqrt(-b);
        return std::atan(t / k) / t;  // oblate: arctan form
    }
}

}  // namespace detail

/// F as a function of b = kappa^2 - 1, where kappa = sigma_z / sigma_r =
/// sqrt(A_r / A_z). F = 0 for isotropic clouds, tends to +1 for prolate
/// (cigar along the dipoles) and to -2 for oblate clouds.
///
///   F(b) = [(b + 3) - 3 sqrt(1 + b) S(b)] / b,   S(b) = asinh(sqrt b)/sqrt b
template <class T>
AnisotropyJet<T> anisotropy_jet(T b) {
    using std::abs;
    if (abs(b) < detail::kSeriesRadius) return detail::anisotropy_series(b);
    const T k = std::sqrt(T{1.0} + b);
    const T s = detail::asinh_ratio(b, k);
    const T s1 = (T{1.0} / k - s) / (2.0 * b);
    const T s2 = (-T{1.0} / (k * k * k) - 6.0 * s1) / (4.0 * b);
    const T num = b + 3.0 - 3.0 * k * s;
    const T num1 = 1.0 - 3.0 * (s / (2.0 * k) + k * s1);
    const T num2 = -3.0 * (s1 / k - s / (4.0 * k * k * k) + k * s2);
    const T f = num / b;
    const T f1 = (num1 - f) / b;
    const T f2 = (num2 - 2.0 * f1) / b;
    return {f, f1, f2};
}

}  // namespace dbec::meanfield
