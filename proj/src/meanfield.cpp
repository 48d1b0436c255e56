#include "dbec/meanfield.hpp"

#include <cmath>
#include <stdexcept>

#include "dbec/constants.hpp"
#include "dbec/meanfield_kernel.hpp"

namespace dbec {

double WidthVector::kappa() const { return std::sqrt(a_r / a_z); }

double WidthVector::norm_amplitude_sq() const {
    return std::pow(2.0 / constants::pi, 1.5) * a_r * std::sqrt(a_z);
}

void WidthVector::validate() const {
    if (!(a_r > 0.0) || !(a_z > 0.0) || !std::isfinite(a_r) || !std::isfinite(a_z))
        throw std::invalid_argument("width parameters must be positive and finite");
}

namespace meanfield {

namespace {

kernel::Coefficients<double> coefficients(const TrapParams& p) {
    return {p.scattering_ratio, p.scaled_gamma_r, p.scaled_gamma_z, p.dipole_coupling};
}

void check(const WidthVector& w, const TrapParams& p) {
    w.validate();
    p.validate();
}

}  // namespace

double anisotropy_function(double kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa))
        throw std::invalid_argument("anisotropy function needs kappa > 0");
    return anisotropy_jet(kappa * kappa - 1.0).value;
}

EnergyBreakdown mean_field_energy(const WidthVector& w, const TrapParams& p) {
    check(w, p);
    const auto t = kernel::terms(w.a_r, w.a_z, coefficients(p));
    EnergyBreakdown e{t.kinetic, t.trap, t.contact, t.dipolar, t.total()};
    if (!std::isfinite(e.total)) throw std::range_error("mean-field energy overflow");
    return e;
}

Eigen::Vector2d energy_gradient(const WidthVector& w, const TrapParams& p) {
    check(w, p);
    const auto g = kernel::gradient(w.a_r, w.a_z, coefficients(p));
    return {g[0], g[1]};
}

Eigen::Matrix2d energy_hessian(const WidthVector& w, const TrapParams& p) {
    check(w, p);
    const auto h = kernel::hessian(w.a_r, w.a_z, coefficients(p));
    Eigen::Matrix2d m;
    m << h[0], h[1], h[1], h[2];
    return m;
}

double chemical_potential(const WidthVector& w, const TrapParams& p) {
    check(w, p);
    return kernel::terms(w.a_r, w.a_z, coefficients(p)).chemical_potential();
}

Eigen::Vector2d interaction_gradient(const WidthVector& w, const TrapParams& p) {
    const auto in = kernel::interaction_derivs(w.a_r, w.a_z, coefficients(p));
    return {in.grad[0], in.grad[1]};
}

double energy_scale(const TrapParams& p) { return p.scaled_gamma_bar(); }

}  // namespace meanfield
}  // namespace dbec
