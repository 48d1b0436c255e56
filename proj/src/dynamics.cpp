#include "dbec/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dbec/constants.hpp"
#include "dbec/meanfield_kernel.hpp"

namespace dbec {

void ComplexWidthState::validate() const {
    const bool finite = std::isfinite(a_r.real()) && std::isfinite(a_r.imag()) &&
                        std::isfinite(a_z.real()) && std::isfinite(a_z.imag());
    if (!finite || !(a_r.real() > 0.0) || !(a_z.real() > 0.0))
        throw std::invalid_argument("complex widths must have positive finite real parts");
}

std::array<double, 4> ComplexWidthState::to_array() const {
    return {a_r.real(), a_r.imag(), a_z.real(), a_z.imag()};
}

ComplexWidthState ComplexWidthState::from_array(const std::array<double, 4>& y) {
    return {{y[0], y[1]}, {y[2], y[3]}};
}

ComplexWidthState ComplexWidthState::from_real(const WidthVector& w) { return {w.a_r, w.a_z}; }

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::bounded: return "bounded";
        case Outcome::collapsed: return "collapsed";
        case Outcome::escaped: return "escaped-integration-window";
    }
    return "?";
}

const char* to_string(Dynamical d) {
    return d == Dynamical::stable ? "dynamically-stable" : "dynamically-unstable";
}

namespace dynamics {

namespace {

using meanfield::kernel::Coefficients;

Coefficients<double> coeffs(const TrapParams& p) {
    return {p.scattering_ratio, p.scaled_gamma_r, p.scaled_gamma_z, p.dipole_coupling};
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Sum of the magnitudes of the energy terms; the scale against which the
// integrator can actually resolve energy differences.
double energy_magnitude(const State& y, const TrapParams& p) {
    const double ar = y[0], br = y[1], az = y[2], bz = y[3];
    const auto t = meanfield::kernel::terms(ar, az, coeffs(p));
    return 2.0 * (ar * ar + br * br) / ar + (az * az + bz * bz) / az + std::abs(t.trap) +
           std::abs(t.contact) + std::abs(t.dipolar);
}

std::string where(double t, const State& y) {
    std::ostringstream os;
    os.precision(10);
    os << " at t=" << t << " (Re a_r=" << y[0] << ", Im a_r=" << y[1] << ", Re a_z=" << y[2]
       << ", Im a_z=" << y[3] << ")";
    return os.str();
}

}  // namespace

State equations_of_motion(const State& y, const TrapParams& p) {
    const double ar = y[0], br = y[1], az = y[2], bz = y[3];
    if (!(ar > 0.0) || !(az > 0.0)) return {kNaN, kNaN, kNaN, kNaN};
    const auto in = meanfield::kernel::interaction_derivs(ar, az, coeffs(p));
    const double gr2 = p.scaled_gamma_r * p.scaled_gamma_r;
    const double gz2 = p.scaled_gamma_z * p.scaled_gamma_z;
    return {8.0 * ar * br,
            -4.0 * (ar * ar - br * br) + gr2 - 2.0 * ar * ar * in.grad[0],
            8.0 * az * bz,
            -4.0 * (az * az - bz * bz) + gz2 - 4.0 * az * az * in.grad[1]};
}

ComplexWidthState equations_of_motion(const ComplexWidthState& s, const TrapParams& p) {
    s.validate();
    return ComplexWidthState::from_array(equations_of_motion(s.to_array(), p));
}

double flow_residual(const State& y, const TrapParams& p) {
    const State f = equations_of_motion(y, p);
    const double scale = std::max({4.0 * y[0] * y[0], 4.0 * y[2] * y[2],
                                   p.scaled_gamma_r * p.scaled_gamma_r,
                                   p.scaled_gamma_z * p.scaled_gamma_z});
    return std::sqrt(f[0] * f[0] + f[1] * f[1] + f[2] * f[2] + f[3] * f[3]) / scale;
}

Eigen::Matrix4d jacobian(const State& y, const TrapParams& p) {
    const double ar = y[0], br = y[1], az = y[2], bz = y[3];
    if (!(ar > 0.0) || !(az > 0.0)) throw DynamicsError("Jacobian needs positive Re widths");
    const auto in = meanfield::kernel::interaction_derivs(ar, az, coeffs(p));
    const double gr = in.grad[0], gz = in.grad[1];
    const double hrr = in.hess[0], hrz = in.hess[1], hzz = in.hess[2];
    Eigen::Matrix4d j = Eigen::Matrix4d::Zero();
    j(0, 0) = 8.0 * br;
    j(0, 1) = 8.0 * ar;
    j(1, 0) = -8.0 * ar - 4.0 * ar * gr - 2.0 * ar * ar * hrr;
    j(1, 1) = 8.0 * br;
    j(1, 2) = -2.0 * ar * ar * hrz;
    j(2, 2) = 8.0 * bz;
    j(2, 3) = 8.0 * az;
    j(3, 0) = -4.0 * az * az * hrz;
    j(3, 2) = -8.0 * az - 8.0 * az * gz - 4.0 * az * az * hzz;
    j(3, 3) = 8.0 * bz;
    if (!j.allFinite()) throw DynamicsError("non-finite Jacobian");
    return j;
}

double energy_of_state(const State& y, const TrapParams& p) {
    const double ar = y[0], br = y[1], az = y[2], bz = y[3];
    const auto t = meanfield::kernel::terms(ar, az, coeffs(p));
    // the imaginary parts only add the kinetic (momentum) contribution
    return t.total() + 2.0 * br * br / ar + bz * bz / az;
}

double energy_of_state(const ComplexWidthState& s, const TrapParams& p) {
    s.validate();
    return energy_of_state(s.to_array(), p);
}

double relative_energy_drift(const State& y, double e0, const TrapParams& p) {
    return std::abs(energy_of_state(y, p) - e0) / std::max(std::abs(e0), energy_magnitude(y, p));
}

double amplitude_modulus_sq(const ComplexWidthState& s) {
    s.validate();
    return std::pow(2.0 / constants::pi, 1.5) * s.a_r.real() * std::sqrt(s.a_z.real());
}

Trajectory evolve(const ComplexWidthState& s0, const TrapParams& p, double t_end,
                  const EvolveOptions& opt) {
    s0.validate();
    p.validate();
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw std::invalid_argument("t_end must be positive");
    if (!(opt.collapse_cap > 0.0)) throw std::invalid_argument("collapse cap must be positive");
    if (!(opt.max_energy_drift > 0.0)) throw std::invalid_argument("drift limit must be positive");
    if (opt.sample_interval < 0.0) throw std::invalid_argument("sample interval must be >= 0");

    Integrator ode(Rhs{&p}, Dop853Options{opt.rtol, opt.atol});
    const State y0 = s0.to_array();
    ode.reset(0.0, y0);
    const double e0 = energy_of_state(y0, p);

    Trajectory tr;
    auto record = [&](double t, const State& y) {
        const double e = energy_of_state(y, p);
        tr.times.push_back(t);
        tr.states.push_back(ComplexWidthState::from_array(y));
        tr.energy_series.push_back(e);
        tr.max_energy_drift = std::max(tr.max_energy_drift, std::abs(e - e0) / std::abs(e0));
    };
    record(0.0, y0);
    double next_sample = opt.sample_interval;

    while (ode.t() < t_end) {
        if (ode.accepted() >= opt.max_steps) {
            tr.outcome = Outcome::escaped;
            break;
        }
        try {
            ode.step(t_end);
        } catch (const IntegrationError& e) {
            throw DynamicsError(std::string(e.what()) + where(ode.t(), ode.y()));
        }
        const State& y = ode.y();
        const bool collapsed = y[0] > opt.collapse_cap || y[2] > opt.collapse_cap;
        if (opt.sample_interval > 0.0) {
            for (; next_sample <= ode.t(); next_sample += opt.sample_interval)
                record(next_sample, ode.dense(next_sample));
        }
        if (!collapsed) {
            const double drift = relative_energy_drift(y, e0, p);
            if (drift > opt.max_energy_drift) {
                std::ostringstream os;
                os << "energy drift " << drift << " exceeds " << opt.max_energy_drift;
                throw DynamicsError(os.str() + where(ode.t(), y));
            }
        }
        if (opt.sample_interval == 0.0 || collapsed || ode.t() >= t_end) {
            if (tr.times.back() < ode.t()) record(ode.t(), y);
        }
        if (collapsed) {
            tr.outcome = Outcome::collapsed;
            break;
        }
    }
    tr.steps = ode.accepted();
    return tr;
}

State to_canonical(const ComplexWidthState& s) {
    s.validate();
    const double qr = std::sqrt(0.5 / s.a_r.real());
    const double qz = std::sqrt(0.25 / s.a_z.real());
    return {qr, qz, -2.0 * qr * s.a_r.imag(), -2.0 * qz * s.a_z.imag()};
}

ComplexWidthState from_canonical(const State& c) {
    const double qr = c[0], qz = c[1];
    return {{0.5 / (qr * qr), -c[2] / (2.0 * qr)}, {0.25 / (qz * qz), -c[3] / (2.0 * qz)}};
}

namespace {

// dU/dQ for the canonical Hamiltonian H = P_r^2 + P_z^2 + U(Q).
std::array<double, 2> potential_force(double qr, double qz, const TrapParams& p) {
    const double ar = 0.5 / (qr * qr), az = 0.25 / (qz * qz);
    const auto in = meanfield::kernel::interaction_derivs(ar, az, coeffs(p));
    const double gr2 = p.scaled_gamma_r * p.scaled_gamma_r;
    const double gz2 = p.scaled_gamma_z * p.scaled_gamma_z;
    const double qr3 = qr * qr * qr, qz3 = qz * qz * qz;
    return {-2.0 / qr3 + 2.0 * gr2 * qr - in.grad[0] / qr3,
            -0.5 / qz3 + 2.0 * gz2 * qz - in.grad[1] / (2.0 * qz3)};
}

}  // namespace

Trajectory evolve_symplectic(const ComplexWidthState& s0, const TrapParams& p, double t_end,
                             double dt, long record_every, double collapse_cap) {
    s0.validate();
    p.validate();
    if (!(t_end > 0.0) || !(dt > 0.0)) throw std::invalid_argument("t_end and dt must be positive");
    if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
    const double w1 = 1.0 / (2.0 - std::cbrt(2.0));
    const double w0 = -std::cbrt(2.0) * w1;
    const std::array<double, 4> drift{0.5 * w1, 0.5 * (w0 + w1), 0.5 * (w0 + w1), 0.5 * w1};
    const std::array<double, 3> kick{w1, w0, w1};

    State c = to_canonical(s0);
    const double e0 = energy_of_state(s0, p);
    Trajectory tr;
    auto record = [&](double t) {
        const auto s = from_canonical(c);
        const double e = energy_of_state(s.to_array(), p);
        tr.times.push_back(t);
        tr.states.push_back(s);
        tr.energy_series.push_back(e);
        tr.max_energy_drift = std::max(tr.max_energy_drift, std::abs(e - e0) / std::abs(e0));
    };
    record(0.0);
    const long n = static_cast<long>(std::ceil(t_end / dt - 1e-9));
    const double h = t_end / static_cast<double>(n);
    for (long k = 1; k <= n; ++k) {
        for (int i = 0; i < 4; ++i) {
            c[0] += 2.0 * c[2] * drift[i] * h;
            c[1] += 2.0 * c[3] * drift[i] * h;
            if (i < 3) {
                const auto f = potential_force(c[0], c[1], p);
                c[2] -= f[0] * kick[i] * h;
                c[3] -= f[1] * kick[i] * h;
            }
        }
        if (!std::isfinite(c[0] + c[1] + c[2] + c[3]))
            throw DynamicsError("symplectic integration produced a non-finite state");
        const auto s = from_canonical(c);
        const bool collapsed = s.a_r.real() > collapse_cap || s.a_z.real() > collapse_cap;
        if (k % record_every == 0 || k == n || collapsed) record(h * k);
        tr.steps = k;
        if (collapsed) {
            tr.outcome = Outcome::collapsed;
            break;
        }
    }
    return tr;
}

namespace {

struct Reduced {
    Eigen::Matrix2d dm;  // D M: its eigenvalues are kappa^2
    Eigen::Matrix2d m;
};

// At a stationary state the imaginary parts vanish and the Jacobian couples
// Re a only to Im a and back, so the four kappa come from a 2x2 problem.
Reduced reduce(const StationaryState& st, const TrapParams& p) {
    const State y{st.widths.a_r, 0.0, st.widths.a_z, 0.0};
    const Eigen::Matrix4d j = jacobian(y, p);
    Eigen::Matrix2d d, m;
    d << j(0, 1), j(0, 3), j(2, 1), j(2, 3);
    m << j(1, 0), j(1, 2), j(3, 0), j(3, 2);
    return {d * m, m};
}

}  // namespace

StabilitySpectrum linearize(const StationaryState& st, const TrapParams& p) {
    st.widths.validate();
    p.validate();
    const Reduced r = reduce(st, p);
    const Eigen::Matrix2d& a = r.dm;
    const double tr = a.trace();
    using C = std::complex<double>;
    std::array<C, 2> mu;
    const double off = a(0, 1) * a(1, 0);
    if (off >= 0.0) {
        // similar to a symmetric matrix: real kappa^2, computed in symmetric form
        const double half_diff = 0.5 * (a(0, 0) - a(1, 1));
        const double rad = std::hypot(half_diff, std::sqrt(off));
        const double big = 0.5 * tr + (tr >= 0.0 ? rad : -rad);
        const double det = a(0, 0) * a(1, 1) - off;
        const double small = big != 0.0 ? det / big : 0.5 * tr - (tr >= 0.0 ? rad : -rad);
        mu = {C(big), C(small)};
    } else {
        const C disc = std::sqrt(C(0.25 * tr * tr - a.determinant()));
        mu = {0.5 * tr + disc, 0.5 * tr - disc};
    }
    StabilitySpectrum s;
    for (int i = 0; i < 2; ++i) {
        C k = mu[i].imag() == 0.0 && mu[i].real() < 0.0 ? C(0.0, std::sqrt(-mu[i].real()))
                                                         : std::sqrt(mu[i]);
        s.eigenvalues[2 * i] = k;
        s.eigenvalues[2 * i + 1] = -k;
    }
    if (!std::isfinite(std::abs(s.eigenvalues[0]) + std::abs(s.eigenvalues[2])))
        throw DynamicsError("non-finite stability eigenvalues");
    s.classification = Dynamical::stable;
    for (const auto& k : s.eigenvalues)
        if (std::abs(k.real()) > 1e-8) s.classification = Dynamical::unstable;
    return s;
}

State unstable_direction(const StationaryState& st, const TrapParams& p) {
    const Reduced r = reduce(st, p);
    Eigen::EigenSolver<Eigen::Matrix2d> es(r.dm);
    int best = -1;
    double mu = 0.0;
    for (int i = 0; i < 2; ++i) {
        const auto ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) <= 1e-12 * std::abs(ev) && ev.real() > mu) {
            mu = ev.real();
            best = i;
        }
    }
    if (best < 0) throw DynamicsError("state has no unstable mode");
    Eigen::Vector2d va = es.eigenvectors().col(best).real();
    if (va.sum() < 0.0) va = -va;
    const double kappa = std::sqrt(mu);
    const Eigen::Vector2d vb = r.m * va / kappa;
    State v{va(0), vb(0), va(1), vb(1)};
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
    return v;
}

}  // namespace dynamics
}  // namespace dbec
