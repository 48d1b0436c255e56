#include "dbec/exceptional.hpp"

#include <algorithm>
#include <cmath>

#include "dbec/constants.hpp"
#include "dbec/meanfield_kernel.hpp"

namespace dbec::exceptional {

namespace {

using C2 = std::array<cplx, 2>;

struct Eval {
    C2 a;
    C2 r;
    std::array<cplx, 4> j;  // row-major 2x2
    double rel;
};

Eval eval_log(const TrapParams& p, cplx a_scatt, const C2& x, double scale) {
    Eval e;
    e.a = {std::exp(x[0]), std::exp(x[1])};
    if (!(e.a[0].real() > 0.0) || !(e.a[1].real() > 0.0))
        throw NoStationaryState("loss of normalizability (Re width <= 0)");
    const meanfield::kernel::Coefficients<cplx> c{a_scatt, p.scaled_gamma_r, p.scaled_gamma_z,
                                                  p.dipole_coupling};
    const auto g = meanfield::kernel::gradient(e.a[0], e.a[1], c);
    const auto h = meanfield::kernel::hessian(e.a[0], e.a[1], c);
    e.r = {e.a[0] * g[0] / scale, e.a[1] * g[1] / scale};
    e.j = {e.a[0] * e.a[0] * h[0] / scale + e.r[0], e.a[0] * e.a[1] * h[1] / scale,
           e.a[0] * e.a[1] * h[1] / scale, e.a[1] * e.a[1] * h[2] / scale + e.r[1]};
    const double norm = std::sqrt(std::norm(e.r[0]) + std::norm(e.r[1]));
    e.rel = norm * scale / std::max(scale, std::abs(2.0 * e.a[0] + e.a[1]));
    if (!std::isfinite(e.rel)) throw NoStationaryState("non-finite residual");
    return e;
}

double norm2(const C2& v) { return std::sqrt(std::norm(v[0]) + std::norm(v[1])); }

ComplexStationaryState make_state(const TrapParams& p, cplx a_scatt, const C2& a, double rel,
                                  int iters) {
    const meanfield::kernel::Coefficients<cplx> c{a_scatt, p.scaled_gamma_r, p.scaled_gamma_z,
                                                  p.dipole_coupling};
    const auto t = meanfield::kernel::terms(a[0], a[1], c);
    ComplexStationaryState s;
    s.widths = {a[0], a[1]};
    s.chem_potential = t.chemical_potential();
    s.energy = t.total();
    s.residual = rel;
    s.iterations = iters;
    return s;
}

ComplexStationaryState from_real(const StationaryState& s) {
    ComplexStationaryState c;
    c.widths = {s.widths.a_r, s.widths.a_z};
    c.chem_potential = s.chem_potential;
    c.energy = s.energy;
    c.residual = s.gradient_norm;
    return c;
}

struct Track {
    std::vector<CircleSample> samples;
    double max_jump = 0.0;
};

// Follows both solutions from phi = 0 to phi_end in n_total equal steps.
// Returns false on tracking loss.
bool track(const TrapParams& p, double center, double radius, double phi_end, int n_total,
           double jump_fraction, Track& out) {
    out.samples.clear();
    out.max_jump = 0.0;
    const TrapParams q = p.with_scattering(center + radius);
    const cplx a0(center + radius, 0.0);
    std::array<ComplexStationaryState, 2> cur{
        complex_find_stationary(p, a0, from_real(stationary::ground_state(q)).widths),
        complex_find_stationary(p, a0, from_real(stationary::excited_state(q)).widths)};
    out.samples.push_back({0.0, a0, cur});
    std::array<ComplexStationaryState, 2> prev = cur;
    for (int k = 1; k <= n_total; ++k) {
        const double phi = phi_end * k / n_total;
        const cplx a = center + radius * std::polar(1.0, phi);
        const double sep = state_distance(cur[0], cur[1], p);
        const double bound = jump_fraction * sep;
        std::array<ComplexStationaryState, 2> next;
        for (int j = 0; j < 2; ++j) {
            // linear predictor in log widths
            ComplexWidths guess = cur[j].widths;
            if (k > 1) {
                guess.a_r = std::exp(2.0 * std::log(cur[j].widths.a_r) - std::log(prev[j].widths.a_r));
                guess.a_z = std::exp(2.0 * std::log(cur[j].widths.a_z) - std::log(prev[j].widths.a_z));
            }
            try {
                next[j] = complex_find_stationary(p, a, guess);
            } catch (const NoStationaryState&) {
                return false;
            }
            const double jump = state_distance(next[j], cur[j], p);
            if (!(jump <= bound)) return false;
            out.max_jump = std::max(out.max_jump, jump);
        }
        prev = cur;
        cur = next;
        out.samples.push_back({phi, a, cur});
    }
    return true;
}

}  // namespace

ComplexStationaryState complex_find_stationary(const TrapParams& p, cplx a,
                                               const ComplexWidths& guess,
                                               const ComplexNewtonOptions& opt) {
    p.validate();
    if (!(guess.a_r.real() > 0.0) || !(guess.a_z.real() > 0.0))
        throw NoStationaryState("guess must have positive real parts");
    const double scale = meanfield::energy_scale(p);
    C2 x{std::log(guess.a_r), std::log(guess.a_z)};
    Eval e = eval_log(p, a, x, scale);
    double norm = norm2(e.r);
    for (int it = 0; it <= opt.max_iterations; ++it) {
        if (e.rel <= opt.tolerance) return make_state(p, a, e.a, e.rel, it);
        if (it == opt.max_iterations) break;
        const cplx det = e.j[0] * e.j[3] - e.j[1] * e.j[2];
        if (det == 0.0) throw NoStationaryState("singular Jacobian");
        C2 dx{-(e.j[3] * e.r[0] - e.j[1] * e.r[1]) / det, -(-e.j[2] * e.r[0] + e.j[0] * e.r[1]) / det};
        const double big = std::max(std::abs(dx[0]), std::abs(dx[1]));
        if (!std::isfinite(big)) throw NoStationaryState("singular Jacobian");
        if (big > 1.0) {
            dx[0] /= big;
            dx[1] /= big;
        }
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
            const C2 xn{x[0] + t * dx[0], x[1] + t * dx[1]};
            try {
                const Eval en = eval_log(p, a, xn, scale);
                const double nn = norm2(en.r);
                if (nn < (1.0 - 1e-4 * t) * norm) {
                    x = xn;
                    e = en;
                    norm = nn;
                    accepted = true;
                    break;
                }
            } catch (const NoStationaryState&) {
            }
        }
        if (!accepted) throw NoStationaryState("complex Newton: line search failed");
    }
    throw NoStationaryState("complex Newton did not converge");
}

double state_distance(const ComplexStationaryState& x, const ComplexStationaryState& y,
                      const TrapParams& p) {
    const double s = meanfield::energy_scale(p);
    const double d0 = std::norm(std::log(x.widths.a_r) - std::log(y.widths.a_r));
    const double d1 = std::norm(std::log(x.widths.a_z) - std::log(y.widths.a_z));
    const double d2 = std::norm((x.chem_potential - y.chem_potential) / s);
    return std::sqrt(d0 + d1 + d2);
}

CircleResult encircle(const TrapParams& p, cplx center, double radius, const EncircleOptions& opt) {
    if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
    if (center.imag() != 0.0) throw std::invalid_argument("circle center must be real");
    if (opt.n_steps < 16) throw std::invalid_argument("n_steps must be at least 16");
    if (!(opt.turns > 0.0)) throw std::invalid_argument("turns must be positive");
    const double two_pi = 2.0 * constants::pi;
    for (int n = opt.n_steps; n <= opt.max_steps; n *= 2) {
        Track tr;
        const int total = static_cast<int>(std::ceil(n * opt.turns - 1e-9));
        if (!track(p, center.real(), radius, two_pi * opt.turns, total, opt.jump_fraction, tr))
            continue;
        const auto& first = tr.samples.front().states;
        const auto& last = tr.samples.back().states;
        const double same = std::max(state_distance(last[0], first[0], p),
                                     state_distance(last[1], first[1], p));
        const double swapped = std::max(state_distance(last[0], first[1], p),
                                        state_distance(last[1], first[0], p));
        const double threshold = 10.0 * tr.max_jump;
        const double best = std::min(same, swapped);
        if (!(best <= threshold)) continue;
        CircleResult r;
        r.center = center;
        r.radius = radius;
        r.turns = opt.turns;
        r.n_steps = n;
        r.samples = std::move(tr.samples);
        r.permuted = swapped < same;
        r.step_bound = tr.max_jump;
        r.match_distance = best;
        return r;
    }
    throw NoStationaryState("circle tracking failed up to the step cap");
}

SplittingFit splitting_exponent(const TrapParams& p, double a_crit,
                                const std::vector<double>& radii, double phi) {
    if (radii.size() < 2) throw std::invalid_argument("need at least two radii");
    SplittingFit fit;
    for (double rho : radii) {
        Track tr;
        int n = std::max(16, static_cast<int>(std::ceil(64.0 * phi / (2.0 * constants::pi))));
        bool ok = false;
        for (; n <= 4096 && !ok; n *= 2) ok = track(p, a_crit, rho, phi, n, 0.25, tr);
        if (!ok) throw NoStationaryState("tracking failed while measuring the splitting");
        const auto& s = tr.samples.back().states;
        fit.radii.push_back(rho);
        fit.splitting.push_back(std::abs(s[0].chem_potential - s[1].chem_potential));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(radii.size());
    for (std::size_t i = 0; i < radii.size(); ++i) {
        const double x = std::log(fit.radii[i]), y = std::log(fit.splitting[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    fit.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return fit;
}

}  // namespace dbec::exceptional
