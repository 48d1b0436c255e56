#include "dbec/poincare.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "dbec/constants.hpp"
#include "dbec/parallel.hpp"

namespace dbec {

const char* to_string(Crossing c) { return c == Crossing::upward ? "upward" : "downward"; }

std::size_t SectionDataset::count(Outcome o) const {
    return static_cast<std::size_t>(std::count_if(
        trajectories.begin(), trajectories.end(), [o](const auto& t) { return t.outcome == o; }));
}

namespace poincare {

namespace {

using dynamics::State;

double real_energy(const TrapParams& p, double ar, double az) {
    return dynamics::energy_of_state(State{ar, 0.0, az, 0.0}, p);
}

struct Valley {
    double x;  // ln Re a_z at the minimum
    double v;
};

// The energy at fixed Re a_r has a single minimum in Re a_z.
Valley valley(const TrapParams& p, double ar) {
    const double s = std::max({p.scaled_gamma_bar(), p.scaled_gamma_z, ar});
    auto f = [&](double x) { return real_energy(p, ar, std::exp(x)); };
    std::uintmax_t iters = 500;
    const auto r = boost::math::tools::brent_find_minima(f, std::log(1e-8 * s), std::log(1e12 * s),
                                                         40, iters);
    return {r.first, r.second};
}

template <class F>
double bracket_root(F f, double lo, double hi) {
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    return 0.5 * (r.first + r.second);
}

double default_t_end(const TrapParams& p) {
    const auto g = stationary::ground_state(p);
    const auto sp = dynamics::linearize(g, p);
    double w = 1e300;
    for (const auto& k : sp.eigenvalues) w = std::min(w, std::abs(k.imag()));
    return 2000.0 * 2.0 * constants::pi / w;
}

bool sign_ok(Crossing dir, double a, double b) {
    return dir == Crossing::upward ? (a < 0.0 && b >= 0.0) : (a > 0.0 && b <= 0.0);
}

struct SectionRun {
    SectionTrajectory record;
    std::vector<SectionPoint> points;
};

// Integrates one seed, calling on_cross(point) at each crossing; stops when
// on_cross returns false, at t_end, or on collapse/failure.
template <class OnCross>
SectionTrajectory integrate_section(const ComplexWidthState& s0, const TrapParams& p, double t_end,
                                    const SectionOptions& opt, OnCross on_cross) {
    SectionTrajectory rec;
    rec.seed = s0;
    const State y0 = s0.to_array();
    const double e0 = dynamics::energy_of_state(y0, p);
    dynamics::Integrator ode(dynamics::Rhs{&p}, Dop853Options{opt.rtol, opt.atol});
    ode.reset(0.0, y0);
    try {
        while (ode.t() < t_end) {
            if (ode.accepted() >= opt.max_steps) {
                rec.outcome = Outcome::escaped;
                rec.note = "step budget exhausted";
                break;
            }
            ode.step(t_end);
            const State& y = ode.y();
            if (y[0] > opt.collapse_cap || y[2] > opt.collapse_cap) {
                rec.outcome = Outcome::collapsed;
                break;
            }
            const double e = dynamics::energy_of_state(y, p);
            rec.max_energy_drift = std::max(rec.max_energy_drift, std::abs(e - e0) / std::abs(e0));
            const double drift = dynamics::relative_energy_drift(y, e0, p);
            if (drift > opt.max_energy_drift) {
                rec.outcome = Outcome::escaped;
                rec.note = "energy drift limit exceeded";
                break;
            }
            // sub-sample the step so that a double sign change is not missed
            constexpr int kSub = 4;
            double s_prev = 0.0, f_prev = ode.y_prev()[3];
            bool stop = false;
            for (int k = 1; k <= kSub && !stop; ++k) {
                const double s = static_cast<double>(k) / kSub;
                const double f = k == kSub ? y[3] : ode.dense_fraction(s)[3];
                if (sign_ok(opt.direction, f_prev, f)) {
                    auto g = [&](double u) { return ode.dense_fraction(u)[3]; };
                    double root = f == 0.0 ? s : bracket_root(g, s_prev, s);
                    State yc = ode.dense_fraction(root);
                    // pick the better neighbour if rounding left a larger residual
                    for (double cand : {std::nextafter(root, s_prev), std::nextafter(root, s)}) {
                        const State yn = ode.dense_fraction(cand);
                        if (std::abs(yn[3]) < std::abs(yc[3])) {
                            yc = yn;
                            root = cand;
                        }
                    }
                    SectionPoint pt;
                    pt.re_a_r = yc[0];
                    pt.im_a_r = yc[1];
                    pt.re_a_z = yc[2];
                    pt.im_a_z = yc[3];
                    pt.crossing_time = ode.t_prev() + root * ode.last_step();
                    ++rec.crossings;
                    if (!on_cross(pt)) stop = true;
                }
                s_prev = s;
                f_prev = f;
            }
            if (stop) break;
        }
    } catch (const IntegrationError& e) {
        rec.outcome = Outcome::escaped;
        rec.note = e.what();
    }
    rec.end_time = ode.t();
    return rec;
}

}  // namespace

std::optional<double> solve_re_a_z(double energy, const TrapParams& p, double re_a_r,
                                   double im_a_r, Crossing direction) {
    if (!(re_a_r > 0.0)) return std::nullopt;
    const double target = energy - 2.0 * im_a_r * im_a_r / re_a_r;
    const Valley v = valley(p, re_a_r);
    if (v.v > target) return std::nullopt;
    auto g = [&](double x) { return real_energy(p, re_a_r, std::exp(x)) - target; };
    // upward crossings need dV/d Re a_z < 0: the root below the minimum
    const double sign = direction == Crossing::upward ? -1.0 : 1.0;
    double d = 1.0;
    while (g(v.x + sign * d) <= 0.0) {
        d *= 2.0;
        if (d > 200.0) return std::nullopt;
    }
    const double lo = std::min(v.x, v.x + sign * d), hi = std::max(v.x, v.x + sign * d);
    if (g(v.x) == 0.0) return std::exp(v.x);
    return std::exp(bracket_root(g, lo, hi));
}

double section_potential(const TrapParams& p, double re_a_r) {
    if (!(re_a_r > 0.0)) throw std::invalid_argument("Re a_r must be positive");
    return valley(p, re_a_r).v;
}

SeedBox default_seed_box(double energy, const TrapParams& p) {
    const auto g = stationary::ground_state(p);
    const double a_gs = g.widths.a_r;
    const double tol = 1e-12 * std::abs(g.energy);
    if (energy < g.energy - tol) throw std::invalid_argument("energy below the ground-state energy");
    if (energy <= g.energy + tol) return {a_gs, a_gs, 0.0, 0.0};
    auto vmin = [&](double x) { return section_potential(p, std::exp(x)); };
    const double x_gs = std::log(a_gs);
    double x_lo = x_gs;
    for (int i = 0;; ++i) {
        x_lo -= std::log(2.0);
        if (vmin(x_lo) > energy) break;
        if (i > 200) throw std::runtime_error("admissible region unbounded towards small Re a_r");
    }
    const double re_lo = std::exp(bracket_root([&](double x) { return vmin(x) - energy; }, x_lo, x_gs));

    const auto es = stationary::excited_state(p);
    const double x_es = std::log(es.widths.a_r);
    double re_hi;
    if (energy < es.energy) {
        re_hi = std::exp(bracket_root([&](double x) { return vmin(x) - energy; }, x_gs, x_es));
    } else {
        // open towards collapse: close the box where the valley is back at E_gs
        double x_hi = x_es;
        for (int i = 0;; ++i) {
            x_hi += std::log(2.0);
            if (vmin(x_hi) < g.energy) break;
            if (i > 200) throw std::runtime_error("section potential does not fall off past the saddle");
        }
        re_hi = std::exp(bracket_root([&](double x) { return vmin(x) - g.energy; }, x_es, x_hi));
    }
    double im_max = 0.0;
    constexpr int kSamples = 256;
    for (int i = 0; i < kSamples; ++i) {
        const double a = re_lo * std::pow(re_hi / re_lo, (i + 0.5) / kSamples);
        const double excess = energy - section_potential(p, a);
        if (excess > 0.0) im_max = std::max(im_max, std::sqrt(0.5 * excess * a));
    }
    im_max *= 1.05;
    return {re_lo, re_hi, -im_max, im_max};
}

Seeding seed_initial_states(double energy, const TrapParams& p, int n, const SeedOptions& opt) {
    p.validate();
    if (n < 1) throw std::invalid_argument("need at least one seed");
    Seeding out;
    const auto g = stationary::ground_state(p);
    const double tol = 1e-12 * std::abs(g.energy);
    if (energy < g.energy - tol) {
        out.explanation = "energy below the ground-state minimum: no admissible state";
        return out;
    }
    if (energy <= g.energy + tol) {
        out.box = {g.widths.a_r, g.widths.a_r, 0.0, 0.0};
        out.seeds.push_back(ComplexWidthState::from_real(g.widths));
        out.explanation = "energy equals the ground-state minimum: the ground state is the only admissible state";
        return out;
    }
    out.box = opt.box ? *opt.box : default_seed_box(energy, p);
    const SeedBox& b = out.box;
    if (!(b.re_lo > 0.0) || b.re_hi < b.re_lo || b.im_hi < b.im_lo)
        throw std::invalid_argument("invalid seeding box");
    auto add = [&](double re, double im) {
        const auto az = solve_re_a_z(energy, p, re, im);
        if (!az) return false;
        out.seeds.push_back({{re, im}, {*az, 0.0}});
        return true;
    };
    if (opt.mode == SeedMode::line) {
        const double im = 0.5 * (b.im_lo + b.im_hi);
        for (int i = 0; i < n; ++i) add(b.re_lo + (b.re_hi - b.re_lo) * (i + 0.5) / n, im);
    } else {
        std::mt19937_64 rng(opt.rng_seed);
        std::uniform_real_distribution<double> ure(b.re_lo, b.re_hi), uim(b.im_lo, b.im_hi);
        const long max_attempts = static_cast<long>(opt.max_attempts_factor) * n;
        for (long k = 0; k < max_attempts && static_cast<int>(out.seeds.size()) < n; ++k) {
            const double re = ure(rng), im = uim(rng);
            add(re, im);
        }
    }
    if (static_cast<int>(out.seeds.size()) < n)
        out.explanation = "only " + std::to_string(out.seeds.size()) + " of " + std::to_string(n) +
                          " seeds are admissible at this energy";
    return out;
}

SectionDataset surface_of_section(const std::vector<ComplexWidthState>& seeds, const TrapParams& p,
                                  const SectionOptions& opt) {
    p.validate();
    if (seeds.empty()) throw std::invalid_argument("no seeds");
    if (opt.target_crossings < 1) throw std::invalid_argument("target_crossings must be positive");
    if (!(opt.rtol > 0.0) || !(opt.atol > 0.0)) throw std::invalid_argument("tolerances must be positive");
    for (const auto& s : seeds) s.validate();
    SectionDataset ds;
    ds.direction = opt.direction;
    ds.energy = dynamics::energy_of_state(seeds.front(), p);
    for (const auto& s : seeds)
        if (std::abs(dynamics::energy_of_state(s, p) - ds.energy) > 1e-8 * std::abs(ds.energy))
            throw std::invalid_argument("seeds do not share one energy");
    const double t_end = opt.t_end > 0.0 ? opt.t_end : default_t_end(p);

    std::vector<SectionRun> runs(seeds.size());
    parallel_for(seeds.size(), static_cast<unsigned>(std::max(0, opt.workers)), [&](std::size_t i) {
        SectionRun& run = runs[i];
        const int id = static_cast<int>(i);
        const State y0 = seeds[i].to_array();
        if (y0[1] == 0.0 && y0[3] == 0.0 && dynamics::flow_residual(y0, p) <= 1e-9) {
            // an equilibrium sits on the section for all times
            run.record.id = id;
            run.record.seed = seeds[i];
            run.record.crossings = 1;
            run.record.end_time = t_end;
            run.record.note = "equilibrium";
            run.points.push_back({y0[0], y0[1], 0.0, id, y0[2], y0[3]});
            return;
        }
        run.record = integrate_section(seeds[i], p, t_end, opt, [&](SectionPoint pt) {
            pt.trajectory_id = id;
            run.points.push_back(pt);
            return static_cast<int>(run.points.size()) < opt.target_crossings;
        });
        run.record.id = id;
    });
    for (auto& r : runs) {
        ds.trajectories.push_back(r.record);
        ds.points.insert(ds.points.end(), r.points.begin(), r.points.end());
    }
    return ds;
}

std::vector<double> default_panel_factors() {
    return {1.0, 5.00 / 4.24, 6.00 / 4.24, 9.00 / 4.24, 15.0 / 4.24, 30.0 / 4.24, 60.0 / 4.24};
}

std::vector<double> default_panel_energies(const TrapParams& p) {
    const double e = stationary::ground_state(p).energy;
    std::vector<double> out;
    for (double f : default_panel_factors()) out.push_back(f * e);
    return out;
}

std::vector<PanelResult> panel_sweep(const TrapParams& p, const std::vector<double>& energies,
                                     int n_per_panel, const SectionOptions& opt,
                                     const SeedOptions& seeding) {
    for (std::size_t i = 1; i < energies.size(); ++i)
        if (!(energies[i] > energies[i - 1])) throw std::invalid_argument("energies must be ascending");
    std::vector<PanelResult> out;
    for (double e : energies) {
        PanelResult r;
        const auto s = seed_initial_states(e, p, n_per_panel, seeding);
        r.box = s.box;
        r.seeding_note = s.explanation;
        if (s.seeds.empty()) {
            r.dataset.energy = e;
            r.dataset.direction = opt.direction;
        } else {
            r.dataset = surface_of_section(s.seeds, p, opt);
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::optional<Return> return_map(double energy, const TrapParams& p, double re_a_r, double im_a_r,
                                 const SectionOptions& opt) {
    const auto az = solve_re_a_z(energy, p, re_a_r, im_a_r, opt.direction);
    if (!az) return std::nullopt;
    const ComplexWidthState s{{re_a_r, im_a_r}, {*az, 0.0}};
    const double t_end = opt.t_end > 0.0 ? opt.t_end : default_t_end(p) / 40.0;
    std::optional<Return> out;
    const auto rec = integrate_section(s, p, t_end, opt, [&](const SectionPoint& pt) {
        out = Return{pt.re_a_r, pt.im_a_r, pt.crossing_time};
        return false;
    });
    if (rec.outcome != Outcome::bounded) return std::nullopt;
    return out;
}

PeriodicOrbit find_periodic_orbit(double energy, const TrapParams& p, double re_a_r, double im_a_r,
                                  const SectionOptions& opt) {
    // local t_end so every call shares one default
    SectionOptions o = opt;
    if (o.t_end <= 0.0) o.t_end = default_t_end(p) / 40.0;
    double x = re_a_r, y = im_a_r;
    for (int it = 0; it < 40; ++it) {
        const auto r = return_map(energy, p, x, y, o);
        if (!r) throw NoStationaryState("return map undefined during periodic-orbit search");
        const double fx = r->re_a_r - x, fy = r->im_a_r - y;
        const double scale = std::max(x, std::abs(y));
        const double hx = 1e-6 * x, hy = 1e-6 * scale;
        auto eval = [&](double u, double v) {
            const auto q = return_map(energy, p, u, v, o);
            if (!q) throw NoStationaryState("return map undefined near the periodic orbit");
            return std::array<double, 2>{q->re_a_r, q->im_a_r};
        };
        const auto px = eval(x + hx, y), mx = eval(x - hx, y);
        const auto py = eval(x, y + hy), my = eval(x, y - hy);
        Eigen::Matrix2d dp;
        dp << (px[0] - mx[0]) / (2 * hx), (py[0] - my[0]) / (2 * hy),
              (px[1] - mx[1]) / (2 * hx), (py[1] - my[1]) / (2 * hy);
        if (std::hypot(fx, fy) <= 1e-9 * scale) {
            PeriodicOrbit po;
            po.energy = energy;
            po.re_a_r = x;
            po.im_a_r = y;
            po.period = r->time;
            Eigen::EigenSolver<Eigen::Matrix2d> es(dp);
            po.multipliers = {es.eigenvalues()(0), es.eigenvalues()(1)};
            po.stable = std::abs(dp.trace()) < 2.0;
            return po;
        }
        const Eigen::Matrix2d jf = dp - Eigen::Matrix2d::Identity();
        Eigen::Vector2d step = jf.fullPivLu().solve(Eigen::Vector2d(-fx, -fy));
        if (!step.allFinite()) throw NoStationaryState("singular return-map Jacobian");
        const double cap = 0.1 * scale;
        if (step.norm() > cap) step *= cap / step.norm();
        // keep the iterate admissible
        double t = 1.0;
        for (int k = 0; k < 30; ++k, t *= 0.5)
            if (solve_re_a_z(energy, p, x + t * step(0), y + t * step(1), o.direction)) break;
        x += t * step(0);
        y += t * step(1);
    }
    throw NoStationaryState("periodic-orbit Newton did not converge");
}

std::vector<PeriodicOrbit> continue_periodic_orbit(const TrapParams& p, double energy, int n_steps,
                                                   const SectionOptions& opt) {
    if (n_steps < 1) throw std::invalid_argument("n_steps must be positive");
    const auto g = stationary::ground_state(p);
    if (!(energy > g.energy)) throw std::invalid_argument("energy must exceed the ground-state energy");
    SectionOptions o = opt;
    if (o.t_end <= 0.0) o.t_end = default_t_end(p) / 40.0;
    const double d0 = std::min(1e-4 * std::abs(g.energy), energy - g.energy);
    const double d1 = energy - g.energy;
    std::vector<PeriodicOrbit> out;
    double lx = std::log(d0);
    const double lend = std::log(d1);
    double h = n_steps > 1 ? (lend - lx) / n_steps : 0.0;
    out.push_back(find_periodic_orbit(g.energy + d0, p, g.widths.a_r, 0.0, o));
    double prev_l = lx;
    while (lend - lx > 1e-12 * std::max(1.0, std::abs(lend))) {
        const double ln = std::min(lend, lx + h);
        // secant predictor in log excess energy
        double gx = out.back().re_a_r, gy = out.back().im_a_r;
        if (out.size() >= 2 && lx > prev_l) {
            const auto& a = out[out.size() - 2];
            const auto& b = out.back();
            const double w = (ln - lx) / (lx - prev_l);
            gx = b.re_a_r + w * (b.re_a_r - a.re_a_r);
            gy = b.im_a_r + w * (b.im_a_r - a.im_a_r);
        }
        try {
            out.push_back(find_periodic_orbit(g.energy + std::exp(ln), p, gx, gy, o));
            prev_l = lx;
            lx = ln;
        } catch (const NoStationaryState&) {
            h *= 0.5;
            if (h < 1e-4 * (lend - std::log(d0)) / n_steps)
                throw NoStationaryState("periodic-orbit continuation stalled");
        }
    }
    return out;
}

}  // namespace poincare
}  // namespace dbec
