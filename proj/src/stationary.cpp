#include "dbec/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "dbec/meanfield_kernel.hpp"
#include "dbec/parallel.hpp"

namespace dbec {

const char* to_string(Branch b) {
    switch (b) {
        case Branch::ground: return "ground";
        case Branch::excited: return "excited";
        case Branch::fold: return "fold";
    }
    return "?";
}

const char* to_string(Stability s) {
    switch (s) {
        case Stability::stable: return "stable";
        case Stability::unstable: return "unstable";
        case Stability::unclassified: return "unclassified";
    }
    return "?";
}

namespace stationary {

namespace {

using Eigen::Matrix2d;
using Eigen::Matrix3d;
using Eigen::Vector2d;
using Eigen::Vector3d;

// Widths outside [kMinWidth, kMaxWidth] * N^2 gamma_bar count as divergence.
constexpr double kMinWidth = 1e-14;
constexpr double kMaxWidth = 1e14;

// Residual and Jacobian in logarithmic widths x = ln A, scaled by the energy
// scale: R = A . grad E / s, J = dR/dx.
struct LogEval {
    Vector2d a;
    Vector2d g;
    Matrix2d h;
    Vector2d r;
    Matrix2d j;
    double rel;  // stationarity_residual at this point
};

LogEval eval_log(const TrapParams& p, const Vector2d& x, double scale) {
    LogEval e;
    e.a = x.array().exp();
    const WidthVector w{e.a(0), e.a(1)};
    e.g = meanfield::energy_gradient(w, p);
    e.h = meanfield::energy_hessian(w, p);
    e.r = e.a.cwiseProduct(e.g) / scale;
    e.j = (e.a.asDiagonal() * e.h * e.a.asDiagonal()) / scale;
    e.j.diagonal() += e.r;
    if (!e.r.allFinite() || !e.j.allFinite()) throw std::range_error("non-finite residual");
    e.rel = e.r.norm() * scale / std::max(scale, 2.0 * e.a(0) + e.a(1));
    return e;
}

bool widths_in_range(const Vector2d& a, double scale) {
    return a.minCoeff() > kMinWidth * scale && a.maxCoeff() < kMaxWidth * scale;
}

StationaryState make_state(const TrapParams& p, const Vector2d& a, double resid, int iters) {
    StationaryState s;
    s.widths = WidthVector{a(0), a(1)};
    const auto e = meanfield::mean_field_energy(s.widths, p);
    s.energy = e.total;
    s.chem_potential = meanfield::chemical_potential(s.widths, p);
    s.gradient_norm = resid;
    s.iterations = iters;
    classify(s, p);
    return s;
}

// Newton on R(x) = 0 in log widths. Returns the converged log widths or
// nullopt.
struct NewtonResult {
    Vector2d x;
    double resid;
    int iterations;
};

std::optional<NewtonResult> newton_log(const TrapParams& p, Vector2d x, const NewtonOptions& opt,
                                       std::string* why = nullptr) {
    const double scale = meanfield::energy_scale(p);
    auto fail = [&](const char* msg) -> std::optional<NewtonResult> {
        if (why) *why = msg;
        return std::nullopt;
    };
    try {
        LogEval e = eval_log(p, x, scale);
        double norm = e.r.norm();
        for (int it = 0; it <= opt.max_iterations; ++it) {
            if (e.rel <= opt.tolerance) return NewtonResult{x, e.rel, it};
            if (it == opt.max_iterations) break;
            Eigen::FullPivLU<Matrix2d> lu(e.j);
            if (!lu.isInvertible()) return fail("singular Jacobian");
            Vector2d dx = -lu.solve(e.r);
            if (!dx.allFinite()) return fail("singular Jacobian");
            const double big = dx.cwiseAbs().maxCoeff();
            if (big > 2.0) dx *= 2.0 / big;
            double t = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
                const Vector2d xn = x + t * dx;
                try {
                    LogEval en = eval_log(p, xn, scale);
                    const double nn = en.r.norm();
                    if (nn < (1.0 - 1e-4 * t) * norm) {
                        x = xn;
                        e = en;
                        norm = nn;
                        accepted = true;
                        break;
                    }
                } catch (const std::exception&) {
                }
            }
            if (!accepted) return fail("line search failed");
            if (!widths_in_range(e.a, scale)) return fail("widths diverged");
        }
    } catch (const std::exception&) {
        return fail("evaluation failed");
    }
    return fail("no convergence within the iteration limit");
}

Vector2d to_log(const WidthVector& w) { return Vector2d(std::log(w.a_r), std::log(w.a_z)); }

WidthVector oscillator_widths(const TrapParams& p) {
    return WidthVector{p.scaled_gamma_r / 2.0, p.scaled_gamma_z / 2.0};
}

// Log-coordinate Jacobian of the two stationarity equations plus d/da.
Eigen::Matrix<double, 2, 3> extended_jacobian(const TrapParams& p, const Vector3d& u,
                                              double scale) {
    const TrapParams q = p.with_scattering(u(2));
    const LogEval e = eval_log(q, u.head<2>(), scale);
    Eigen::Matrix<double, 2, 3> m;
    m.leftCols<2>() = e.j;
    // dE/da = (4/sqrt(pi)) A_r sqrt(A_z)  =>  d(A . grad E)/da = c P (1, 1/2)
    const double pw = e.a(0) * std::sqrt(e.a(1));
    const double c = meanfield::kernel::kContactCoeff;
    m(0, 2) = c * pw / scale;
    m(1, 2) = 0.5 * c * pw / scale;
    return m;
}

Vector3d null_vector(const Eigen::Matrix<double, 2, 3>& m) {
    const Vector3d r0 = m.row(0).transpose(), r1 = m.row(1).transpose();
    Vector3d t = r0.cross(r1);
    const double n = t.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw NoStationaryState("degenerate continuation tangent");
    return t / n;
}

double normalized_det(const Matrix2d& j) {
    const double n = j.squaredNorm();
    return n > 0.0 ? j.determinant() / n : 0.0;
}

// Newton on {R(x, a) = 0, det J(x, a) = 0} with a finite-difference
// Jacobian. Returns (x, a).
std::optional<Vector3d> refine_fold(const TrapParams& p, Vector3d u) {
    const double scale = meanfield::energy_scale(p);
    auto f = [&](const Vector3d& v) {
        const LogEval e = eval_log(p.with_scattering(v(2)), v.head<2>(), scale);
        return Vector3d(e.r(0), e.r(1), normalized_det(e.j));
    };
    auto rel = [&](const Vector3d& v) {
        return eval_log(p.with_scattering(v(2)), v.head<2>(), scale).rel;
    };
    try {
        Vector3d fu = f(u);
        for (int it = 0; it < 60; ++it) {
            Matrix3d jac;
            for (int k = 0; k < 3; ++k) {
                const double h = k < 2 ? 1e-6 : 1e-7 * std::max(1.0, std::abs(u(2)));
                Vector3d up = u, um = u;
                up(k) += h;
                um(k) -= h;
                jac.col(k) = (f(up) - f(um)) / (2.0 * h);
            }
            Eigen::FullPivLU<Matrix3d> lu(jac);
            if (!lu.isInvertible()) return std::nullopt;
            Vector3d du = -lu.solve(fu);
            const double big = du.head<2>().cwiseAbs().maxCoeff();
            if (big > 0.5) du *= 0.5 / big;
            u += du;
            fu = f(u);
            if (rel(u) <= 1e-10 && std::abs(fu(2)) <= 1e-10 &&
                std::abs(du(2)) <= 1e-13 * std::max(1.0, std::abs(u(2))))
                return u;
        }
        if (rel(u) <= 1e-10 && std::abs(fu(2)) <= 1e-9) return u;
    } catch (const std::exception&) {
    }
    return std::nullopt;
}

}  // namespace

double stationarity_residual(const WidthVector& w, const TrapParams& p) {
    const double scale = meanfield::energy_scale(p);
    return eval_log(p, to_log(w), scale).rel;
}

void classify(StationaryState& s, const TrapParams& p) {
    const Matrix2d h = meanfield::energy_hessian(s.widths, p);
    const Vector2d a(s.widths.a_r, s.widths.a_z);
    const double scale = meanfield::energy_scale(p);
    const Matrix2d m = (a.asDiagonal() * h * a.asDiagonal()) / scale;
    const double det = m.determinant();
    if (std::abs(det) < 1e-10) {
        s.branch = Branch::fold;
        s.stability = Stability::unclassified;
    } else if (det > 0.0 && m(0, 0) > 0.0) {
        s.branch = Branch::ground;
        s.stability = Stability::stable;
    } else {
        s.branch = Branch::excited;
        s.stability = Stability::unstable;
    }
}

StationaryState find_stationary(const TrapParams& p, const WidthVector& guess,
                                const NewtonOptions& opt) {
    p.validate();
    guess.validate();
    std::string why;
    const auto r = newton_log(p, to_log(guess), opt, &why);
    if (!r) throw NoStationaryState("no stationary state from this guess: " + why);
    const Vector2d a = r->x.array().exp();
    return make_state(p, a, r->resid, r->iterations);
}

StationaryState minimize_energy(const TrapParams& p, std::optional<WidthVector> guess,
                                const NewtonOptions& opt) {
    p.validate();
    const WidthVector start = guess ? *guess : oscillator_widths(p);
    start.validate();
    const double scale = meanfield::energy_scale(p);
    Vector2d x = to_log(start);
    auto energy = [&](const Vector2d& v) {
        return meanfield::mean_field_energy(WidthVector{std::exp(v(0)), std::exp(v(1))}, p).total;
    };
    double e0 = energy(x);
    for (int it = 0; it < 500; ++it) {
        const LogEval e = eval_log(p, x, scale);
        Eigen::SelfAdjointEigenSolver<Matrix2d> eig(e.j);
        const bool convex = eig.eigenvalues().minCoeff() > 0.0;
        if (convex && e.r.norm() < 1e-3) {
            // close to a minimum: finish with Newton on the gradient
            if (const auto r = newton_log(p, x, opt)) {
                const Vector2d a = r->x.array().exp();
                auto s = make_state(p, a, r->resid, it + r->iterations);
                if (s.branch == Branch::ground) return s;
            }
        }
        // saddle-free Newton direction: |eigenvalues| with a floor
        Vector2d lam = eig.eigenvalues().cwiseAbs();
        const double floor = 1e-8 * std::max(1.0, lam.maxCoeff());
        lam = lam.cwiseMax(floor);
        const Matrix2d& v = eig.eigenvectors();
        Vector2d dx = -(v * (v.transpose() * e.r).cwiseQuotient(lam));
        const double big = dx.cwiseAbs().maxCoeff();
        if (big > 1.0) dx *= 1.0 / big;
        const double slope = e.r.dot(dx) * scale;
        double t = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
            const Vector2d xn = x + t * dx;
            try {
                const double en = energy(xn);
                if (en <= e0 + 1e-4 * t * slope) {
                    x = xn;
                    e0 = en;
                    accepted = true;
                    break;
                }
            } catch (const std::exception&) {
            }
        }
        const Vector2d a = x.array().exp();
        if (!widths_in_range(a, scale))
            throw NoStationaryState("energy descent collapsed: no local minimum");
        if (!accepted) {
            if (const auto r = newton_log(p, x, opt)) {
                auto s = make_state(p, r->x.array().exp(), r->resid, it + r->iterations);
                if (s.branch == Branch::ground) return s;
            }
            throw NoStationaryState("energy descent stalled");
        }
    }
    throw NoStationaryState("energy descent did not converge");
}

StationaryState ground_state(const TrapParams& p) {
    const WidthVector osc = oscillator_widths(p);
    std::string last;
    for (double f : {1.0, 0.1}) {
        try {
            return minimize_energy(p, WidthVector{osc.a_r * f, osc.a_z * f});
        } catch (const NoStationaryState& e) {
            last = e.what();
        }
    }
    // Close to the fold the basin of the minimum is too small for a cold
    // start. Follow the ground branch down from a = 1/6 instead: descent
    // warm-started from the minimum at a larger a approaches the new minimum
    // from the side away from the saddle.
    const double a_top = 1.0 / 6.0 - 1e-7;
    if (!(p.scattering_ratio < a_top)) throw NoStationaryState("no ground state: " + last);
    StationaryState s;
    try {
        s = minimize_energy(p.with_scattering(a_top));
    } catch (const NoStationaryState&) {
        throw NoStationaryState("no ground state: " + last);
    }
    double a = a_top;
    double h = (a_top - p.scattering_ratio) / 16.0;
    while (a > p.scattering_ratio) {
        const double a_next = std::max(p.scattering_ratio, a - h);
        try {
            s = minimize_energy(p.with_scattering(a_next), s.widths);
            a = a_next;
            h *= 1.5;
        } catch (const NoStationaryState&) {
            h *= 0.5;
            if (h < 1e-13 * std::max(1.0, std::abs(a)))
                throw NoStationaryState("no ground state: branch ends above the requested a");
        }
    }
    return s;
}

StationaryState excited_state(const TrapParams& p) {
    const WidthVector osc = oscillator_widths(p);
    try {
        auto s = find_stationary(p, WidthVector{10.0 * osc.a_r, 10.0 * osc.a_z});
        if (s.branch == Branch::excited) return s;
    } catch (const NoStationaryState&) {
    }
    const auto curves = trace_branches(p, p.scattering_ratio, p.scattering_ratio);
    const auto& ex = curves.second;
    if (ex.states.empty() || ex.samples.back() < p.scattering_ratio)
        throw NoStationaryState("no excited state: continuation did not return to a");
    // closest traced point above the target, polished at the exact a
    const auto it = std::lower_bound(ex.samples.begin(), ex.samples.end(), p.scattering_ratio);
    const auto k = static_cast<std::size_t>(it - ex.samples.begin());
    if (ex.samples[k] == p.scattering_ratio) return ex.states[k];
    auto s = find_stationary(p, ex.states[k].widths);
    if (s.branch != Branch::excited) throw NoStationaryState("no excited state found");
    return s;
}

std::pair<BranchCurve, BranchCurve> trace_branches(const TrapParams& p, double a_start,
                                                   double a_stop,
                                                   const ContinuationOptions& opt) {
    const double scale = meanfield::energy_scale(p);
    const StationaryState g0 = ground_state(p.with_scattering(a_start));
    NewtonOptions nopt;

    Vector3d u(std::log(g0.widths.a_r), std::log(g0.widths.a_z), a_start);
    Vector3d t = null_vector(extended_jacobian(p, u, scale));
    if (t(2) > 0.0) t = -t;

    std::vector<std::pair<double, StationaryState>> ground{{a_start, g0}}, excited;
    std::optional<FoldPoint> fold;
    bool past_fold = false;
    double h = opt.initial_step;

    for (int n = 0; n < opt.max_points; ++n) {
        const Vector3d pred = u + h * t;
        Vector3d v = pred;
        bool ok = false;
        int iters = 0;
        try {
            for (; iters < 12; ++iters) {
                const TrapParams q = p.with_scattering(v(2));
                const LogEval e = eval_log(q, v.head<2>(), scale);
                const Vector3d f(e.r(0), e.r(1), t.dot(v - pred));
                if (e.rel <= nopt.tolerance && std::abs(f(2)) <= 1e-12) {
                    ok = true;
                    break;
                }
                Matrix3d jac;
                jac.topRows<2>() = extended_jacobian(p, v, scale);
                jac.row(2) = t.transpose();
                const Vector3d dv = jac.fullPivLu().solve(-f);
                if (!dv.allFinite()) break;
                v += dv;
            }
        } catch (const std::exception&) {
            ok = false;
        }
        if (ok) {
            const Vector2d a = v.head<2>().array().exp();
            if (!widths_in_range(a, scale) || a.maxCoeff() > opt.width_cap * scale) break;
        }
        if (!ok) {
            h *= 0.5;
            if (h < opt.min_step) break;
            continue;
        }
        Vector3d tn = null_vector(extended_jacobian(p, v, scale));
        if (tn.dot(t) < 0.0) tn = -tn;
        const bool turned = !past_fold && tn(2) > 0.0;
        if (turned) {
            past_fold = true;
            if (const auto f = refine_fold(p, 0.5 * (u + v))) {
                fold = FoldPoint{(*f)(2), WidthVector{std::exp((*f)(0)), std::exp((*f)(1))}};
            }
        }
        u = v;
        t = tn;
        const TrapParams q = p.with_scattering(u(2));
        const double resid = eval_log(q, u.head<2>(), scale).rel;
        StationaryState s = make_state(q, u.head<2>().array().exp(), resid, iters);
        if (past_fold)
            excited.emplace_back(u(2), s);
        else
            ground.emplace_back(u(2), s);
        if (past_fold && u(2) > a_stop) break;
        if (iters <= 3) h = std::min(1.5 * h, opt.max_step);
    }

    auto to_curve = [&](std::vector<std::pair<double, StationaryState>> pts) {
        std::sort(pts.begin(), pts.end(),
                  [](const auto& l, const auto& r) { return l.first < r.first; });
        BranchCurve c;
        for (auto& [a, s] : pts) {
            if (!c.samples.empty() && !(a > c.samples.back())) continue;
            c.samples.push_back(a);
            c.states.push_back(s);
        }
        c.fold = fold;
        return c;
    };
    return {to_curve(std::move(ground)), to_curve(std::move(excited))};
}

CriticalPoint critical_point(const TrapParams& p_in) {
    p_in.validate();
    const TrapParams p = p_in.with_scattering(0.0);
    CriticalPoint cp;
    double a_ok = 1.0 / 6.0 - 1e-7;
    StationaryState s_ok;
    try {
        s_ok = ground_state(p.with_scattering(a_ok));
    } catch (const NoStationaryState&) {
        throw std::runtime_error("fold outside search bracket: no ground state below 1/6");
    }
    double floor = -1.0;
    double h = 1.0 / 64.0;
    NewtonOptions nopt;
    while (h > 1e-11) {
        double a_try = a_ok - h;
        if (a_try < floor) {
            if (a_ok - floor > 1e-12) {
                a_try = floor;
            } else {
                if (++cp.bracket_extensions > 12)
                    throw std::runtime_error("fold outside search bracket");
                floor *= 2.0;
                continue;
            }
        }
        const TrapParams q = p.with_scattering(a_try);
        const auto r = newton_log(q, to_log(s_ok.widths), nopt);
        if (r) {
            const double step = a_ok - a_try;
            a_ok = a_try;
            s_ok.widths = WidthVector{std::exp(r->x(0)), std::exp(r->x(1))};
            h = 2.0 * step;
        } else {
            h = 0.5 * std::min(h, a_ok - a_try);
        }
    }
    cp.bisection_ratio = a_ok;
    const auto f = refine_fold(p, Vector3d(std::log(s_ok.widths.a_r), std::log(s_ok.widths.a_z), a_ok));
    if (!f) throw std::runtime_error("fold refinement (det Hessian = 0) did not converge");
    cp.scattering_ratio = (*f)(2);
    cp.widths = WidthVector{std::exp((*f)(0)), std::exp((*f)(1))};
    if (std::abs(cp.scattering_ratio - cp.bisection_ratio) > 1e-6)
        throw std::runtime_error("fold estimates disagree");
    return cp;
}

double critical_scattering_length(double scaled_gamma_bar, double aspect_ratio) {
    return critical_point(TrapParams::from_mean(scaled_gamma_bar, aspect_ratio)).scattering_ratio;
}

void ThresholdGrid::validate() const {
    auto bad = [](double lo, double hi, int n, bool lg) {
        return !(lo > 0.0 || !lg) || !(hi >= lo) || n < 1 || !std::isfinite(lo) ||
               !std::isfinite(hi) || (n > 1 && !(hi > lo));
    };
    if (bad(gamma_lo, gamma_hi, n_gamma, true) || !(gamma_lo > 0.0))
        throw std::invalid_argument("invalid gamma_bar grid");
    if (bad(lambda_lo, lambda_hi, n_lambda, true) || !(lambda_lo > 0.0))
        throw std::invalid_argument("invalid lambda grid");
}

namespace {

std::vector<double> axis(double lo, double hi, int n, bool lg) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double f = n == 1 ? 0.0 : static_cast<double>(i) / (n - 1);
        v[static_cast<std::size_t>(i)] =
            lg ? std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))) : lo + f * (hi - lo);
    }
    v.front() = lo;
    if (n > 1) v.back() = hi;
    return v;
}

}  // namespace

std::vector<ThresholdCell> threshold_map(const ThresholdGrid& grid, unsigned workers) {
    grid.validate();
    const auto gs = axis(grid.gamma_lo, grid.gamma_hi, grid.n_gamma, grid.log_gamma);
    const auto ls = axis(grid.lambda_lo, grid.lambda_hi, grid.n_lambda, grid.log_lambda);
    std::vector<ThresholdCell> cells(gs.size() * ls.size());
    parallel_for(cells.size(), workers, [&](std::size_t k) {
        ThresholdCell& c = cells[k];
        c.scaled_gamma_bar = gs[k / ls.size()];
        c.aspect_ratio = ls[k % ls.size()];
        try {
            TrapParams p = TrapParams::from_mean(c.scaled_gamma_bar, c.aspect_ratio);
            p.dipole_coupling = grid.dipole_coupling;
            c.a_crit = critical_point(p).scattering_ratio;
        } catch (const std::exception& e) {
            c.error = e.what();
        }
    });
    return cells;
}

}  // namespace stationary
}  // namespace dbec
