#include "dbec/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "dbec/dynamics.hpp"
#include "dbec/exceptional.hpp"
#include "dbec/output.hpp"
#include "dbec/poincare.hpp"
#include "dbec/stationary.hpp"
#include "dbec/units.hpp"

namespace dbec::cli {

namespace {

using output::number;

// Invalid configuration detected after parsing; exit status 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string fmt(double x, int digits = 10) {
    std::ostringstream os;
    os << std::setprecision(digits) << x;
    return os.str();
}

unsigned env_workers() {
    if (const char* s = std::getenv("DBEC_WORKERS")) {
        try {
            const int n = std::stoi(s);
            if (n > 0) return static_cast<unsigned>(n);
        } catch (const std::exception&) {
        }
    }
    return 0;
}

struct ParamOptions {
    std::optional<double> gbar, lambda, gamma_r, gamma_z, a;
    std::optional<std::uint64_t> n;
    std::optional<double> fbar, fr, fz, a_bohr;
    std::string element = "cr";
    double mu = 6.0;
    bool contact_only = false;

    void add(CLI::App* app) {
        auto* g = app->add_option_group("trap", "trap parameters, scaled or laboratory style");
        g->add_option("--gbar", gbar, "scaled mean frequency N^2 gamma_bar");
        g->add_option("--lambda", lambda, "aspect ratio gamma_z/gamma_r");
        g->add_option("--gamma-r", gamma_r, "scaled N^2 gamma_r");
        g->add_option("--gamma-z", gamma_z, "scaled N^2 gamma_z");
        g->add_option("--a", a, "scattering length a/a_d");
        g->add_option("--n", n, "particle number (laboratory style)");
        g->add_option("--fbar", fbar, "mean trap frequency in Hz (laboratory style, with --lambda)");
        g->add_option("--fr", fr, "radial trap frequency in Hz");
        g->add_option("--fz", fz, "axial trap frequency in Hz");
        g->add_option("--a-bohr", a_bohr, "scattering length in Bohr radii");
        g->add_option("--element", element, "atomic species")->capture_default_str();
        g->add_option("--mu", mu, "magnetic moment in Bohr magnetons")->capture_default_str();
        g->add_flag("--contact-only", contact_only, "switch the dipolar term off");
    }

    bool lab() const { return n.has_value(); }

    TrapParams resolve(bool need_scattering) const {
        const bool scaled = gbar || gamma_r || gamma_z;
        if (scaled && lab()) throw ConfigError("give either scaled (--gbar/--gamma-*) or laboratory (--n) parameters, not both");
        if (!scaled && !lab()) throw ConfigError("missing trap parameters: use --gbar/--lambda, --gamma-r/--gamma-z or --n with frequencies");
        TrapParams p;
        if (scaled) {
            if (fbar || fr || fz || a_bohr) throw ConfigError("laboratory options given with scaled parameters");
            if (gbar) {
                if (gamma_r || gamma_z) throw ConfigError("--gbar excludes --gamma-r/--gamma-z");
                if (!lambda) throw ConfigError("--gbar needs --lambda");
                p = TrapParams::from_mean(*gbar, *lambda);
            } else {
                if (!gamma_r || !gamma_z) throw ConfigError("give both --gamma-r and --gamma-z");
                if (lambda) throw ConfigError("--lambda is implied by --gamma-r/--gamma-z");
                p.scaled_gamma_r = *gamma_r;
                p.scaled_gamma_z = *gamma_z;
            }
            if (need_scattering && !a) throw ConfigError("missing scattering length --a");
            p.scattering_ratio = a.value_or(0.0);
        } else {
            if (a) throw ConfigError("use --a-bohr with laboratory parameters");
            LabTrap lab;
            lab.particle_number = *n;
            if (fbar) {
                if (fr || fz) throw ConfigError("--fbar excludes --fr/--fz");
                const double lam = lambda.value_or(1.0);
                if (!(lam > 0.0)) throw ConfigError("--lambda must be positive");
                lab.freq_r_hz = *fbar / std::cbrt(lam);
                lab.freq_z_hz = *fbar * std::cbrt(lam * lam);
            } else {
                if (!fr || !fz) throw ConfigError("give --fbar or both --fr and --fz");
                lab.freq_r_hz = *fr;
                lab.freq_z_hz = *fz;
            }
            if (need_scattering && !a_bohr) throw ConfigError("missing scattering length --a-bohr");
            lab.scattering_bohr = a_bohr.value_or(0.0);
            p = scale_lab_to_params(lab, AtomSpec::from_element(element, mu));
        }
        if (contact_only) p.dipole_coupling = 0.0;
        p.validate();
        return p;
    }
};

nlohmann::json resolved_config(const CLI::App* sub) {
    nlohmann::json j = nlohmann::json::object();
    std::function<void(const CLI::App*)> collect = [&](const CLI::App* app) {
        for (const CLI::Option* opt : app->get_options()) {
            if (opt->get_lnames().empty()) continue;
            const std::string name = opt->get_lnames().front();
            if (name == "help" || name == "config") continue;
            if (opt->count() > 0) {
                const auto& r = opt->results();
                if (r.size() == 1)
                    j[name] = r.front();
                else
                    j[name] = r;
            } else if (!opt->get_default_str().empty()) {
                j[name] = opt->get_default_str();
            }
        }
        for (const CLI::App* s : app->get_subcommands({})) {
            if (s->get_name().empty()) collect(s);  // option groups
        }
    };
    collect(sub);
    return j;
}

std::string join_args(const std::vector<std::string>& args) {
    std::string s = "dbec";
    for (const auto& a : args) {
        const bool quote = a.find_first_of(" \t\"'") != std::string::npos || a.empty();
        s += " ";
        s += quote ? "'" + a + "'" : a;
    }
    return s;
}

struct Context {
    std::ostream& out;
    std::ostream& err;
    output::Header header;
};

std::string params_line(const TrapParams& p) {
    return "params: N^2 gamma_r=" + number(p.scaled_gamma_r) + " N^2 gamma_z=" + number(p.scaled_gamma_z) +
           " N^2 gamma_bar=" + number(p.scaled_gamma_bar()) + " lambda=" + number(p.aspect_ratio()) +
           " a/a_d=" + number(p.scattering_ratio) + " dipole_coupling=" + number(p.dipole_coupling);
}

// ---------------------------------------------------------------- units

struct UnitsCmd {
    ParamOptions params;
    std::string out;
    void add(CLI::App* app) {
        params.add(app);
        app->add_option("--out", out, "CSV output file");
    }
    void run(Context& c) {
        if (!params.lab()) throw ConfigError("units needs laboratory parameters (--n and frequencies)");
        const auto p = params.resolve(false);
        const auto spec = AtomSpec::from_element(params.element, params.mu);
        const auto u = derived_units(spec);
        if (!out.empty()) {
            c.header.extra.push_back(params_line(p));
            output::CsvWriter w(out, c.header, {"quantity", "value"});
            w.row({"a_d_bohr", number(u.length_bohr)});
            w.row({"a_d_m", number(u.length_m)});
            w.row({"E_d_eV", number(u.energy_ev)});
            w.row({"omega_d_rad_s", number(u.omega_rad_s)});
            w.row({"N2_gamma_r", number(p.scaled_gamma_r)});
            w.row({"N2_gamma_z", number(p.scaled_gamma_z)});
            w.row({"N2_gamma_bar", number(p.scaled_gamma_bar())});
            w.row({"lambda", number(p.aspect_ratio())});
            w.row({"a_over_a_d", number(p.scattering_ratio)});
            w.row({"D", number(d_parameter(p))});
        }
        c.out << "N^2 gamma_bar = " << fmt(p.scaled_gamma_bar(), 6) << "  lambda = " << fmt(p.aspect_ratio(), 6)
              << "  a/a_d = " << fmt(p.scattering_ratio, 6) << "  a_d = " << fmt(u.length_bohr, 6)
              << " a_0  E_d = " << fmt(u.energy_ev, 6) << " eV  D = " << fmt(d_parameter(p), 6) << "\n";
    }
};

// ---------------------------------------------------------------- stationary

std::vector<std::string> state_row(const std::string& label, const StationaryState& s) {
    return {label, number(s.widths.a_r), number(s.widths.a_z), number(s.widths.kappa()),
            number(s.chem_potential), number(s.energy), to_string(s.stability), number(s.gradient_norm)};
}

struct StationaryCmd {
    ParamOptions params;
    std::string out;
    void add(CLI::App* app) {
        params.add(app);
        app->add_option("--out", out, "CSV output file");
    }
    void run(Context& c) {
        const auto p = params.resolve(true);
        const auto g = stationary::ground_state(p);
        const auto e = stationary::excited_state(p);
        if (!out.empty()) {
            c.header.extra.push_back(params_line(p));
            output::CsvWriter w(out, c.header, {"branch", "a_r", "a_z", "kappa", "chem_potential", "energy", "stability", "gradient_norm"});
            w.row(state_row("ground", g));
            w.row(state_row("excited", e));
        }
        c.out << "ground: eps = " << fmt(g.chem_potential) << "  E = " << fmt(g.energy)
              << "  excited: eps = " << fmt(e.chem_potential) << "  E = " << fmt(e.energy)
              << "  E_es/E_gs = " << fmt(e.energy / g.energy, 6) << "\n";
    }
};

// ---------------------------------------------------------------- branches

struct BranchesCmd {
    ParamOptions params;
    std::string out;
    double a_start = 1.0 / 6.0 - 1e-4;
    double a_stop = 1.0 / 6.0 - 1e-4;
    stationary::ContinuationOptions cont;
    void add(CLI::App* app) {
        params.add(app);
        app->add_option("--a-start", a_start, "ground-branch start (a/a_d)")->capture_default_str();
        app->add_option("--a-stop", a_stop, "excited-branch end (a/a_d)")->capture_default_str();
        app->add_option("--max-step", cont.max_step, "largest continuation step")->capture_default_str();
        app->add_option("--max-points", cont.max_points, "point budget")->capture_default_str();
        app->add_option("--out", out, "CSV output file");
    }
    void run(Context& c) {
        const auto p = params.resolve(false);
        if (!(a_start < 1.0 / 6.0)) throw ConfigError("--a-start must lie below 1/6");
        if (!(cont.max_step > 0.0) || cont.max_points < 2) throw ConfigError("invalid continuation options");
        const auto [ground, excited] = stationary::trace_branches(p, a_start, a_stop, cont);
        if (!out.empty()) {
            c.header.extra.push_back(params_line(p));
            if (ground.fold)
                c.header.extra.push_back("fold: a/a_d=" + number(ground.fold->scattering_ratio) +
                                         " a_r=" + number(ground.fold->widths.a_r) +
                                         " a_z=" + number(ground.fold->widths.a_z));
            output::CsvWriter w(out, c.header, {"branch", "a", "a_r", "a_z", "chem_potential", "energy", "stability"});
            for (const auto* curve : {&ground, &excited}) {
                for (std::size_t i = 0; i < curve->states.size(); ++i) {
                    const auto& s = curve->states[i];
                    w.row({to_string(s.branch), number(curve->samples[i]), number(s.widths.a_r), number(s.widths.a_z),
                           number(s.chem_potential), number(s.energy), to_string(s.stability)});
                }
            }
        }
        c.out << "ground points: " << ground.states.size() << "  excited points: " << excited.states.size();
        if (ground.fold)
            c.out << "  fold at a/a_d = " << fmt(ground.fold->scattering_ratio);
        else
            c.out << "  no fold reached";
        c.out << "\n";
    }
};

// ---------------------------------------------------------------- crit

struct CritCmd {
    ParamOptions params;
    std::string out;
    void add(CLI::App* app) {
        params.add(app);
        app->add_option("--out", out, "CSV output file");
    }
    void run(Context& c) {
        const auto p = params.resolve(false);
        const auto cp = stationary::critical_point(p);
        if (!out.empty()) {
            c.header.extra.push_back(params_line(p));
            output::CsvWriter w(out, c.header, {"gamma_bar", "lambda", "a_crit", "a_crit_bisection", "a_r", "a_z"});
            w.row({number(p.scaled_gamma_bar()), number(p.aspect_ratio()), number(cp.scattering_ratio),
                   number(cp.bisection_ratio), number(cp.widths.a_r), number(cp.widths.a_z)});
        }
        c.out << "a_crit/a_d = " << fmt(cp.scattering_ratio) << "  (N^2 gamma_bar = " << fmt(p.scaled_gamma_bar(), 6)
              << ", lambda = " << fmt(p.aspect_ratio(), 6) << ")\n";
    }
};

// ---------------------------------------------------------------- crit-map

struct CritMapCmd {
    stationary::ThresholdGrid grid;
    bool linear_gamma = false, linear_lambda = false, contact_only = false;
    int workers = 0;
    std::string out;
    void add(CLI::App* app) {
        app->add_option("--gbar-lo", grid.gamma_lo, "smallest N^2 gamma_bar")->capture_default_str();
        app->add_option("--gbar-hi", grid.gamma_hi, "largest N^2 gamma_bar")->capture_default_str();
        app->add_option("--n-gbar", grid.n_gamma, "grid points in N^2 gamma_bar")->capture_default_str();
        app->add_option("--lambda-lo", grid.lambda_lo, "smallest aspect ratio")->capture_default_str();
        app->add_option("--lambda-hi", grid.lambda_hi, "largest aspect ratio")->capture_default_str();
        app->add_option("--n-lambda", grid.n_lambda, "grid points in lambda")->capture_default_str();
        app->add_flag("--linear-gbar", linear_gamma, "linear instead of logarithmic spacing");
        app->add_flag("--linear-lambda", linear_lambda, "linear instead of logarithmic spacing");
        app->add_flag("--contact-only", contact_only, "switch the dipolar term off");
        app->add_option("--workers", workers, "worker threads (default: DBEC_WORKERS or all cores)");
        app->add_option("--out", out, "CSV output file");
    }
    void run(Context& c) {
        grid.log_gamma = !linear_gamma;
        grid.log_lambda = !linear_lambda;
        grid.dipole_coupling = contact_only ? 0.0 : 1.0;
        try {
            grid.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (workers < 0) throw ConfigError("--workers must be >= 0");
        const unsigned w = workers > 0 ? static_cast<unsigned>(workers) : env_workers();
        const auto cells = stationary::threshold_map(grid, w);
        std::size_t failed = 0;
        for (const auto& cell : cells)
            if (!cell.a_crit) {
                ++failed;
                c.err << "warning: no threshold at N^2 gamma_bar = " << fmt(cell.scaled_gamma_bar, 6)
                      << ", lambda = " << fmt(cell.aspect_ratio, 6) << ": " << cell.error << "\n";
            }
        if (!out.empty()) {
            output::CsvWriter wr(out, c.header, {"gamma_bar", "lambda", "a_crit", "error"});
            for (const auto& cell : cells)
                wr.row({number(cell.scaled_gamma_bar), number(cell.aspect_ratio),
                        cell.a_crit ? number(*cell.a_crit) : "nan", cell.a_crit ? "" : "\"" + cell.error + "\""});
        }
        c.out << "cells: " << cells.size() << "  solved: " << cells.size() - failed << "  failed: " << failed << "\n";
    }
};

// ---------------------------------------------------------------- ep-circle

struct EpCircleCmd {
    ParamOptions params;
    std::string center = "auto";
    double radius = 1e-3;
    exceptional::EncircleOptions opt;
    bool splitting = false;
    std::vector<double> radii{1e-5, 3e-5, 1e-4, 3e-4, 1e-3};
    std::string out;
    void add(CLI::App* app) {
        params.add(app);
        app->add_option("--center", center, "circle center a/a_d, or 'auto' for the critical point")->capture_default_str();
        app->add_option("--radius", radius, "circle radius")->capture_default_str();
        app->add_option("--n-steps", opt.n_steps, "steps per turn")->capture_default_str();
        app->add_option("--turns", opt.turns, "number of turns")->capture_default_str();
        app->add_flag("--splitting", splitting, "also fit the splitting exponent around the center");
        app->add_option("--radii", radii, "radii for the splitting fit")->capture_default_str();
        app->add_option("--out", out, "CSV output file");
    }
    void run(Context& c) {
        const auto p = params.resolve(false);
        double a0;
        if (center == "auto") {
            a0 = stationary::critical_point(p).scattering_ratio;
        } else {
            try {
                std::size_t pos = 0;
                a0 = std::stod(center, &pos);
                if (pos != center.size()) throw std::invalid_argument(center);
            } catch (const std::exception&) {
                throw ConfigError("--center must be a number or 'auto'");
            }
        }
        if (!(radius > 0.0) || opt.n_steps < 16 || !(opt.turns > 0.0)) throw ConfigError("invalid circle options");
        const auto r = exceptional::encircle(p, a0, radius, opt);
        std::optional<exceptional::SplittingFit> fit;
        if (splitting) fit = exceptional::splitting_exponent(p, a0, radii);
        if (!out.empty()) {
            c.header.extra.push_back(params_line(p));
            c.header.extra.push_back("circle: center=" + number(a0) + " radius=" + number(radius) +
                                     " n_steps=" + std::to_string(r.n_steps) + " turns=" + number(r.turns) +
                                     " permuted=" + (r.permuted ? "true" : "false"));
            if (fit) c.header.extra.push_back("splitting_exponent: " + number(fit->exponent));
            output::CsvWriter w(out, c.header,
                                {"phi", "re_a", "im_a", "re_a_r_1", "im_a_r_1", "re_a_z_1", "im_a_z_1", "re_mu_1", "im_mu_1",
                                 "re_a_r_2", "im_a_r_2", "re_a_z_2", "im_a_z_2", "re_mu_2", "im_mu_2"});
            for (const auto& s : r.samples) {
                std::vector<std::string> row{number(s.phi), number(s.scattering.real()), number(s.scattering.imag())};
                for (const auto& st : s.states) {
                    for (double v : {st.widths.a_r.real(), st.widths.a_r.imag(), st.widths.a_z.real(),
                                     st.widths.a_z.imag(), st.chem_potential.real(), st.chem_potential.imag()})
                        row.push_back(number(v));
                }
                w.row(row);
            }
        }
        c.out << "permuted: " << (r.permuted ? "true" : "false") << "  center = " << fmt(a0) << "  radius = " << fmt(radius)
              << "  n_steps = " << r.n_steps;
        if (fit) c.out << "  splitting exponent = " << fmt(fit->exponent, 6);
        c.out << "\n";
    }
};

// ---------------------------------------------------------------- stability

struct StabilityCmd {
    ParamOptions params;
    std::string branch = "both";
    std::string out;
    void add(CLI::App* app) {
        params.add(app);
        app->add_option("--branch", branch, "ground, excited or both")
            ->check(CLI::IsMember({"ground", "excited", "both"}))
            ->capture_default_str();
        app->add_option("--out", out, "CSV output file");
    }
    void run(Context& c) {
        const auto p = params.resolve(true);
        std::vector<std::pair<std::string, StationaryState>> states;
        if (branch != "excited") states.emplace_back("ground", stationary::ground_state(p));
        if (branch != "ground") states.emplace_back("excited", stationary::excited_state(p));
        std::vector<std::pair<std::string, StabilitySpectrum>> spectra;
        for (const auto& [name, s] : states) spectra.emplace_back(name, dynamics::linearize(s, p));
        if (!out.empty()) {
            c.header.extra.push_back(params_line(p));
            output::CsvWriter w(out, c.header, {"branch", "re_kappa", "im_kappa", "classification"});
            for (const auto& [name, sp] : spectra)
                for (const auto& k : sp.eigenvalues)
                    w.row({name, number(k.real()), number(k.imag()), to_string(sp.classification)});
        }
        bool first = true;
        for (const auto& [name, sp] : spectra) {
            double re = 0.0, im = 0.0;
            for (const auto& k : sp.eigenvalues) {
                re = std::max(re, k.real());
                im = std::max(im, k.imag());
            }
            c.out << (first ? "" : "  ") << name << ": " << to_string(sp.classification)
                  << " (max Re kappa = " << fmt(re, 6) << ", max Im kappa = " << fmt(im, 6) << ")";
            first = false;
        }
        c.out << "\n";
    }
};

// ---------------------------------------------------------------- evolve

struct EvolveCmd {
    ParamOptions params;
    std::string from = "ground";
    std::optional<double> re_ar, im_ar, re_az, im_az;
    double scale_ar = 1.0, scale_az = 1.0, kick = 0.0;
    double t_end = 0.0;
    dynamics::EvolveOptions opt;
    double symplectic_dt = 0.0;
    std::string out;
    void add(CLI::App* app) {
        params.add(app);
        app->add_option("--from", from, "start state: ground or excited")
            ->check(CLI::IsMember({"ground", "excited"}))
            ->capture_default_str();
        app->add_option("--re-ar", re_ar, "override Re a_r of the start state");
        app->add_option("--im-ar", im_ar, "override Im a_r");
        app->add_option("--re-az", re_az, "override Re a_z");
        app->add_option("--im-az", im_az, "override Im a_z");
        app->add_option("--scale-ar", scale_ar, "multiply Re a_r")->capture_default_str();
        app->add_option("--scale-az", scale_az, "multiply Re a_z")->capture_default_str();
        app->add_option("--kick", kick, "displacement along the unstable mode of the excited state, relative to Re a_r")
            ->capture_default_str();
        app->add_option("--t-end", t_end, "integration time")->required();
        app->add_option("--rtol", opt.rtol, "relative tolerance")->capture_default_str();
        app->add_option("--atol", opt.atol, "absolute tolerance")->capture_default_str();
        app->add_option("--cap", opt.collapse_cap, "collapse cap on Re a")->capture_default_str();
        app->add_option("--max-drift", opt.max_energy_drift, "abort above this relative energy drift")->capture_default_str();
        app->add_option("--sample", opt.sample_interval, "output interval (0: every step)")->capture_default_str();
        app->add_option("--symplectic-dt", symplectic_dt, "use the fixed-step symplectic integrator with this step")
            ->capture_default_str();
        app->add_option("--out", out, "CSV output file");
    }
    void run(Context& c) {
        const auto p = params.resolve(true);
        if (!(t_end > 0.0)) throw ConfigError("--t-end must be positive");
        if (!(opt.rtol > 0.0) || !(opt.atol > 0.0) || !(opt.collapse_cap > 0.0) || !(opt.max_energy_drift > 0.0) ||
            opt.sample_interval < 0.0 || symplectic_dt < 0.0)
            throw ConfigError("tolerances, cap and steps must be positive");
        const StationaryState st = from == "ground" ? stationary::ground_state(p) : stationary::excited_state(p);
        dynamics::State y{st.widths.a_r, 0.0, st.widths.a_z, 0.0};
        if (kick != 0.0) {
            if (from != "excited") throw ConfigError("--kick needs --from excited");
            const auto v = dynamics::unstable_direction(st, p);
            for (int i = 0; i < 4; ++i) y[i] += kick * st.widths.a_r * v[i];
        }
        y[0] = re_ar.value_or(y[0] * scale_ar);
        y[1] = im_ar.value_or(y[1]);
        y[2] = re_az.value_or(y[2] * scale_az);
        y[3] = im_az.value_or(y[3]);
        const auto s0 = ComplexWidthState::from_array(y);
        try {
            s0.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        Trajectory tr;
        if (symplectic_dt > 0.0) {
            const long every = opt.sample_interval > 0.0
                                   ? std::max(1L, static_cast<long>(std::llround(opt.sample_interval / symplectic_dt)))
                                   : 1L;
            tr = dynamics::evolve_symplectic(s0, p, t_end, symplectic_dt, every, opt.collapse_cap);
        } else {
            tr = dynamics::evolve(s0, p, t_end, opt);
        }
        if (!out.empty()) {
            c.header.extra.push_back(params_line(p));
            output::CsvWriter w(out, c.header, {"t", "re_a_r", "im_a_r", "re_a_z", "im_a_z", "energy"});
            for (std::size_t i = 0; i < tr.times.size(); ++i) {
                const auto& s = tr.states[i];
                w.row({number(tr.times[i]), number(s.a_r.real()), number(s.a_r.imag()), number(s.a_z.real()),
                       number(s.a_z.imag()), number(tr.energy_series[i])});
            }
            w.footer(std::string("outcome: ") + to_string(tr.outcome));
            w.footer("max_energy_drift: " + number(tr.max_energy_drift));
            w.footer("steps: " + std::to_string(tr.steps));
        }
        c.out << "outcome: " << to_string(tr.outcome) << "  t = " << fmt(tr.times.back()) << "  steps = " << tr.steps
              << "  max energy drift = " << fmt(tr.max_energy_drift, 3) << "\n";
    }
};

// ---------------------------------------------------------------- poincare

struct PoincareCmd {
    ParamOptions params;
    std::vector<double> energies, factors;
    int n = 40;
    std::string mode = "random";
    std::uint64_t rng_seed = 1;
    std::vector<double> box;
    int orbit_seeds = 0;
    std::string direction = "upward";
    SectionOptions opt;
    int workers = 0;
    std::string out;
    void add(CLI::App* app) {
        params.add(app);
        auto* e = app->add_option("--energy", energies, "section energies (scaled), ascending");
        app->add_option("--factor", factors, "section energies as multiples of E_gs, ascending")->excludes(e);
        app->add_option("--n", n, "seeds per panel")->capture_default_str();
        app->add_option("--mode", mode, "seeding: random or line")
            ->check(CLI::IsMember({"random", "line"}))
            ->capture_default_str();
        app->add_option("--rng-seed", rng_seed, "seed of the seeding generator")->capture_default_str();
        app->add_option("--box", box, "seeding box: re_lo re_hi im_lo im_hi")->expected(4);
        app->add_option("--orbit-seeds", orbit_seeds, "extra seeds next to the continued section fixed point")
            ->capture_default_str();
        app->add_option("--crossings", opt.target_crossings, "crossings per trajectory")->capture_default_str();
        app->add_option("--t-end", opt.t_end, "time limit per trajectory (0: automatic)")->capture_default_str();
        app->add_option("--direction", direction, "upward or downward")
            ->check(CLI::IsMember({"upward", "downward"}))
            ->capture_default_str();
        app->add_option("--rtol", opt.rtol, "relative tolerance")->capture_default_str();
        app->add_option("--atol", opt.atol, "absolute tolerance")->capture_default_str();
        app->add_option("--cap", opt.collapse_cap, "collapse cap on Re a")->capture_default_str();
        app->add_option("--workers", workers, "worker threads (default: DBEC_WORKERS or all cores)");
        app->add_option("--out", out, "CSV output file; panel metadata goes to <out>.json");
    }
    void run(Context& c) {
        const auto p = params.resolve(true);
        if (n < 1 || opt.target_crossings < 1 || orbit_seeds < 0 || workers < 0) throw ConfigError("counts must be positive");
        if (!(opt.rtol > 0.0) || !(opt.atol > 0.0) || !(opt.collapse_cap > 0.0) || opt.t_end < 0.0)
            throw ConfigError("tolerances and limits must be positive");
        opt.direction = direction == "upward" ? Crossing::upward : Crossing::downward;
        opt.workers = static_cast<int>(workers > 0 ? static_cast<unsigned>(workers) : env_workers());
        const double e_gs = stationary::ground_state(p).energy;
        std::vector<double> es = energies;
        if (es.empty()) {
            const auto f = factors.empty() ? poincare::default_panel_factors() : factors;
            for (double x : f) es.push_back(x * e_gs);
        }
        for (std::size_t i = 1; i < es.size(); ++i)
            if (!(es[i] > es[i - 1])) throw ConfigError("energies must be ascending");
        SeedOptions so;
        so.mode = mode == "random" ? SeedMode::random : SeedMode::line;
        so.rng_seed = rng_seed;
        if (!box.empty()) so.box = SeedBox{box[0], box[1], box[2], box[3]};

        nlohmann::json panels = nlohmann::json::array();
        std::unique_ptr<output::CsvWriter> w;
        if (!out.empty()) {
            c.header.extra.push_back(params_line(p));
            c.header.extra.push_back(std::string("crossing: Im a_z = 0, direction ") + to_string(opt.direction));
            w = std::make_unique<output::CsvWriter>(out, c.header, std::vector<std::string>{"panel", "trajectory_id", "crossing_time", "re_a_r", "im_a_r"});
        }
        std::size_t total_points = 0, total_traj = 0, total_collapsed = 0;
        for (std::size_t k = 0; k < es.size(); ++k) {
            auto seeding = poincare::seed_initial_states(es[k], p, n, so);
            if (orbit_seeds > 0 && es[k] > e_gs * (1.0 + 1e-9) && !seeding.seeds.empty()) {
                const auto po = poincare::continue_periodic_orbit(p, es[k], 40, opt).back();
                for (int j = 0; j < orbit_seeds; ++j) {
                    const double re = po.re_a_r + (j + 1) * 1e-3 * (seeding.box.re_hi - seeding.box.re_lo);
                    if (const auto az = poincare::solve_re_a_z(es[k], p, re, po.im_a_r, opt.direction))
                        seeding.seeds.push_back({{re, po.im_a_r}, {*az, 0.0}});
                }
            }
            SectionDataset ds;
            ds.energy = es[k];
            ds.direction = opt.direction;
            if (!seeding.seeds.empty()) ds = poincare::surface_of_section(seeding.seeds, p, opt);
            if (!seeding.explanation.empty()) c.err << "panel " << k + 1 << ": " << seeding.explanation << "\n";
            if (w)
                for (const auto& pt : ds.points)
                    w->row({std::to_string(k + 1), std::to_string(pt.trajectory_id), number(pt.crossing_time),
                            number(pt.re_a_r), number(pt.im_a_r)});
            nlohmann::json pj;
            pj["panel"] = k + 1;
            pj["energy"] = es[k];
            pj["energy_over_e_gs"] = es[k] / e_gs;
            pj["seeding_box"] = {seeding.box.re_lo, seeding.box.re_hi, seeding.box.im_lo, seeding.box.im_hi};
            pj["seeding_note"] = seeding.explanation;
            pj["points"] = ds.points.size();
            pj["bounded"] = ds.count(Outcome::bounded);
            pj["collapsed"] = ds.count(Outcome::collapsed);
            pj["escaped"] = ds.count(Outcome::escaped);
            nlohmann::json tj = nlohmann::json::array();
            for (const auto& t : ds.trajectories) {
                tj.push_back({{"id", t.id},
                              {"seed", {t.seed.a_r.real(), t.seed.a_r.imag(), t.seed.a_z.real(), t.seed.a_z.imag()}},
                              {"outcome", to_string(t.outcome)},
                              {"crossings", t.crossings},
                              {"end_time", t.end_time},
                              {"max_energy_drift", t.max_energy_drift},
                              {"note", t.note}});
            }
            pj["trajectories"] = tj;
            panels.push_back(pj);
            total_points += ds.points.size();
            total_traj += ds.trajectories.size();
            total_collapsed += ds.count(Outcome::collapsed);
        }
        if (!out.empty()) {
            auto j = output::header_json(c.header);
            j["crossing_plane"] = "Im a_z = 0";
            j["crossing_direction"] = to_string(opt.direction);
            j["e_gs"] = e_gs;
            j["panels"] = panels;
            output::write_json(out + ".json", j);
        }
        c.out << "panels: " << es.size() << "  trajectories: " << total_traj << "  points: " << total_points
              << "  collapsed: " << total_collapsed << "\n";
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gaussian variational toolkit for dipolar condensates", "dbec"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI configuration file; command-line flags take precedence");
    app.set_version_flag("--version", output::version());

    UnitsCmd units;
    StationaryCmd stat;
    BranchesCmd branches;
    CritCmd crit;
    CritMapCmd crit_map;
    EpCircleCmd ep;
    StabilityCmd stab;
    EvolveCmd evolve;
    PoincareCmd poinc;
    std::vector<std::pair<CLI::App*, std::function<void(Context&)>>> commands;
    auto reg = [&](const char* name, const char* help, auto& cmd) {
        CLI::App* sub = app.add_subcommand(name, help);
        cmd.add(sub);
        commands.emplace_back(sub, [&cmd](Context& c) { cmd.run(c); });
    };
    reg("units", "dipole units and scaled trap parameters", units);
    reg("stationary", "ground and excited stationary states", stat);
    reg("branches", "both stationary branches by continuation", branches);
    reg("crit", "critical scattering length", crit);
    reg("crit-map", "threshold over a (N^2 gamma_bar, lambda) grid", crit_map);
    reg("ep-circle", "follow both states around a circle in complex a", ep);
    reg("stability", "linear stability eigenvalues", stab);
    reg("evolve", "time evolution of the complex widths", evolve);
    reg("poincare", "Poincare surfaces of section", poinc);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::Success& e) {
        app.exit(e, out, err);
        return Exit::ok;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return Exit::usage;
    }
    for (auto& [sub, fn] : commands) {
        if (!sub->parsed()) continue;
        Context c{out, err, {sub->get_name(), join_args(args), resolved_config(sub), {}}};
        try {
            fn(c);
            return Exit::ok;
        } catch (const ConfigError& e) {
            err << "config error: " << e.what() << "\n";
            return Exit::usage;
        } catch (const std::invalid_argument& e) {
            err << "config error: " << e.what() << "\n";
            return Exit::usage;
        } catch (const std::exception& e) {
            err << "numerical failure: " << e.what() << "\n";
            return Exit::numerical;
        }
    }
    return Exit::usage;
}

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace dbec::cli
