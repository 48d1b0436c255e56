#include <cmath>
#include <random>
#include <stdexcept>

#include "dbec/dynamics.hpp"
#include "doctest.h"

using namespace dbec;
using namespace dbec::dynamics;

namespace {

const TrapParams kKoch = TrapParams::from_mean(3.4e4, 6.0, 0.1);

const StationaryState& ground() {
    static const StationaryState s = stationary::ground_state(kKoch);
    return s;
}

const StationaryState& excited() {
    static const StationaryState s = stationary::excited_state(kKoch);
    return s;
}

State at_rest(const StationaryState& s) { return {s.widths.a_r, 0.0, s.widths.a_z, 0.0}; }

// Central differences of the right-hand side with one Richardson step.
Eigen::Matrix4d fd_jacobian(const State& y, const TrapParams& p) {
    Eigen::Matrix4d j;
    const double scale = std::max(std::abs(y[0]), std::abs(y[2]));
    for (int c = 0; c < 4; ++c) {
        auto column = [&](double h) {
            State yp = y, ym = y;
            yp[c] += h;
            ym[c] -= h;
            const State fp = equations_of_motion(yp, p), fm = equations_of_motion(ym, p);
            Eigen::Vector4d d;
            for (int r = 0; r < 4; ++r) d(r) = (fp[r] - fm[r]) / (2.0 * h);
            return d;
        };
        const double h = 1e-3 * scale;
        j.col(c) = (4.0 * column(h / 2.0) - column(h)) / 3.0;
    }
    return j;
}

// Frequency from upward zero crossings of x(t) - mean, linear interpolation.
double crossing_frequency(const std::vector<double>& t, const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> up;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double a = x[i - 1] - mean, b = x[i] - mean;
        if (a < 0.0 && b >= 0.0) up.push_back(t[i - 1] + (t[i] - t[i - 1]) * (-a) / (b - a));
    }
    REQUIRE(up.size() >= 3);
    return 2.0 * 3.14159265358979323846 * static_cast<double>(up.size() - 1) /
           (up.back() - up.front());
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("stationary states are fixed points of the flow") {
    for (double a : {0.1, 0.03, -0.01}) {
        const auto p = kKoch.with_scattering(a);
        for (const auto& s : {stationary::ground_state(p), stationary::excited_state(p)})
            CHECK(flow_residual(at_rest(s), p) <= 1e-9);
    }
    const auto p = TrapParams::from_mean(1e4, 0.1, 0.15);
    CHECK(flow_residual(at_rest(stationary::ground_state(p)), p) <= 1e-9);
}

TEST_CASE("energy_of_state reduces to the real functional and is minimal at zero momenta") {
    const auto& g = ground();
    const double real = meanfield::mean_field_energy(g.widths, kKoch).total;
    CHECK(energy_of_state(ComplexWidthState::from_real(g.widths), kKoch) == real);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        const ComplexWidthState s{{g.widths.a_r, 1e3 * u(rng)}, {g.widths.a_z, 1e3 * u(rng)}};
        CHECK(energy_of_state(s, kKoch) > real);
    }
}

TEST_CASE("analytic Jacobian matches finite differences") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.5, 2.0), v(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const State y{ground().widths.a_r * u(rng), 2e3 * v(rng), ground().widths.a_z * u(rng),
                      2e3 * v(rng)};
        const Eigen::Matrix4d a = jacobian(y, kKoch), f = fd_jacobian(y, kKoch);
        CHECK((a - f).norm() <= 1e-7 * a.norm());
    }
}

TEST_CASE("ground state is dynamically stable, excited state is not") {
    const auto sg = linearize(ground(), kKoch);
    CHECK(sg.classification == Dynamical::stable);
    for (const auto& k : sg.eigenvalues) {
        CHECK(std::abs(k.real()) <= 1e-8);
        CHECK(std::abs(k.imag()) > 0.0);
    }
    const auto se = linearize(excited(), kKoch);
    CHECK(se.classification == Dynamical::unstable);
    int positive = 0;
    for (const auto& k : se.eigenvalues)
        if (k.real() > 0.0 && std::abs(k.imag()) <= 1e-8 * std::abs(k)) ++positive;
    CHECK(positive == 1);
}

TEST_CASE("spectrum is closed under negation and conjugation") {
    for (const auto* s : {&ground(), &excited()}) {
        const auto sp = linearize(*s, kKoch);
        for (const auto& k : sp.eigenvalues) {
            for (const auto& target : {-k, std::conj(k), -std::conj(k)}) {
                double best = 1e300;
                for (const auto& m : sp.eigenvalues) best = std::min(best, std::abs(m - target));
                CHECK(best <= 1e-8);
            }
        }
        // agrees with a general eigensolver on the full 4x4 Jacobian
        Eigen::EigenSolver<Eigen::Matrix4d> es(jacobian(at_rest(*s), kKoch));
        for (int i = 0; i < 4; ++i) {
            const std::complex<double> ref = es.eigenvalues()(i);
            double best = 1e300;
            for (const auto& m : sp.eigenvalues) best = std::min(best, std::abs(m - ref));
            CHECK(best <= 1e-9 * std::abs(ref));
        }
    }
}

TEST_CASE("non-interacting breathing at twice the trap frequency") {
    TrapParams p;
    p.scaled_gamma_r = p.scaled_gamma_z = 50.0;
    p.dipole_coupling = 0.0;
    // omega = 2 gamma in dipole units, breathing at 2 omega = 4 gamma
    const double expected = 4.0 * 50.0;
    const StationaryState st = stationary::ground_state(p);
    const auto sp = linearize(st, p);
    for (const auto& k : sp.eigenvalues) CHECK(std::abs(k.imag()) == doctest::Approx(expected).epsilon(1e-12));
    EvolveOptions opt;
    opt.sample_interval = 2e-4;
    const ComplexWidthState s0{{st.widths.a_r * 1.001, 0.0}, {st.widths.a_z, 0.0}};
    const auto tr = evolve(s0, p, 3.0, opt);
    std::vector<double> x;
    for (const auto& s : tr.states) x.push_back(s.a_r.real());
    CHECK(crossing_frequency(tr.times, x) == doctest::Approx(expected).epsilon(1e-3));
}

TEST_CASE("small oscillations of the ground state match the linearization") {
    const auto& g = ground();
    const Eigen::Matrix4d j = jacobian(at_rest(g), kKoch);
    Eigen::Matrix2d d, m;
    d << j(0, 1), j(0, 3), j(2, 1), j(2, 3);
    m << j(1, 0), j(1, 2), j(3, 0), j(3, 2);
    Eigen::EigenSolver<Eigen::Matrix2d> es(d * m);
    for (int mode = 0; mode < 2; ++mode) {
        const double mu = es.eigenvalues()(mode).real();
        REQUIRE(mu < 0.0);
        const double omega = std::sqrt(-mu);
        const Eigen::Vector2d v = es.eigenvectors().col(mode).real().normalized();
        const double delta = 1e-4 * g.widths.a_r;
        const ComplexWidthState s0{{g.widths.a_r + delta * v(0), 0.0},
                                   {g.widths.a_z + delta * v(1), 0.0}};
        EvolveOptions opt;
        const double period = 2.0 * 3.14159265358979323846 / omega;
        opt.sample_interval = period / 64.0;
        const auto tr = evolve(s0, kKoch, 200.0 * period, opt);
        std::vector<double> x;
        const bool use_r = std::abs(v(0)) > std::abs(v(1));
        for (const auto& s : tr.states) x.push_back(use_r ? s.a_r.real() : s.a_z.real());
        CHECK(crossing_frequency(tr.times, x) == doctest::Approx(omega).epsilon(1e-3));
        // the linearization frequency is one of the spectrum's
        const auto sp = linearize(g, kKoch);
        double best = 1e300;
        for (const auto& k : sp.eigenvalues) best = std::min(best, std::abs(std::abs(k.imag()) - omega));
        CHECK(best <= 1e-9 * omega);
    }
}

TEST_CASE("starting at the ground state stays there") {
    const auto tr = evolve(ComplexWidthState::from_real(ground().widths), kKoch, 0.01);
    CHECK(tr.outcome == Outcome::bounded);
    for (const auto& s : tr.states) {
        CHECK(std::abs(s.a_r.real() - ground().widths.a_r) <= 1e-9 * ground().widths.a_r);
        CHECK(std::abs(s.a_z.real() - ground().widths.a_z) <= 1e-9 * ground().widths.a_z);
    }
}

TEST_CASE("energy is conserved along random bounded trajectories") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto& g = ground();
    const double omega_min = 6.0e4;  // lowest ground-state mode is ~6.17e4
    const double t_end = 1e3 / omega_min;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const ComplexWidthState s0{{g.widths.a_r * (1.0 + 0.2 * u(rng)), 0.1 * g.widths.a_r * u(rng)},
                                   {g.widths.a_z * (1.0 + 0.2 * u(rng)), 0.1 * g.widths.a_z * u(rng)}};
        // below the saddle energy so the motion is bound
        if (energy_of_state(s0, kKoch) >= excited().energy) continue;
        const auto tr = evolve(s0, kKoch, t_end);
        CHECK(tr.outcome == Outcome::bounded);
        worst = std::max(worst, tr.max_energy_drift);
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("time reversal returns to the start") {
    // t -> -t maps a -> conj(a), so going back is a forward run from the conjugate
    const auto& g = ground();
    const ComplexWidthState s0{{g.widths.a_r * 1.15, 300.0}, {g.widths.a_z * 0.9, -200.0}};
    const double t = 2e-3;
    const auto fwd = evolve(s0, kKoch, t);
    const auto& mid = fwd.states.back();
    const auto back = evolve({std::conj(mid.a_r), std::conj(mid.a_z)}, kKoch, t);
    const auto& end = back.states.back();
    CHECK(std::abs(std::conj(end.a_r) - s0.a_r) <= 1e-6 * s0.a_r.real());
    CHECK(std::abs(std::conj(end.a_z) - s0.a_z) <= 1e-6 * s0.a_z.real());
}

TEST_CASE("the saddle collapses along its unstable manifold") {
    const auto v = unstable_direction(excited(), kKoch);
    CHECK(v[0] + v[2] > 0.0);
    State y = at_rest(excited());
    const double eps = 1e-4 * excited().widths.a_r;
    State in = y, out = y;
    for (int i = 0; i < 4; ++i) {
        in[i] += eps * v[i];
        out[i] -= eps * v[i];
    }
    const auto tr = evolve(ComplexWidthState::from_array(in), kKoch, 0.01);
    CHECK(tr.outcome == Outcome::collapsed);
    CHECK(tr.times.back() < 0.01);
    CHECK(std::max(tr.states.back().a_r.real(), tr.states.back().a_z.real()) > 1e8);
    // widths grow monotonically on the way out
    for (std::size_t i = tr.states.size() / 2; i < tr.states.size(); ++i)
        CHECK(tr.states[i].a_r.real() >= tr.states[i - 1].a_r.real());
    // the opposite side falls back towards the ground state basin
    const auto tr2 = evolve(ComplexWidthState::from_array(out), kKoch, 0.005);
    CHECK(tr2.outcome == Outcome::bounded);
    CHECK_THROWS_AS(unstable_direction(ground(), kKoch), DynamicsError);
}

TEST_CASE("symplectic integration agrees with the adaptive integrator") {
    const auto& g = ground();
    const ComplexWidthState s0{{g.widths.a_r * 1.3, 100.0}, {g.widths.a_z * 0.8, 0.0}};
    const auto c = to_canonical(s0);
    const auto back = from_canonical(c);
    CHECK(std::abs(back.a_r - s0.a_r) <= 1e-12 * std::abs(s0.a_r));
    CHECK(std::abs(back.a_z - s0.a_z) <= 1e-12 * std::abs(s0.a_z));
    const double t = 1e-3;
    const auto sy = evolve_symplectic(s0, kKoch, t, 2e-8, 1000);
    const auto rk = evolve(s0, kKoch, t);
    CHECK(sy.times.back() == doctest::Approx(t));
    const auto& a = sy.states.back();
    const auto& b = rk.states.back();
    CHECK(std::abs(a.a_r - b.a_r) <= 1e-6 * std::abs(b.a_r));
    CHECK(std::abs(a.a_z - b.a_z) <= 1e-6 * std::abs(b.a_z));
    CHECK(sy.max_energy_drift <= 1e-9);
}

TEST_CASE("sampled output and trajectory bookkeeping") {
    const auto& g = ground();
    const ComplexWidthState s0{{g.widths.a_r * 1.1, 0.0}, {g.widths.a_z, 0.0}};
    EvolveOptions opt;
    opt.sample_interval = 1e-5;
    const auto tr = evolve(s0, kKoch, 1e-3, opt);
    CHECK(tr.times.size() == tr.states.size());
    CHECK(tr.times.size() == tr.energy_series.size());
    CHECK(tr.times.size() >= 100);
    for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.times[i] > tr.times[i - 1]);
    CHECK(tr.times.back() == 1e-3);
    // dense samples lie on the same solution as the step endpoints
    const auto ref = evolve(s0, kKoch, 5e-4);
    const auto& mid = tr.states[50];
    CHECK(tr.times[50] == doctest::Approx(5e-4).epsilon(1e-9));
    CHECK(std::abs(mid.a_r - ref.states.back().a_r) <= 1e-8 * g.widths.a_r);
}

TEST_CASE("errors and early termination") {
    const auto s0 = ComplexWidthState::from_real(ground().widths);
    CHECK_THROWS_AS(evolve(s0, kKoch, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(evolve({{-1.0, 0.0}, {1.0, 0.0}}, kKoch, 1.0), std::invalid_argument);
    const ComplexWidthState moving{{ground().widths.a_r * 1.2, 0.0}, {ground().widths.a_z, 0.0}};
    EvolveOptions strict;
    strict.max_energy_drift = 1e-18;
    strict.rtol = strict.atol = 1e-6;
    CHECK_THROWS_AS(evolve(moving, kKoch, 1e-3, strict), DynamicsError);
    EvolveOptions short_budget;
    short_budget.max_steps = 10;
    CHECK(evolve(moving, kKoch, 1e-2, short_budget).outcome == Outcome::escaped);
}

}
