#include <cmath>
#include <random>
#include <stdexcept>

#include "dbec/stationary.hpp"
#include "dbec/units.hpp"
#include "doctest.h"

using namespace dbec;
using namespace dbec::stationary;

namespace {

const TrapParams kKoch = TrapParams::from_mean(3.4e4, 6.0, 0.1);

double scaled_residual(const StationaryState& s, const TrapParams& p) {
    const auto g = meanfield::energy_gradient(s.widths, p);
    const double scale = std::max(p.scaled_gamma_bar(), 2.0 * s.widths.a_r + s.widths.a_z);
    return std::hypot(s.widths.a_r * g(0), s.widths.a_z * g(1)) / scale;
}

Eigen::Vector2d hessian_eigenvalues(const StationaryState& s, const TrapParams& p) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(meanfield::energy_hessian(s.widths, p));
    return eig.eigenvalues();
}

// Contact-only, isotropic trap: with E(A) = 3A + 3 g^2 / (4A) + (4/sqrt(pi)) a A^{3/2}
// the conditions E' = E'' = 0 give A = (sqrt(5)/2) g and
// a_crit sqrt(g) = -(sqrt(pi)/2) (2/sqrt(5))^{5/2}.
double contact_only_threshold(double gamma) {
    const double pi = 3.14159265358979323846;
    return -(std::sqrt(pi) / 2.0) * std::pow(2.0 / std::sqrt(5.0), 2.5) / std::sqrt(gamma);
}

}  // namespace

TEST_SUITE("stationary") {

TEST_CASE("non-interacting trap: every guess converges to the oscillator widths") {
    TrapParams p;
    p.scaled_gamma_r = 5.0;
    p.scaled_gamma_z = 5.0;
    p.dipole_coupling = 0.0;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lw(-3.0, 3.0);
    for (int i = 0; i < 50; ++i) {
        const WidthVector guess{std::pow(10.0, lw(rng)), std::pow(10.0, lw(rng))};
        const auto s = find_stationary(p, guess);
        CHECK(s.widths.a_r == doctest::Approx(2.5).epsilon(1e-9));
        CHECK(s.widths.a_z == doctest::Approx(2.5).epsilon(1e-9));
        CHECK(s.branch == Branch::ground);
    }
}

TEST_CASE("chromium trap at a = 0.1: ground and excited states") {
    const auto gs = ground_state(kKoch);
    const auto es = excited_state(kKoch);
    CHECK(gs.branch == Branch::ground);
    CHECK(gs.stability == Stability::stable);
    CHECK(es.branch == Branch::excited);
    CHECK(es.stability == Stability::unstable);
    CHECK(gs.energy == doctest::Approx(4.24e5).epsilon(0.01));
    CHECK(es.energy == doctest::Approx(6.24e5).epsilon(0.01));
    CHECK(es.energy / gs.energy == doctest::Approx(6.24 / 4.24).epsilon(0.01));
    CHECK(gs.energy <= es.energy);
    // the excited state is the narrow, near-collapse one
    CHECK(es.widths.a_r * std::sqrt(es.widths.a_z) > gs.widths.a_r * std::sqrt(gs.widths.a_z));
    for (const auto* s : {&gs, &es}) {
        CHECK(scaled_residual(*s, kKoch) <= 1e-10);
        const auto g = meanfield::energy_gradient(s->widths, kKoch);
        CHECK(std::abs(g(0)) <= 1e-9);
        CHECK(std::abs(g(1)) <= 1e-9);
    }
    const auto eg = hessian_eigenvalues(gs, kKoch);
    const auto ee = hessian_eigenvalues(es, kKoch);
    CHECK(eg(0) > 0.0);
    CHECK(eg(1) > 0.0);
    CHECK(ee(0) * ee(1) < 0.0);
}

TEST_CASE("guesses from both sides reach the two different states") {
    const auto wide = find_stationary(kKoch, WidthVector{1000.0, 20000.0});
    const auto narrow = find_stationary(kKoch, WidthVector{25000.0, 10000.0});
    CHECK(wide.branch == Branch::ground);
    CHECK(narrow.branch == Branch::excited);
}

TEST_CASE("below the threshold no stationary state exists") {
    const auto p = kKoch.with_scattering(-0.03);
    CHECK_THROWS_AS(ground_state(p), NoStationaryState);
    CHECK_THROWS_AS(excited_state(p), NoStationaryState);
    CHECK_THROWS_AS(find_stationary(p, WidthVector{1426.75, 24942.4}), NoStationaryState);
    CHECK_THROWS_AS(find_stationary(p, WidthVector{20403.1, 8851.0}), NoStationaryState);
}

TEST_CASE("critical scattering length of the chromium trap") {
    const auto cp = critical_point(kKoch);
    CHECK(std::abs(cp.scattering_ratio - (-0.01929)) <= 2e-4);
    CHECK(std::abs(cp.scattering_ratio - cp.bisection_ratio) <= 1e-6);
    CHECK(critical_scattering_length(3.4e4, 6.0) == cp.scattering_ratio);
    // just above the fold both states exist, just below none
    CHECK_NOTHROW(ground_state(kKoch.with_scattering(cp.scattering_ratio + 1e-5)));
    CHECK_THROWS_AS(ground_state(kKoch.with_scattering(cp.scattering_ratio - 1e-5)),
                    NoStationaryState);
    // Hessian singular at the fold widths
    StationaryState f;
    f.widths = cp.widths;
    classify(f, kKoch.with_scattering(cp.scattering_ratio));
    CHECK(f.branch == Branch::fold);
}

TEST_CASE("threshold tends to 1/6 for elongated traps and large gamma_bar") {
    double prev = -1.0;
    for (double lg = 2.0; lg <= 6.0; lg += 0.5) {
        const double a = critical_scattering_length(std::pow(10.0, lg), 0.1);
        CHECK(a > prev);
        CHECK(a < 1.0 / 6.0);
        prev = a;
    }
    CHECK(1.0 / 6.0 - prev <= 0.01);
}

TEST_CASE("contact-dominated limit matches the contact-only threshold") {
    double prev_gap = 1e300;
    for (double g : {1.0, 0.1, 0.01, 1e-3}) {
        TrapParams p = TrapParams::from_mean(g, 1.0);
        const double with_dipoles = critical_point(p).scattering_ratio;
        p.dipole_coupling = 0.0;
        const double contact = critical_point(p).scattering_ratio;
        CHECK(contact == doctest::Approx(contact_only_threshold(g)).epsilon(1e-9));
        const double gap = std::abs(with_dipoles - contact) / std::abs(contact);
        CHECK(gap < prev_gap);
        prev_gap = gap;
    }
    CHECK(prev_gap < 1e-3);
}

TEST_CASE("dipolar corrections at a = 0 vanish with gamma_bar") {
    // perturbatively the width shift scales as sqrt(gamma) relative to gamma / 2
    auto shift = [](double g) {
        const auto p = TrapParams::from_mean(g, 2.0, 0.0);
        const auto s = ground_state(p);
        return std::abs(s.widths.a_r / (p.scaled_gamma_r / 2.0) - 1.0);
    };
    const double s1 = shift(1e-4), s2 = shift(1e-6);
    const double slope = std::log10(s1 / s2) / 2.0;
    CHECK(slope == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("branches for lambda = 1.2 meet tangentially") {
    const auto p = TrapParams::from_mean(3.4e4, 1.2);
    const auto [ground, excited] = trace_branches(p, 0.15, 0.166);
    REQUIRE(ground.fold.has_value());
    const double a_crit = critical_point(p).scattering_ratio;
    CHECK(ground.fold->scattering_ratio == doctest::Approx(a_crit).epsilon(1e-9));
    REQUIRE(ground.samples.size() > 5);
    REQUIRE(excited.samples.size() > 5);
    for (const auto* c : {&ground, &excited}) {
        for (std::size_t i = 1; i < c->samples.size(); ++i) CHECK(c->samples[i] > c->samples[i - 1]);
        CHECK(c->samples.front() >= a_crit - 1e-9);
    }
    for (std::size_t i = 0; i < ground.states.size(); ++i) {
        const auto& s = ground.states[i];
        const auto q = p.with_scattering(ground.samples[i]);
        CHECK(scaled_residual(s, q) <= 1e-10);
        if (s.branch == Branch::fold) continue;
        CHECK(s.branch == Branch::ground);
        const auto ev = hessian_eigenvalues(s, q);
        CHECK(ev.minCoeff() > 0.0);
    }
    for (std::size_t i = 0; i < excited.states.size(); ++i) {
        const auto& s = excited.states[i];
        if (s.branch == Branch::fold) continue;
        CHECK(s.branch == Branch::excited);
        const auto ev = hessian_eigenvalues(s, p.with_scattering(excited.samples[i]));
        CHECK(ev(0) * ev(1) < 0.0);
    }
    // excited chemical potential diverges (towards negative values) as a -> 1/6
    CHECK(excited.samples.back() > 0.166);
    const double mu_top = excited.states.back().chem_potential;
    const double mu_ground = ground.states.back().chem_potential;
    CHECK(mu_top < 0.0);
    CHECK(std::abs(mu_top) > 100.0 * std::abs(mu_ground));
    double prev_mu = 0.0;
    for (std::size_t i = 0; i < excited.states.size(); ++i) {
        if (excited.samples[i] < 0.155) continue;
        CHECK(excited.states[i].chem_potential < prev_mu);
        prev_mu = excited.states[i].chem_potential;
    }
}

TEST_CASE("ground and excited widths merge monotonically at the fold") {
    const auto cp = critical_point(kKoch);
    const auto g_far = ground_state(kKoch.with_scattering(cp.scattering_ratio + 0.05));
    const auto e_far = excited_state(kKoch.with_scattering(cp.scattering_ratio + 0.05));
    WidthVector wg = g_far.widths, we = e_far.widths;
    double prev = 1e300;
    for (int k = 0; k < 10; ++k) {
        const double a = cp.scattering_ratio + 0.05 * std::pow(0.3, k + 1);
        const auto q = kKoch.with_scattering(a);
        const auto g = find_stationary(q, wg);
        const auto e = find_stationary(q, we);
        CHECK(g.branch == Branch::ground);
        CHECK(e.branch == Branch::excited);
        const double d = std::hypot(g.widths.a_r - e.widths.a_r, g.widths.a_z - e.widths.a_z);
        CHECK(d < prev);
        prev = d;
        wg = g.widths;
        we = e.widths;
    }
    const double scale = std::hypot(cp.widths.a_r, cp.widths.a_z);
    CHECK(prev / scale < 1e-2);
}

TEST_CASE("threshold map: single cell, worker independence, lambda ordering") {
    ThresholdGrid one;
    one.gamma_lo = one.gamma_hi = 3.4e4;
    one.lambda_lo = one.lambda_hi = 6.0;
    one.n_gamma = one.n_lambda = 1;
    const auto c = threshold_map(one, 1);
    REQUIRE(c.size() == 1);
    REQUIRE(c[0].a_crit.has_value());
    CHECK(*c[0].a_crit == critical_scattering_length(3.4e4, 6.0));

    ThresholdGrid g;
    g.gamma_lo = 1e3;
    g.gamma_hi = 1e5;
    g.n_gamma = 3;
    g.lambda_lo = 0.1;
    g.lambda_hi = 10.0;
    g.n_lambda = 3;
    const auto m1 = threshold_map(g, 1);
    const auto m3 = threshold_map(g, 3);
    REQUIRE(m1.size() == 9);
    for (std::size_t k = 0; k < m1.size(); ++k) {
        REQUIRE(m1[k].a_crit.has_value());
        CHECK(*m1[k].a_crit == *m3[k].a_crit);
    }
    // at fixed gamma_bar, flatter traps (larger lambda) have lower thresholds
    for (int i = 0; i < 3; ++i) {
        CHECK(*m1[3 * i].a_crit > *m1[3 * i + 1].a_crit);
        CHECK(*m1[3 * i + 1].a_crit > *m1[3 * i + 2].a_crit);
    }
    for (std::size_t k : {3u, 5u})
        CHECK(*m1[k].a_crit ==
              critical_scattering_length(m1[k].scaled_gamma_bar, m1[k].aspect_ratio));
}

TEST_CASE("threshold map records per-cell failures") {
    ThresholdGrid g;
    g.gamma_lo = 1e3;
    g.gamma_hi = 1e20;
    g.n_gamma = 2;
    g.lambda_lo = g.lambda_hi = 1e-6;
    g.n_lambda = 1;
    const auto m = threshold_map(g, 2);
    REQUIRE(m.size() == 2);
    CHECK(m[0].a_crit.has_value());
    CHECK_FALSE(m[1].a_crit.has_value());
    CHECK_FALSE(m[1].error.empty());
    ThresholdGrid bad;
    bad.gamma_lo = -1.0;
    CHECK_THROWS_AS(threshold_map(bad), std::invalid_argument);
}

TEST_CASE("thresholds depend only on the scaled parameters") {
    const auto cr = AtomSpec::chromium52(6.0);
    const LabTrap lab{20000, 400.0, 2400.0, 0.0};
    const LabTrap lab4{80000, 25.0, 150.0, 0.0};
    const auto p1 = scale_lab_to_params(lab, cr);
    const auto p2 = scale_lab_to_params(lab4, cr);
    const double a1 = critical_point(p1).scattering_ratio;
    const double a2 = critical_point(p2).scattering_ratio;
    CHECK(std::abs(a1 - a2) <= 1e-10 * std::abs(a1));
}

}
