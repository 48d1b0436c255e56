#include <cmath>
#include <stdexcept>

#include "dbec/poincare.hpp"
#include "doctest.h"

using namespace dbec;
using namespace dbec::poincare;

namespace {

const TrapParams kKoch = TrapParams::from_mean(3.4e4, 6.0, 0.1);

double e_gs() {
    static const double e = stationary::ground_state(kKoch).energy;
    return e;
}

double e_es() {
    static const double e = stationary::excited_state(kKoch).energy;
    return e;
}

double im_a_z_rate(const SectionPoint& pt) {
    return dynamics::equations_of_motion(dynamics::State{pt.re_a_r, pt.im_a_r, pt.re_a_z, pt.im_a_z},
                                         kKoch)[3];
}

}  // namespace

TEST_SUITE("poincare") {

TEST_CASE("energy elimination picks the upward-crossing root") {
    const auto g = stationary::ground_state(kKoch);
    const double e = 1.1 * e_gs();
    for (double f : {0.8, 1.0, 1.3}) {
        const double re = f * g.widths.a_r, im = 500.0;
        const auto up = solve_re_a_z(e, kKoch, re, im);
        const auto down = solve_re_a_z(e, kKoch, re, im, Crossing::downward);
        REQUIRE(up);
        REQUIRE(down);
        CHECK(*up < *down);
        for (double az : {*up, *down}) {
            const ComplexWidthState s{{re, im}, {az, 0.0}};
            CHECK(dynamics::energy_of_state(s, kKoch) == doctest::Approx(e).epsilon(1e-12));
        }
        // Im a_z increases through zero at the upward root
        CHECK(dynamics::equations_of_motion(dynamics::State{re, im, *up, 0.0}, kKoch)[3] > 0.0);
        CHECK(dynamics::equations_of_motion(dynamics::State{re, im, *down, 0.0}, kKoch)[3] < 0.0);
    }
    CHECK_FALSE(solve_re_a_z(e, kKoch, 10.0 * g.widths.a_r, 0.0));
    CHECK_FALSE(solve_re_a_z(e, kKoch, g.widths.a_r, 1e6));
    // the section potential has its minimum at the ground state
    CHECK(section_potential(kKoch, g.widths.a_r) == doctest::Approx(e_gs()).epsilon(1e-12));
    CHECK(section_potential(kKoch, 1.1 * g.widths.a_r) > e_gs());
    CHECK(section_potential(kKoch, 0.9 * g.widths.a_r) > e_gs());
}

TEST_CASE("seeding at, below and slightly above the ground-state energy") {
    const auto g = stationary::ground_state(kKoch);
    const auto at = seed_initial_states(e_gs(), kKoch, 20);
    REQUIRE(at.seeds.size() == 1);
    CHECK(at.seeds[0].a_r.real() == g.widths.a_r);
    CHECK(at.seeds[0].a_z.real() == g.widths.a_z);
    CHECK_FALSE(at.explanation.empty());

    const auto below = seed_initial_states(0.99 * e_gs(), kKoch, 20);
    CHECK(below.seeds.empty());
    CHECK_FALSE(below.explanation.empty());

    const double e = 1.001 * e_gs();
    const auto above = seed_initial_states(e, kKoch, 20);
    CHECK(above.seeds.size() == 20);
    CHECK(above.box.re_lo < g.widths.a_r);
    CHECK(above.box.re_hi > g.widths.a_r);
    for (const auto& s : above.seeds) {
        CHECK(s.a_z.imag() == 0.0);
        CHECK(std::abs(s.a_r.real() / g.widths.a_r - 1.0) < 0.2);
        CHECK(dynamics::energy_of_state(s, kKoch) == doctest::Approx(e).epsilon(1e-12));
    }
    SeedOptions line;
    line.mode = SeedMode::line;
    const auto ls = seed_initial_states(e, kKoch, 9, line);
    CHECK(ls.seeds.size() == 9);
    for (std::size_t i = 1; i < ls.seeds.size(); ++i)
        CHECK(ls.seeds[i].a_r.real() > ls.seeds[i - 1].a_r.real());
}

TEST_CASE("the ground-state energy gives a single section point") {
    const auto s = seed_initial_states(e_gs(), kKoch, 5);
    const auto ds = surface_of_section(s.seeds, kKoch);
    REQUIRE(ds.points.size() == 1);
    CHECK(ds.count(Outcome::bounded) == 1);
}

TEST_CASE("crossings are refined, on the energy shell and in the configured direction") {
    const double e = 5.00 / 4.24 * e_gs();
    const auto s = seed_initial_states(e, kKoch, 6);
    SectionOptions opt;
    opt.target_crossings = 100;
    for (Crossing dir : {Crossing::upward, Crossing::downward}) {
        opt.direction = dir;
        const auto ds = surface_of_section(s.seeds, kKoch, opt);
        CHECK(ds.direction == dir);
        CHECK(ds.points.size() == 600);
        for (const auto& pt : ds.points) {
            CHECK(std::abs(pt.im_a_z) <= 1e-10);
            const ComplexWidthState full{{pt.re_a_r, pt.im_a_r}, {pt.re_a_z, pt.im_a_z}};
            CHECK(std::abs(dynamics::energy_of_state(full, kKoch) - ds.energy) <= 1e-6 * ds.energy);
            if (dir == Crossing::upward)
                CHECK(im_a_z_rate(pt) > 0.0);
            else
                CHECK(im_a_z_rate(pt) < 0.0);
        }
        // grouped by trajectory, increasing crossing times
        for (std::size_t i = 1; i < ds.points.size(); ++i) {
            const auto& a = ds.points[i - 1];
            const auto& b = ds.points[i];
            CHECK(b.trajectory_id >= a.trajectory_id);
            if (a.trajectory_id == b.trajectory_id) CHECK(b.crossing_time > a.crossing_time);
        }
    }
}

TEST_CASE("below the saddle energy nothing collapses") {
    SectionOptions opt;
    opt.target_crossings = 200;
    for (double e : {5.00 / 4.24 * e_gs(), 6.00 / 4.24 * e_gs(), e_es() * (1.0 - 1e-3)}) {
        const auto s = seed_initial_states(e, kKoch, 12);
        const auto ds = surface_of_section(s.seeds, kKoch, opt);
        CHECK(ds.count(Outcome::collapsed) == 0);
        CHECK(ds.count(Outcome::bounded) == s.seeds.size());
        for (const auto& t : ds.trajectories) CHECK(t.max_energy_drift <= 1e-8);
    }
}

TEST_CASE("identical seeds give identical datasets for any worker count") {
    const double e = 6.00 / 4.24 * e_gs();
    const auto s = seed_initial_states(e, kKoch, 5);
    SectionOptions a, b;
    a.target_crossings = b.target_crossings = 50;
    a.workers = 1;
    b.workers = 3;
    const auto x = surface_of_section(s.seeds, kKoch, a);
    const auto y = surface_of_section(s.seeds, kKoch, b);
    REQUIRE(x.points.size() == y.points.size());
    for (std::size_t i = 0; i < x.points.size(); ++i) {
        CHECK(x.points[i].re_a_r == y.points[i].re_a_r);
        CHECK(x.points[i].im_a_r == y.points[i].im_a_r);
        CHECK(x.points[i].crossing_time == y.points[i].crossing_time);
        CHECK(x.points[i].trajectory_id == y.points[i].trajectory_id);
    }
    const auto again = seed_initial_states(e, kKoch, 5);
    for (std::size_t i = 0; i < s.seeds.size(); ++i) CHECK(again.seeds[i].a_r == s.seeds[i].a_r);
}

TEST_CASE("the section fixed point is born at the ground state") {
    const auto g = stationary::ground_state(kKoch);
    const auto orbits = continue_periodic_orbit(kKoch, 1.01 * e_gs(), 4);
    REQUIRE(orbits.size() == 5);
    const auto& first = orbits.front();
    CHECK(std::abs(first.re_a_r - g.widths.a_r) <= 1e-3 * g.widths.a_r);
    // small-amplitude return time is the period of one linear mode
    const auto sp = dynamics::linearize(g, kKoch);
    double best = 1e300;
    for (const auto& k : sp.eigenvalues)
        if (k.imag() > 0.0) best = std::min(best, std::abs(first.period * k.imag() / (2.0 * 3.14159265358979323846) - 1.0));
    CHECK(best <= 1e-3);
    for (const auto& o : orbits) {
        const auto r = return_map(o.energy, kKoch, o.re_a_r, o.im_a_r);
        REQUIRE(r);
        CHECK(std::abs(r->re_a_r - o.re_a_r) <= 1e-7 * o.re_a_r);
        CHECK(std::abs(r->im_a_r - o.im_a_r) <= 1e-7 * o.re_a_r);
        // area preservation of the return map
        CHECK(std::abs(o.multipliers[0] * o.multipliers[1] - 1.0) <= 1e-4);
    }
    CHECK(orbits.back().energy == doctest::Approx(1.01 * e_gs()));
}

TEST_CASE("above the saddle: collapse and a surviving island") {
    const double e = 9.00 / 4.24 * e_gs();
    const auto s = seed_initial_states(e, kKoch, 20);
    SectionOptions opt;
    opt.target_crossings = 200;
    const auto ds = surface_of_section(s.seeds, kKoch, opt);
    CHECK(ds.count(Outcome::collapsed) > 0);
    const auto po = continue_periodic_orbit(kKoch, e, 20).back();
    CHECK(po.stable);
    const double re = po.re_a_r + 1e-3 * (s.box.re_hi - s.box.re_lo);
    const auto az = solve_re_a_z(e, kKoch, re, po.im_a_r);
    REQUIRE(az);
    const auto island = surface_of_section({{{re, po.im_a_r}, {*az, 0.0}}}, kKoch, opt);
    CHECK(island.trajectories[0].outcome == Outcome::bounded);
    CHECK(island.points.size() == 200);
}

TEST_CASE("panel ladder and input checks") {
    const auto f = default_panel_factors();
    REQUIRE(f.size() == 7);
    CHECK(f[0] == 1.0);
    CHECK(f[6] == doctest::Approx(60.0 / 4.24));
    const auto es = default_panel_energies(kKoch);
    CHECK(es[0] == e_gs());
    CHECK_THROWS_AS(panel_sweep(kKoch, {2.0 * e_gs(), e_gs()}, 3), std::invalid_argument);
    CHECK_THROWS_AS(surface_of_section({}, kKoch), std::invalid_argument);
    const auto a = seed_initial_states(1.1 * e_gs(), kKoch, 1).seeds[0];
    const auto b = seed_initial_states(1.2 * e_gs(), kKoch, 1).seeds[0];
    CHECK_THROWS_AS(surface_of_section({a, b}, kKoch), std::invalid_argument);
    const auto panels = panel_sweep(kKoch, {e_gs(), 1.05 * e_gs()}, 2);
    REQUIRE(panels.size() == 2);
    CHECK(panels[0].dataset.points.size() == 1);
    CHECK(panels[1].dataset.trajectories.size() == 2);
}

}
