#include <cmath>
#include <random>
#include <stdexcept>

#include "dbec/meanfield.hpp"
#include "doctest.h"
#include "oracle/dipolar_quadrature.hpp"

using namespace dbec;
using namespace dbec::meanfield;

namespace {

TrapParams params(double a, double gr, double gz, double coupling = 1.0) {
    TrapParams p;
    p.scattering_ratio = a;
    p.scaled_gamma_r = gr;
    p.scaled_gamma_z = gz;
    p.dipole_coupling = coupling;
    return p;
}

double rel(double x, double ref) { return std::abs(x - ref) / std::abs(ref); }

}  // namespace

TEST_SUITE("meanfield") {

TEST_CASE("anisotropy function: isotropic zero and removable singularity") {
    CHECK(anisotropy_function(1.0) == 0.0);
    const double f0 = anisotropy_function(1.0);
    CHECK(std::abs(anisotropy_function(1.0 + 1e-6) - f0) <= 1e-5);
    CHECK(std::abs(anisotropy_function(1.0 - 1e-6) - f0) <= 1e-5);
    // both sides of the series/closed-form switch agree
    for (double b : {0.2, -0.2}) {
        const double k = std::sqrt(1.0 + b);
        const double lo = anisotropy_function(k * (1.0 - 1e-15));
        const double hi = anisotropy_function(k * (1.0 + 1e-15));
        CHECK(std::abs(lo - hi) <= 1e-12);
    }
    CHECK_THROWS_AS(anisotropy_function(0.0), std::invalid_argument);
    CHECK_THROWS_AS(anisotropy_function(-1.0), std::invalid_argument);
}

TEST_CASE("anisotropy function is monotone decreasing in kappa^{-1}") {
    double prev = anisotropy_function(1e-3);
    for (double lk = -3.0; lk <= 3.0; lk += 0.01) {
        const double f = anisotropy_function(std::pow(10.0, lk));
        CHECK(f >= prev - 1e-15);
        prev = f;
    }
}

TEST_CASE("anisotropy function matches quadrature oracle") {
    CHECK(rel(anisotropy_function(0.5), oracle::anisotropy_oracle(0.5)) <= 1e-8);
    // limits: oblate tends to -2, prolate to +1
    const double oblate = anisotropy_function(1e-3);
    const double prolate = anisotropy_function(1e3);
    CHECK(oblate < 0.0);
    CHECK(prolate > 0.0);
    CHECK(rel(oblate, oracle::anisotropy_oracle(1e-3)) <= 1e-8);
    CHECK(rel(prolate, oracle::anisotropy_oracle(1e3)) <= 1e-8);
    CHECK(oblate == doctest::Approx(-2.0).epsilon(1e-2));
    CHECK(prolate == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("dipolar oracle: isotropic zero and sign flip") {
    CHECK(std::abs(oracle::dipolar_energy_oracle(WidthVector{3.0, 3.0})) <= 1e-12);
    const double prolate = oracle::dipolar_energy_oracle(WidthVector{4.0, 1.0});  // kappa = 2
    const double oblate = oracle::dipolar_energy_oracle(WidthVector{1.0, 4.0});   // kappa = 1/2
    CHECK(prolate < 0.0);
    CHECK(oblate > 0.0);
}

TEST_CASE("closed-form dipolar energy vs oracle over a kappa grid") {
    const auto p = params(0.0, 1.0, 1.0);
    for (int i = 0; i <= 40; ++i) {
        const double kappa = std::pow(10.0, -2.0 + 4.0 * i / 40.0);
        const WidthVector w{kappa * kappa * 3.0, 3.0};
        const double closed = mean_field_energy(w, p).dipolar;
        const double brute = oracle::dipolar_energy_oracle(w);
        if (std::abs(kappa - 1.0) < 1e-12)
            CHECK(std::abs(closed) <= 1e-14);
        else
            CHECK(rel(closed, brute) <= 1e-6);
    }
}

TEST_CASE("non-interacting harmonic limit") {
    const double g = 37.0;
    const auto p = params(0.0, g, g, 0.0);
    // minimum at A = gamma / 2 with energy 3 gamma (one gamma per Cartesian degree)
    const WidthVector w{g / 2.0, g / 2.0};
    const auto grad = energy_gradient(w, p);
    CHECK(grad.norm() == 0.0);
    const auto e = mean_field_energy(w, p);
    CHECK(e.total == doctest::Approx(3.0 * g).epsilon(1e-15));
    CHECK(e.kinetic == doctest::Approx(e.trap).epsilon(1e-15));
    CHECK(chemical_potential(w, p) == e.total);
    const auto h = energy_hessian(w, p);
    CHECK(h(0, 0) > 0.0);
    CHECK(h.determinant() > 0.0);
}

TEST_CASE("isotropic widths have exactly zero dipolar energy") {
    const auto p = params(0.3, 10.0, 70.0);
    for (double a : {1e-3, 0.5, 17.0, 4e4}) {
        CHECK(mean_field_energy(WidthVector{a, a}, p).dipolar == 0.0);
    }
}

TEST_CASE("energy breakdown sums and chemical potential identity") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> lw(-3.0, 3.0), sa(-1.0, 1.0);
    for (int i = 0; i < 500; ++i) {
        const WidthVector w{std::pow(10.0, lw(rng)), std::pow(10.0, lw(rng))};
        const auto p = params(sa(rng), std::pow(10.0, lw(rng)), std::pow(10.0, lw(rng)));
        const auto e = mean_field_energy(w, p);
        const double sum = e.kinetic + e.trap + e.contact + e.dipolar;
        CHECK(std::abs(e.total - sum) <= 1e-12 * std::abs(sum));
        const double mu = chemical_potential(w, p);
        const double scale =
            std::abs(e.kinetic) + std::abs(e.trap) + std::abs(e.contact) + std::abs(e.dipolar);
        CHECK(std::abs((mu - e.total) - (e.contact + e.dipolar)) <= 1e-12 * scale);
    }
}

TEST_CASE("homogeneity of the energy terms under joint width rescaling") {
    const auto p = params(0.05, 3.0, 11.0);
    const WidthVector w{2.5, 7.0};
    const auto e1 = mean_field_energy(w, p);
    for (double s : {0.1, 2.0, 13.0}) {
        const auto e2 = mean_field_energy(WidthVector{s * w.a_r, s * w.a_z}, p);
        CHECK(rel(e2.kinetic, s * e1.kinetic) <= 1e-14);
        CHECK(rel(e2.trap, e1.trap / s) <= 1e-14);
        CHECK(rel(e2.contact, std::pow(s, 1.5) * e1.contact) <= 1e-14);
        CHECK(rel(e2.dipolar, std::pow(s, 1.5) * e1.dipolar) <= 1e-13);
    }
}

TEST_CASE("analytic gradient and Hessian agree with central differences") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> lw(-3.0, 3.0), lg(-1.0, 5.0), sa(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        const WidthVector w{std::pow(10.0, lw(rng)), std::pow(10.0, lw(rng))};
        const auto p = params(sa(rng), std::pow(10.0, lg(rng)), std::pow(10.0, lg(rng)));
        const auto g = energy_gradient(w, p);
        const auto h = energy_hessian(w, p);
        Eigen::Vector2d fd;
        Eigen::Matrix2d hfd;
        for (int k = 0; k < 2; ++k) {
            const double step = 1e-6 * (k == 0 ? w.a_r : w.a_z);
            WidthVector plus = w, minus = w;
            (k == 0 ? plus.a_r : plus.a_z) += step;
            (k == 0 ? minus.a_r : minus.a_z) -= step;
            fd(k) = (mean_field_energy(plus, p).total - mean_field_energy(minus, p).total) /
                    (2.0 * step);
            hfd.col(k) = (energy_gradient(plus, p) - energy_gradient(minus, p)) / (2.0 * step);
        }
        CHECK((fd - g).norm() <= 1e-5 * g.norm());
        CHECK((hfd - h).norm() <= 1e-5 * h.norm());
        CHECK(h(0, 1) == h(1, 0));
    }
}

TEST_CASE("invalid widths and overflow") {
    const auto p = params(0.1, 1.0, 1.0);
    CHECK_THROWS_AS(mean_field_energy(WidthVector{0.0, 1.0}, p), std::invalid_argument);
    CHECK_THROWS_AS(mean_field_energy(WidthVector{1.0, -1.0}, p), std::invalid_argument);
    CHECK_THROWS_AS(mean_field_energy(WidthVector{1e300, 1e300}, p), std::range_error);
}

}
