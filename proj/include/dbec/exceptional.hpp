#pragma once

#include <array>
#include <complex>
#include <vector>

#include "dbec/stationary.hpp"

namespace dbec {

using cplx = std::complex<double>;

struct ComplexWidths {
    cplx a_r;
    cplx a_z;
};

struct ComplexStationaryState {
    ComplexWidths widths;
    cplx chem_potential;  // scaled N^2 epsilon
    cplx energy;
    double residual = 0.0;
    int iterations = 0;
};

struct CircleSample {
    double phi = 0.0;
    cplx scattering;  // a/a_d on the path
    std::array<ComplexStationaryState, 2> states;
};

struct CircleResult {
    cplx center;
    double radius = 0.0;
    double turns = 1.0;
    int n_steps = 0;  // per turn, after any refinement
    std::vector<CircleSample> samples;
    bool permuted = false;
    double step_bound = 0.0;      // largest allowed jump between adjacent samples
    double match_distance = 0.0;  // distance of the accepted end-to-start matching
};

namespace exceptional {

struct ComplexNewtonOptions {
    double tolerance = 1e-10;  // same scaled residual as the real solver
    int max_iterations = 100;
};

/// Newton in (ln A_r, ln A_z) on the analytically continued stationarity
/// equations at complex scattering ratio `a`. Throws NoStationaryState on
/// non-convergence or when a real part of a width becomes non-positive.
ComplexStationaryState complex_find_stationary(const TrapParams& p, cplx a,
                                               const ComplexWidths& guess,
                                               const ComplexNewtonOptions& opt = {});

/// Distance used for tracking and matching: Euclidean norm over
/// (ln A_r, ln A_z, epsilon / N^2 gamma_bar).
double state_distance(const ComplexStationaryState& x, const ComplexStationaryState& y,
                      const TrapParams& p);

struct EncircleOptions {
    int n_steps = 64;
    int max_steps = 4096;
    double turns = 1.0;
    /// A step may move a solution by at most this fraction of the current
    /// separation between the two solutions.
    double jump_fraction = 0.25;
};

/// Follows the ground and excited solutions along a = center + radius e^{i phi}
/// from phi = 0 to 2 pi * turns. The start states are the real solutions at
/// a = center + radius, which must exist. Tracking failures double n_steps
/// up to max_steps, then throw NoStationaryState.
CircleResult encircle(const TrapParams& p, cplx center, double radius,
                      const EncircleOptions& opt = {});

struct SplittingFit {
    std::vector<double> radii;
    std::vector<double> splitting;  // |eps_1 - eps_2|
    double exponent = 0.0;          // least-squares slope of log splitting vs log radius
};

/// Splitting of the two chemical potentials at a = a_crit + radius e^{i phi}
/// for each radius; the fitted exponent is 1/2 at a square-root branch point.
SplittingFit splitting_exponent(const TrapParams& p, double a_crit,
                                const std::vector<double>& radii, double phi = 1.5707963267948966);

}  // namespace exceptional
}  // namespace dbec
