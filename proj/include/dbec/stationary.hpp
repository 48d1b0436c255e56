#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dbec/meanfield.hpp"

namespace dbec {

enum class Branch { ground, excited, fold };
enum class Stability { stable, unstable, unclassified };

const char* to_string(Branch b);
const char* to_string(Stability s);

struct StationaryState {
    WidthVector widths;
    double chem_potential = 0.0;  // scaled N^2 epsilon
    double energy = 0.0;          // scaled mean-field energy
    Branch branch = Branch::fold;
    Stability stability = Stability::unclassified;
    double gradient_norm = 0.0;   // stationarity_residual at convergence
    int iterations = 0;
};

struct FoldPoint {
    double scattering_ratio = 0.0;
    WidthVector widths;
};

struct BranchCurve {
    std::vector<double> samples;  // a/a_d, strictly increasing
    std::vector<StationaryState> states;
    std::optional<FoldPoint> fold;
};

/// Thrown when no stationary state is reachable from a guess, or when a
/// continuation cannot proceed.
class NoStationaryState : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace stationary {

/// Scaled gradient norm |(A_r dE/dA_r, A_z dE/dA_z)| / max(N^2 gamma_bar,
/// 2 A_r + A_z). The denominator is the larger of the trap energy scale and
/// the kinetic energy, so the measure stays meaningful for very narrow
/// clouds near the collapse branch.
double stationarity_residual(const WidthVector& w, const TrapParams& p);

struct NewtonOptions {
    double tolerance = 1e-10;  // on stationarity_residual
    int max_iterations = 100;
};

/// Newton iteration on the energy gradient in logarithmic widths, with
/// backtracking on the residual norm. Converges to whichever stationary point
/// attracts the guess; the state is labelled by the Hessian signature.
StationaryState find_stationary(const TrapParams& p, const WidthVector& guess,
                                const NewtonOptions& opt = {});

/// Local minimum of the energy reached by damped descent from `guess`
/// (default: the non-interacting oscillator widths gamma / 2).
StationaryState minimize_energy(const TrapParams& p, std::optional<WidthVector> guess = {},
                                const NewtonOptions& opt = {});

/// Ground state (local energy minimum) of p.
StationaryState ground_state(const TrapParams& p);

/// Excited state (saddle) of p. Newton is tried from the narrow-cloud guess
/// first; if that does not land on a saddle, the ground branch is continued
/// through the fold and back up to p.scattering_ratio.
StationaryState excited_state(const TrapParams& p);

/// Labels a converged state from its Hessian.
void classify(StationaryState& s, const TrapParams& p);

struct ContinuationOptions {
    double initial_step = 0.02;
    double min_step = 1e-9;
    double max_step = 0.05;
    int max_points = 20000;
    double width_cap = 1e12;  // in units of N^2 gamma_bar
};

/// Pseudo-arclength continuation in (ln A_r, ln A_z, a/a_d) starting from the
/// ground state at `a_start` and running towards smaller a through the fold,
/// then up the excited branch until a exceeds `a_stop` or the widths leave
/// the cap. Returns {ground, excited}, each sorted by increasing a. Throws
/// NoStationaryState if no ground state exists at `a_start`; if the step
/// collapses before the fold, the partial curves are returned without a fold.
std::pair<BranchCurve, BranchCurve> trace_branches(const TrapParams& p, double a_start,
                                                   double a_stop,
                                                   const ContinuationOptions& opt = {});

struct CriticalPoint {
    double scattering_ratio = 0.0;   // from the extended (det Hessian = 0) system
    double bisection_ratio = 0.0;    // from the existence bisection
    WidthVector widths;
    int bracket_extensions = 0;
};

/// Fold of the two branches for the given trap (scattering ratio ignored).
/// Existence bisection with warm starts from the ground branch, then Newton on
/// {grad E = 0, det Hessian = 0}. Throws std::runtime_error if the two
/// estimates differ by more than 1e-6 or no fold is found.
CriticalPoint critical_point(const TrapParams& p);

double critical_scattering_length(double scaled_gamma_bar, double aspect_ratio);

struct ThresholdCell {
    double scaled_gamma_bar = 0.0;
    double aspect_ratio = 0.0;
    std::optional<double> a_crit;
    std::string error;
};

struct ThresholdGrid {
    double gamma_lo = 1e2, gamma_hi = 1e6;
    int n_gamma = 20;
    double lambda_lo = 0.1, lambda_hi = 10.0;
    int n_lambda = 20;
    bool log_gamma = true;
    bool log_lambda = true;
    double dipole_coupling = 1.0;

    void validate() const;
};

/// Cells in row-major order (gamma outer, lambda inner). Failures are kept in
/// the cell, not thrown. The result does not depend on `workers`.
std::vector<ThresholdCell> threshold_map(const ThresholdGrid& grid, unsigned workers = 0);

}  // namespace stationary
}  // namespace dbec
