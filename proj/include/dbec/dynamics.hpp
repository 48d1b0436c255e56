#pragma once

#include <array>
#include <complex>
#include <string>
#include <vector>

#include "dbec/dop853.hpp"
#include "dbec/meanfield.hpp"
#include "dbec/stationary.hpp"

namespace dbec {

/// Complex widths of the time-dependent Gaussian exp(-(a_r r^2 + a_z z^2)).
/// The imaginary parts carry the momenta of the width dynamics.
struct ComplexWidthState {
    std::complex<double> a_r;
    std::complex<double> a_z;

    /// Throws std::invalid_argument unless both real parts are positive and
    /// all components finite.
    void validate() const;
    /// (Re a_r, Im a_r, Re a_z, Im a_z)
    std::array<double, 4> to_array() const;
    static ComplexWidthState from_array(const std::array<double, 4>& y);
    static ComplexWidthState from_real(const WidthVector& w);
};

enum class Outcome { bounded, collapsed, escaped };
const char* to_string(Outcome o);

enum class Dynamical { stable, unstable };
const char* to_string(Dynamical d);

struct Trajectory {
    std::vector<double> times;
    std::vector<ComplexWidthState> states;
    std::vector<double> energy_series;
    Outcome outcome = Outcome::bounded;
    double max_energy_drift = 0.0;  // relative to the initial energy
    long steps = 0;
};

struct StabilitySpectrum {
    std::array<std::complex<double>, 4> eigenvalues;
    Dynamical classification = Dynamical::stable;
};

class DynamicsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace dynamics {

using State = std::array<double, 4>;

/// Right-hand side of the width equations in (Re a_r, Im a_r, Re a_z, Im a_z).
State equations_of_motion(const State& y, const TrapParams& p);
ComplexWidthState equations_of_motion(const ComplexWidthState& s, const TrapParams& p);

/// ||equations_of_motion|| relative to the largest term of the right-hand
/// side (4 Re a^2 or gamma^2). Absolute rates at stationary states are only
/// as small as rounding in those terms allows.
double flow_residual(const State& y, const TrapParams& p);

/// Analytic Jacobian of equations_of_motion, row-major.
Eigen::Matrix4d jacobian(const State& y, const TrapParams& p);

/// Conserved energy of the flow, in the same scaled convention as
/// meanfield::mean_field_energy (to which it reduces on real widths).
double energy_of_state(const ComplexWidthState& s, const TrapParams& p);
double energy_of_state(const State& y, const TrapParams& p);

/// |E(y) - e0| over max(|e0|, sum of the magnitudes of the energy terms at y).
/// Near collapse the terms grow large and cancel; the denominator keeps the
/// measure an honest integration-accuracy check there.
double relative_energy_drift(const State& y, double e0, const TrapParams& p);

/// |A|^2 fixed by unit norm: (2/pi)^{3/2} Re a_r sqrt(Re a_z).
double amplitude_modulus_sq(const ComplexWidthState& s);

struct EvolveOptions {
    double rtol = 1e-10;
    double atol = 1e-10;
    double collapse_cap = 1e8;       // Re a_r or Re a_z above this (scaled) is a collapse
    double max_energy_drift = 1e-6;  // abort threshold for the relative drift
    double sample_interval = 0.0;    // 0 records every accepted step
    long max_steps = 50'000'000;     // exhausting it yields Outcome::escaped
};

/// Adaptive DOP853 integration from t = 0 to t_end.
Trajectory evolve(const ComplexWidthState& s0, const TrapParams& p, double t_end,
                  const EvolveOptions& opt = {});

/// Canonical coordinates (Q_r, Q_z, P_r, P_z) in which the flow is
/// H = P_r^2 + P_z^2 + U(Q_r, Q_z); Re a_r = 1/(2 Q_r^2), Re a_z = 1/(4 Q_z^2).
State to_canonical(const ComplexWidthState& s);
ComplexWidthState from_canonical(const State& c);

/// Fixed-step fourth-order symplectic (Yoshida) integration in canonical
/// coordinates; samples every `record_every` steps. Cross-check only.
Trajectory evolve_symplectic(const ComplexWidthState& s0, const TrapParams& p, double t_end,
                             double dt, long record_every = 1, double collapse_cap = 1e8);

/// Eigenvalues kappa of the linearized flow at a stationary state.
StabilitySpectrum linearize(const StationaryState& st, const TrapParams& p);

/// Real eigenvector of the unstable mode at an excited state, in state
/// coordinates, oriented so that the Re a components increase.
State unstable_direction(const StationaryState& st, const TrapParams& p);

/// Step-wise integrator over the width equations, shared with the section code.
struct Rhs {
    const TrapParams* p;
    void operator()(double, const State& y, State& dy) const { dy = equations_of_motion(y, *p); }
};
using Integrator = Dop853<4, Rhs>;

}  // namespace dynamics
}  // namespace dbec
