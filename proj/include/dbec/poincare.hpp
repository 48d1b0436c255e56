#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbec/dynamics.hpp"

namespace dbec {

/// Points are recorded where Im a_z changes sign in this direction.
enum class Crossing { upward, downward };
const char* to_string(Crossing c);

struct SectionPoint {
    double re_a_r = 0.0;
    double im_a_r = 0.0;
    double crossing_time = 0.0;
    int trajectory_id = 0;
    double re_a_z = 0.0;  // remaining coordinates of the crossing state
    double im_a_z = 0.0;
};

struct SectionTrajectory {
    int id = 0;
    ComplexWidthState seed;
    Outcome outcome = Outcome::bounded;
    std::size_t crossings = 0;
    double end_time = 0.0;
    double max_energy_drift = 0.0;
    std::string note;  // integration failure, if any
};

struct SectionDataset {
    double energy = 0.0;
    Crossing direction = Crossing::upward;
    std::vector<SectionPoint> points;  // grouped by trajectory id, in time order
    std::vector<SectionTrajectory> trajectories;

    std::size_t count(Outcome o) const;
};

/// Rectangle in the (Re a_r, Im a_r) plane.
struct SeedBox {
    double re_lo = 0.0, re_hi = 0.0;
    double im_lo = 0.0, im_hi = 0.0;
};

enum class SeedMode { random, line };

struct SeedOptions {
    SeedMode mode = SeedMode::random;
    std::uint64_t rng_seed = 1;
    int max_attempts_factor = 200;  // random draws per requested seed, at most
    std::optional<SeedBox> box;     // default: default_seed_box
};

struct Seeding {
    std::vector<ComplexWidthState> seeds;
    SeedBox box;
    int branch = 0;           // Re a_z root used: 0 = the one joined to the ground-state width
    std::string explanation;  // set when fewer seeds than requested were produced
};

struct SectionOptions {
    Crossing direction = Crossing::upward;
    int target_crossings = 500;
    double t_end = 0.0;  // 0: 2000 periods of the slowest ground-state mode
    double rtol = 1e-10;
    double atol = 1e-10;
    double collapse_cap = 1e8;
    double max_energy_drift = 1e-6;
    long max_steps = 50'000'000;
    int workers = 0;  // 0: default parallelism
};

struct PeriodicOrbit {
    double energy = 0.0;
    double re_a_r = 0.0;
    double im_a_r = 0.0;
    double period = 0.0;  // return time to the section
    std::array<std::complex<double>, 2> multipliers;
    bool stable = false;  // |trace| of the return-map Jacobian below 2
};

namespace poincare {

/// Re a_z solving energy_of_state = energy with Im a_z = 0 on the branch
/// whose crossing is upward (dV/d Re a_z < 0), i.e. the root joined to the
/// ground-state width. Empty when (Re a_r, Im a_r) is not admissible.
std::optional<double> solve_re_a_z(double energy, const TrapParams& p, double re_a_r,
                                   double im_a_r, Crossing direction = Crossing::upward);

/// Minimum over Re a_z of the real energy functional at fixed Re a_r.
double section_potential(const TrapParams& p, double re_a_r);

/// Bounding box of the admissible section region joined to the ground
/// state. Above the saddle energy the region is open towards collapse and the
/// box is closed where the section potential has fallen back to E_gs.
SeedBox default_seed_box(double energy, const TrapParams& p);

Seeding seed_initial_states(double energy, const TrapParams& p, int n,
                            const SeedOptions& opt = {});

/// Integrates every seed and records its section crossings.
SectionDataset surface_of_section(const std::vector<ComplexWidthState>& seeds,
                                  const TrapParams& p, const SectionOptions& opt = {});

/// Fig.-type energy ladder as multiples of the ground-state energy.
std::vector<double> default_panel_factors();
std::vector<double> default_panel_energies(const TrapParams& p);

struct PanelResult {
    SectionDataset dataset;
    SeedBox box;
    std::string seeding_note;
};

std::vector<PanelResult> panel_sweep(const TrapParams& p, const std::vector<double>& energies,
                                     int n_per_panel, const SectionOptions& opt = {},
                                     const SeedOptions& seeding = {});

/// One application of the return map; nullopt if the trajectory collapses
/// or fails before returning.
struct Return {
    double re_a_r, im_a_r, time;
};
std::optional<Return> return_map(double energy, const TrapParams& p, double re_a_r,
                                 double im_a_r, const SectionOptions& opt = {});

/// Newton on the return map at fixed energy.
PeriodicOrbit find_periodic_orbit(double energy, const TrapParams& p, double re_a_r,
                                  double im_a_r, const SectionOptions& opt = {});

/// Continues the section fixed point born at the ground state up to
/// `energy`, in n_steps geometric energy increments.
std::vector<PeriodicOrbit> continue_periodic_orbit(const TrapParams& p, double energy,
                                                   int n_steps = 40,
                                                   const SectionOptions& opt = {});

}  // namespace poincare
}  // namespace dbec
