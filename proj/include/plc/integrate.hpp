// Adaptive time integration of the PC system confined to the simplex,
// terminal-fate detection, separatrix tracing and a periodic-orbit monitor.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "plc/core.hpp"
#include "plc/critical.hpp"

namespace plc {

struct IntegrateOptions {
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  double initial_step = 0;         // 0: horizon * 1e-4
  double min_step_factor = 1e-12;  // minimum step = factor * horizon
  bool detect_fate = true;
  double convergence_radius = kConvergenceRadius;
};

struct StepStats {
  std::int64_t accepted = 0;
  std::int64_t rejected = 0;
  double max_error_estimate = 0;  // largest accepted local error (inf norm)
};

enum class FateKind { Converged, Undecided };

// Terminal behaviour of a trajectory. `location` is the nearest critical
// object at the final sample (the convergence target when kind is Converged).
struct Fate {
  FateKind kind = FateKind::Undecided;
  PointKind target = PointKind::Interior;
  State location;
  double distance_at_end = 0;
  double field_norm_at_end = 0;
  double t_end = 0;
};

struct Sample {
  double t = 0;
  State s;
};

struct Trajectory {
  std::vector<Sample> samples;
  ModelParams params;
  Fate fate;
  StepStats stats;
};

struct StepSizeUnderflow : std::runtime_error {
  StepSizeUnderflow(double t_, const State& s_);
  double t;
  State state;
};

// Dormand-Prince 5(4) solution of the PC system from s0 over [0, horizon].
// Accepted samples are projected onto the simplex; a component that starts
// at exactly zero is pinned to zero (the axes are invariant). Integration
// stops early once the fate is decided (when detect_fate is set).
Trajectory integrate(const ModelParams& p, const State& s0, double horizon,
                     const IntegrateOptions& opts = {});

// States at the requested times (ascending, first >= 0). No fate detection.
std::vector<State> integrate_path(const ModelParams& p, const State& s0,
                                  std::span<const double> times,
                                  const IntegrateOptions& opts = {});

// Escalating-horizon fate decision (1e3, 1e4, 1e5 time units).
Fate fate(const ModelParams& p, const State& s0, const IntegrateOptions& opts = {});
std::pair<Fate, Trajectory> fate_with_trajectory(const ModelParams& p, const State& s0,
                                                 const IntegrateOptions& opts = {});

inline constexpr std::array<double, 3> kFateHorizons{1e3, 1e4, 1e5};

struct SeparatrixOptions {
  double offset = 1e-6;      // seed displacement along the attracting eigendirection
  double arc_budget = 4.0;   // stop after this much arc length per branch
  IntegrateOptions ode{.abs_tol = 1e-10, .rel_tol = 1e-10, .detect_fate = false};
};

// The two trajectories entering the interior saddle along its attracting
// eigendirection, obtained by integrating the time-reversed field from
// C +/- offset. Each branch starts at its seed and ends on the simplex
// boundary or at a reversed-time sink. Requires the generic regime and a
// non-degenerate saddle.
std::array<std::vector<State>, 2> trace_separatrix(const ModelParams& p,
                                                   const SeparatrixOptions& opts = {});
std::array<std::vector<State>, 2> trace_separatrix(const ModelParams& p,
                                                   double arc_length_budget);

struct SectionCrossing {
  double t = 0;
  double offset = 0;  // signed position along the section line
};

struct RecurrenceEvent {
  double t = 0;
  double distance = 0;         // gap to the matched earlier crossing
  std::size_t previous_index = 0;
};

struct PeriodicityReport {
  std::vector<SectionCrossing> crossings;   // same-direction section passages
  std::vector<RecurrenceEvent> recurrences; // expected empty for this system
  bool periodic_suspected() const { return !recurrences.empty(); }
};

// Watches returns of the trajectory through the section line orthogonal to
// the initial velocity at s0. A recurrence is a crossing within 1e-4 of an
// earlier one whose spacing is not shrinking. s0 must be interior and
// non-critical.
PeriodicityReport falsify_periodicity(const ModelParams& p, const State& s0,
                                      double horizon, const IntegrateOptions& opts = {});

}  // namespace plc
