// Domain types and vector field of the PC system
//
//   dx/dt = alpha * x * (1 - x) - beta * x * y
//   dy/dt = gamma * y * (1 - y) - delta * x * y
//
// on the simplex  D = { x >= 0, y >= 0, x + y <= 1 }.  x is the fraction of
// progressive speakers (users of the new feature), y the fraction of
// conservative speakers; the liberal remainder is 1 - x - y.

#pragma once

#include <stdexcept>

namespace plc {

// Default tolerances, overridable per call where it matters.
inline constexpr double kRegimeTol = 1e-12;         // equality band for regime / degeneracy decisions
inline constexpr double kDomainBand = 1e-9;         // simplex band absorbing integrator roundoff
inline constexpr double kSectorBand = 1e-9;         // on-nullcline band
inline constexpr double kConvergenceRadius = 1e-6;  // fate decision radius

// Per-encounter propensities of the three-community interaction model,
// plus the population size. All four are >= 0 in the generic case; at most
// one may be negative (see validate_params for the admissibility condition).
struct RawParams {
  double alpha = 0;  // progressive converts liberal
  double beta = 0;   // progressive -> liberal on P/C contact
  double gamma = 0;  // conservative converts liberal
  double delta = 0;  // conservative -> liberal on P/C contact
  double population = 0;
};

// Normalized interaction rates of the reduced two-dimensional system.
struct ModelParams {
  double alpha = 0;
  double beta = 0;
  double gamma = 0;
  double delta = 0;

  // Coupling determinant D = alpha*gamma - beta*delta; negative in the
  // generic regime.
  double D() const { return alpha * gamma - beta * delta; }
};

struct State {
  double x = 0;
  double y = 0;
};

struct Deriv {
  double dx = 0;
  double dy = 0;
};

// Which of the qualitative parameter regimes applies. The singular regimes
// are named after the degenerate critical structure: a critical segment on
// an axis or the diagonal edge x+y=1, or the interior equilibrium collapsing
// onto a corner.
enum class Regime {
  Generic,          // 0 < alpha < beta, 0 < gamma < delta, D < 0
  OneNegative,      // exactly one negative raw propensity, inward flow holds
  SegmentXAxis,     // alpha = 0: every point of the x-axis is critical
  SegmentYAxis,     // gamma = 0: every point of the y-axis is critical
  SegmentBothAxes,  // alpha = gamma = 0
  EquilibriumAtCx,  // gamma = delta > 0: interior equilibrium sits at (1,0)
  EquilibriumAtCy,  // alpha = beta > 0: interior equilibrium sits at (0,1)
  SegmentDiagonal,  // alpha = beta, gamma = delta: the edge y = 1-x is critical
};

const char* to_string(Regime r);

bool is_generic(const RawParams& raw);

// Rescale raw propensities and counts into the reduced system's rates:
// alpha = N*a, beta = N*(a+b), gamma = N*c, delta = N*(c+d).
// Throws std::invalid_argument for population <= 0 or more than one
// negative propensity.
ModelParams normalize(const RawParams& raw);

// Number of indicators of a negative raw propensity in normalized terms
// (alpha < 0, gamma < 0, beta < alpha, delta < gamma).
int negative_signals(const ModelParams& p, double tol = kRegimeTol);

// Throws std::invalid_argument unless the parameters are admissible:
// at most one negative signal, and in that case beta + delta >= alpha + gamma
// (the flow then still points inward on the edge x + y = 1).
void validate_params(const ModelParams& p, double tol = kRegimeTol);

Regime classify_regime(const ModelParams& p, double tol = kRegimeTol);

// Unconditionally clamp into [0,1]^2 and rescale onto the simplex.
State project_to_simplex(double x, double y);

bool in_simplex(const State& s, double band = kDomainBand);

// Validating constructor: values within `band` of the simplex are projected
// onto it, anything further out throws std::invalid_argument.
State make_state(double x, double y, double band = kDomainBand);

// Raw polynomial right-hand side; total on the plane (no domain gating).
Deriv vector_field(const ModelParams& p, double x, double y);
Deriv vector_field(const ModelParams& p, const State& s);

}  // namespace plc
