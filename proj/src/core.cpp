#include "plc/core.hpp"

#include <algorithm>
#include <cmath>

namespace plc {

const char* to_string(Regime r) {
  switch (r) {
    case Regime::Generic: return "generic";
    case Regime::OneNegative: return "one_negative";
    case Regime::SegmentXAxis: return "segment_x_axis";
    case Regime::SegmentYAxis: return "segment_y_axis";
    case Regime::SegmentBothAxes: return "segment_both_axes";
    case Regime::EquilibriumAtCx: return "equilibrium_at_cx";
    case Regime::EquilibriumAtCy: return "equilibrium_at_cy";
    case Regime::SegmentDiagonal: return "segment_diagonal";
  }
  return "unknown";
}

bool is_generic(const RawParams& raw) {
  return raw.alpha > 0 && raw.beta > 0 && raw.gamma > 0 && raw.delta > 0;
}

ModelParams normalize(const RawParams& raw) {
  if (!(std::isfinite(raw.population) && raw.population > 0))
    throw std::invalid_argument("normalize: population must be a positive number");
  if (!(std::isfinite(raw.alpha) && std::isfinite(raw.beta) && std::isfinite(raw.gamma) &&
        std::isfinite(raw.delta)))
    throw std::invalid_argument("normalize: propensities must be finite");
  const int negatives =
      (raw.alpha < 0) + (raw.beta < 0) + (raw.gamma < 0) + (raw.delta < 0);
  if (negatives >= 2)
    throw std::invalid_argument("normalize: at most one negative propensity is supported");
  const double n = raw.population;
  ModelParams p{n * raw.alpha, n * (raw.alpha + raw.beta), n * raw.gamma,
                n * (raw.gamma + raw.delta)};
  validate_params(p);
  return p;
}

int negative_signals(const ModelParams& p, double tol) {
  int n = 0;
  if (p.alpha < -tol) ++n;
  if (p.gamma < -tol) ++n;
  if (p.beta < p.alpha - tol) ++n;
  if (p.delta < p.gamma - tol) ++n;
  return n;
}

void validate_params(const ModelParams& p, double tol) {
  if (!(std::isfinite(p.alpha) && std::isfinite(p.beta) && std::isfinite(p.gamma) &&
        std::isfinite(p.delta)))
    throw std::invalid_argument("model parameters must be finite");
  const int n = negative_signals(p, tol);
  if (n >= 2)
    throw std::invalid_argument(
        "model parameters imply more than one negative propensity; not supported");
  if (n == 1 && p.beta + p.delta < p.alpha + p.gamma - tol)
    throw std::invalid_argument(
        "inward-flow condition beta + delta >= alpha + gamma violated");
}

Regime classify_regime(const ModelParams& p, double tol) {
  validate_params(p, tol);
  if (negative_signals(p, tol) == 1) return Regime::OneNegative;

  const bool a0 = std::abs(p.alpha) <= tol;
  const bool g0 = std::abs(p.gamma) <= tol;
  const bool ab = std::abs(p.beta - p.alpha) <= tol;   // alpha == beta
  const bool gd = std::abs(p.delta - p.gamma) <= tol;  // gamma == delta

  if (a0 && g0) return Regime::SegmentBothAxes;
  if (a0 && gd) return Regime::EquilibriumAtCx;  // C = (gamma/delta, 0) -> (1,0)
  if (a0) return Regime::SegmentXAxis;
  if (g0 && ab) return Regime::EquilibriumAtCy;
  if (g0) return Regime::SegmentYAxis;
  if (ab && gd) return Regime::SegmentDiagonal;
  if (gd) return Regime::EquilibriumAtCx;
  if (ab) return Regime::EquilibriumAtCy;
  return Regime::Generic;
}

State project_to_simplex(double x, double y) {
  x = std::clamp(x, 0.0, 1.0);
  y = std::clamp(y, 0.0, 1.0);
  if (const double s = x + y; s > 1.0) {
    x /= s;
    y /= s;
  }
  return {x, y};
}

bool in_simplex(const State& s, double band) {
  return s.x >= -band && s.y >= -band && s.x <= 1 + band && s.y <= 1 + band &&
         s.x + s.y <= 1 + band;
}

State make_state(double x, double y, double band) {
  if (!(std::isfinite(x) && std::isfinite(y)))
    throw std::invalid_argument("state components must be finite");
  if (x < -band || y < -band || x > 1 + band || y > 1 + band || x + y > 1 + band)
    throw std::invalid_argument(
        "state outside the simplex: require x >= 0, y >= 0 and x + y <= 1");
  return project_to_simplex(x, y);
}

Deriv vector_field(const ModelParams& p, double x, double y) {
  return {p.alpha * x * (1 - x) - p.beta * x * y,
          p.gamma * y * (1 - y) - p.delta * x * y};
}

Deriv vector_field(const ModelParams& p, const State& s) {
  return vector_field(p, s.x, s.y);
}

}  // namespace plc
