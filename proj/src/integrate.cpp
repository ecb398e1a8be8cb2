#include "plc/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace plc {

namespace {

struct Vec2 {
  double x = 0, y = 0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double c, Vec2 v) { return {c * v.x, c * v.y}; }
inline double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Dormand-Prince 5(4) tableau (FSAL).
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// difference between the 5th and embedded 4th order weights
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepTrial {
  Vec2 y;        // 5th order solution
  Vec2 k_end;    // derivative at the new point (FSAL)
  double ratio;  // weighted error, accept when <= 1
  double abs_err;
};

template <class RHS>
StepTrial dopri5_step(const RHS& rhs, double t, Vec2 y, double h, Vec2 k1,
                      double atol, double rtol) {
  const Vec2 k2 = rhs(t + c2 * h, y + h * (a21 * k1));
  const Vec2 k3 = rhs(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
  const Vec2 k4 = rhs(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
  const Vec2 k5 = rhs(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
  const Vec2 k6 =
      rhs(t + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
  StepTrial out;
  out.y = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
  out.k_end = rhs(t + h, out.y);
  const Vec2 err =
      h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * out.k_end);
  const double sx = atol + rtol * std::max(std::abs(y.x), std::abs(out.y.x));
  const double sy = atol + rtol * std::max(std::abs(y.y), std::abs(out.y.y));
  out.ratio = std::max(std::abs(err.x) / sx, std::abs(err.y) / sy);
  out.abs_err = std::max(std::abs(err.x), std::abs(err.y));
  return out;
}

enum class StepFlow { Continue, Stop };

struct AdaptiveSettings {
  double atol = 1e-8;
  double rtol = 1e-8;
  double h0 = 0;
  double hmin = 0;
};

// Standard PI step controller on top of the embedded pair. on_accept sees
// every accepted state (already advanced) and may stop the run.
template <class RHS, class OnAccept>
void run_adaptive(const RHS& rhs, double t0, Vec2 y0, double t_end,
                  const AdaptiveSettings& cfg, StepStats& stats, OnAccept&& on_accept) {
  constexpr double kSafety = 0.9;
  constexpr double kAlpha = 0.7 / 5.0;  // PI exponents for an order-5 pair
  constexpr double kBeta = 0.4 / 5.0;

  double t = t0;
  Vec2 y = y0;
  double h = cfg.h0;
  Vec2 k1 = rhs(t, y);
  double errold = 1.0;
  bool rejected_last = false;

  while (t < t_end) {
    if (t_end - t <= cfg.hmin) break;  // remaining sliver below resolution
    h = std::min(h, t_end - t);
    const StepTrial trial = dopri5_step(rhs, t, y, h, k1, cfg.atol, cfg.rtol);
    if (trial.ratio <= 1.0) {
      t += h;
      y = trial.y;
      k1 = trial.k_end;
      ++stats.accepted;
      stats.max_error_estimate = std::max(stats.max_error_estimate, trial.abs_err);
      if (on_accept(t, y, k1) == StepFlow::Stop) return;
      const double e = std::max(trial.ratio, 1e-10);
      double fac = kSafety * std::pow(e, -kAlpha) * std::pow(errold, kBeta);
      fac = std::clamp(fac, 0.2, 5.0);
      if (rejected_last) fac = std::min(fac, 1.0);
      h *= fac;
      errold = e;
      rejected_last = false;
    } else {
      ++stats.rejected;
      rejected_last = true;
      h *= std::clamp(kSafety * std::pow(trial.ratio, -0.2), 0.1, 0.9);
      if (h < cfg.hmin) throw StepSizeUnderflow(t, State{y.x, y.y});
    }
  }
}

// Right-hand side evaluated on the state clamped into the simplex, with
// components pinned to zero when the trajectory started on that axis.
struct ConfinedField {
  ModelParams p;
  bool lock_x = false, lock_y = false;

  Vec2 operator()(double, Vec2 v) const {
    double x = lock_x ? 0.0 : std::clamp(v.x, 0.0, 1.0);
    double y = lock_y ? 0.0 : std::clamp(v.y, 0.0, 1.0);
    if (const double s = x + y; s > 1.0) {
      x /= s;
      y /= s;
    }
    const Deriv d = vector_field(p, x, y);
    return {lock_x ? 0.0 : d.dx, lock_y ? 0.0 : d.dy};
  }
};

struct NearestCritical {
  double distance = std::numeric_limits<double>::infinity();
  PointKind kind = PointKind::Interior;
  State location;
};

NearestCritical nearest_critical(const CriticalSet& set, const State& s) {
  NearestCritical best;
  for (const auto& cp : set.points) {
    const double d = std::hypot(s.x - cp.location.x, s.y - cp.location.y);
    if (d < best.distance) best = {d, cp.kind, cp.location};
  }
  for (const auto& seg : set.segments) {
    const double ex = seg.end.x - seg.start.x;
    const double ey = seg.end.y - seg.start.y;
    const double len2 = ex * ex + ey * ey;
    double u = len2 > 0 ? ((s.x - seg.start.x) * ex + (s.y - seg.start.y) * ey) / len2 : 0;
    u = std::clamp(u, 0.0, 1.0);
    const State q = seg.at(u);
    const double d = std::hypot(s.x - q.x, s.y - q.y);
    // isolated points take precedence at equal distance
    if (d < best.distance - 1e-15) best = {d, PointKind::SegmentPoint, q};
  }
  return best;
}

double validated_horizon(double horizon) {
  if (!(std::isfinite(horizon) && horizon > 0))
    throw std::invalid_argument("horizon must be positive");
  return horizon;
}

AdaptiveSettings settings_for(double horizon, const IntegrateOptions& o) {
  if (!(o.abs_tol > 0) || !(o.rel_tol > 0))
    throw std::invalid_argument("tolerances must be positive");
  AdaptiveSettings cfg;
  cfg.atol = o.abs_tol;
  cfg.rtol = o.rel_tol;
  cfg.h0 = o.initial_step > 0 ? o.initial_step : horizon * 1e-4;
  cfg.hmin = o.min_step_factor * horizon;
  return cfg;
}

}  // namespace

StepSizeUnderflow::StepSizeUnderflow(double t_, const State& s_)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "step size underflow at t = " << t_ << ", state (" << s_.x << ", " << s_.y
           << ")";
        return os.str();
      }()),
      t(t_),
      state(s_) {}

Trajectory integrate(const ModelParams& p, const State& s0, double horizon,
                     const IntegrateOptions& opts) {
  validate_params(p);
  if (!in_simplex(s0)) throw std::invalid_argument("integrate: s0 outside the simplex");
  validated_horizon(horizon);
  const AdaptiveSettings cfg = settings_for(horizon, opts);

  const State start = project_to_simplex(s0.x, s0.y);
  const ConfinedField rhs{p, start.x == 0.0, start.y == 0.0};

  Trajectory traj;
  traj.params = p;
  traj.samples.push_back({0.0, start});

  const CriticalSet critical = critical_points(p);
  const double eps = opts.convergence_radius;

  auto fate_probe = [&](double t, const State& s, const Vec2& f) {
    const double fn = std::hypot(f.x, f.y);
    const NearestCritical near = nearest_critical(critical, s);
    traj.fate.location = near.location;
    traj.fate.target = near.kind;
    traj.fate.distance_at_end = near.distance;
    traj.fate.field_norm_at_end = fn;
    traj.fate.t_end = t;
    if (opts.detect_fate && near.distance < eps && fn < eps) {
      traj.fate.kind = FateKind::Converged;
      return true;
    }
    return false;
  };

  {
    const Vec2 f0 = rhs(0.0, {start.x, start.y});
    if (fate_probe(0.0, start, f0)) return traj;
  }

  run_adaptive(rhs, 0.0, {start.x, start.y}, horizon, cfg, traj.stats,
               [&](double t, Vec2& y, Vec2& k1) {
                 if (rhs.lock_x) y.x = 0;
                 if (rhs.lock_y) y.y = 0;
                 const State s = project_to_simplex(y.x, y.y);
                 if (s.x != y.x || s.y != y.y) {
                   y = {s.x, s.y};
                   k1 = rhs(t, y);  // keep the FSAL derivative consistent
                 }
                 traj.samples.push_back({t, s});
                 return fate_probe(t, s, k1) ? StepFlow::Stop : StepFlow::Continue;
               });
  return traj;
}

std::vector<State> integrate_path(const ModelParams& p, const State& s0,
                                  std::span<const double> times,
                                  const IntegrateOptions& opts) {
  validate_params(p);
  if (!in_simplex(s0)) throw std::invalid_argument("integrate_path: s0 outside the simplex");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(std::isfinite(times[i]) && times[i] >= 0))
      throw std::invalid_argument("integrate_path: times must be finite and >= 0");
    if (i > 0 && times[i] <= times[i - 1])
      throw std::invalid_argument("integrate_path: times must be strictly increasing");
  }
  std::vector<State> out;
  out.reserve(times.size());
  if (times.empty()) return out;

  const State start = project_to_simplex(s0.x, s0.y);
  const ConfinedField rhs{p, start.x == 0.0, start.y == 0.0};
  const double span = times.back() > 0 ? times.back() : 1.0;
  AdaptiveSettings cfg = settings_for(span, opts);

  double t = 0;
  Vec2 y{start.x, start.y};
  StepStats stats;
  for (const double target : times) {
    if (target > t + cfg.hmin) {
      run_adaptive(rhs, t, y, target, cfg, stats, [&](double, Vec2& yy, Vec2& k1) {
        if (rhs.lock_x) yy.x = 0;
        if (rhs.lock_y) yy.y = 0;
        const State s = project_to_simplex(yy.x, yy.y);
        if (s.x != yy.x || s.y != yy.y) {
          yy = {s.x, s.y};
          k1 = rhs(0, yy);
        }
        y = yy;
        return StepFlow::Continue;
      });
      t = target;
    }
    out.push_back(State{y.x, y.y});
  }
  return out;
}

std::pair<Fate, Trajectory> fate_with_trajectory(const ModelParams& p, const State& s0,
                                                 const IntegrateOptions& opts) {
  Trajectory total;
  total.params = p;
  IntegrateOptions o = opts;
  o.detect_fate = true;

  double t_base = 0;
  State cur = s0;
  for (const double horizon : kFateHorizons) {
    const double span = horizon - t_base;
    if (span <= 0) continue;
    Trajectory seg = integrate(p, cur, span, o);
    const std::size_t skip = total.samples.empty() ? 0 : 1;  // avoid duplicating t_base
    for (std::size_t i = skip; i < seg.samples.size(); ++i)
      total.samples.push_back({t_base + seg.samples[i].t, seg.samples[i].s});
    total.stats.accepted += seg.stats.accepted;
    total.stats.rejected += seg.stats.rejected;
    total.stats.max_error_estimate =
        std::max(total.stats.max_error_estimate, seg.stats.max_error_estimate);
    total.fate = seg.fate;
    total.fate.t_end += t_base;
    if (total.fate.kind == FateKind::Converged) break;
    cur = seg.samples.back().s;
    t_base += seg.samples.back().t;
  }
  return {total.fate, std::move(total)};
}

Fate fate(const ModelParams& p, const State& s0, const IntegrateOptions& opts) {
  return fate_with_trajectory(p, s0, opts).first;
}

std::array<std::vector<State>, 2> trace_separatrix(const ModelParams& p,
                                                   const SeparatrixOptions& opts) {
  if (classify_regime(p) != Regime::Generic)
    throw std::invalid_argument("trace_separatrix: requires the generic regime");
  const CriticalSet set = critical_points(p);
  const CriticalPoint* saddle = nullptr;
  for (const auto& cp : set.points)
    if (cp.kind == PointKind::Interior) saddle = &cp;
  if (!saddle || saddle->stability != Stability::Saddle || !saddle->eigen.has_vectors)
    throw std::runtime_error("trace_separatrix: interior equilibrium is degenerate");

  // attracting eigendirection (eigenvalues ordered by descending real part)
  const std::array<double, 2> vs = saddle->eigen.v2;
  const double lambda_neg = saddle->eigen.lambda2.real();
  const State c = saddle->location;

  const auto reversed = [&p](double, Vec2 v) {
    const Deriv d = vector_field(p, v.x, v.y);
    return Vec2{-d.dx, -d.dy};
  };

  // long enough for the reversed flow to escape the linear neighbourhood
  const double t_cap = std::max(1e3, 100.0 / std::abs(lambda_neg));
  AdaptiveSettings cfg = settings_for(t_cap, opts.ode);

  std::array<std::vector<State>, 2> branches;
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? 1.0 : -1.0;
    Vec2 y{c.x + sign * opts.offset * vs[0], c.y + sign * opts.offset * vs[1]};
    auto& line = branches[side];
    line.push_back(State{y.x, y.y});
    double arc = 0;
    Vec2 prev = y;
    StepStats stats;
    run_adaptive(reversed, 0.0, y, t_cap, cfg, stats, [&](double, Vec2& yy, Vec2& k1) {
      const double band = 1e-12;
      if (yy.x < -band || yy.y < -band || yy.x + yy.y > 1 + band) {
        // clip the exiting segment to the simplex boundary
        double s_hit = 1.0;
        const double dx = yy.x - prev.x, dy = yy.y - prev.y;
        if (yy.x < 0 && dx < 0) s_hit = std::min(s_hit, (0 - prev.x) / dx);
        if (yy.y < 0 && dy < 0) s_hit = std::min(s_hit, (0 - prev.y) / dy);
        if (yy.x + yy.y > 1 && dx + dy > 0)
          s_hit = std::min(s_hit, (1 - prev.x - prev.y) / (dx + dy));
        s_hit = std::clamp(s_hit, 0.0, 1.0);
        line.push_back(
            project_to_simplex(prev.x + s_hit * dx, prev.y + s_hit * dy));
        return StepFlow::Stop;
      }
      arc += dist(prev, yy);
      prev = yy;
      line.push_back(State{yy.x, yy.y});
      if (arc >= opts.arc_budget) return StepFlow::Stop;
      if (std::hypot(k1.x, k1.y) < 1e-10) return StepFlow::Stop;  // reversed sink
      return StepFlow::Continue;
    });
  }
  return branches;
}

std::array<std::vector<State>, 2> trace_separatrix(const ModelParams& p,
                                                   double arc_length_budget) {
  SeparatrixOptions o;
  o.arc_budget = arc_length_budget;
  return trace_separatrix(p, o);
}

PeriodicityReport falsify_periodicity(const ModelParams& p, const State& s0,
                                      double horizon, const IntegrateOptions& opts) {
  validate_params(p);
  validated_horizon(horizon);
  const double band = kDomainBand;
  if (!(s0.x > band && s0.y > band && s0.x + s0.y < 1 - band))
    throw std::invalid_argument("falsify_periodicity: s0 must be interior to the simplex");
  const Deriv f0 = vector_field(p, s0);
  const double f0n = std::hypot(f0.dx, f0.dy);
  if (f0n < 1e-12)
    throw std::invalid_argument("falsify_periodicity: s0 is a critical point");

  // section through s0, orthogonal to the initial velocity
  const double vx = f0.dx / f0n, vy = f0.dy / f0n;   // flow direction
  const double tx = -vy, ty = vx;                    // along the section
  const auto phi = [&](const State& s) { return (s.x - s0.x) * vx + (s.y - s0.y) * vy; };
  const auto sec = [&](const State& s) { return (s.x - s0.x) * tx + (s.y - s0.y) * ty; };

  PeriodicityReport rep;
  rep.crossings.push_back({0.0, 0.0});

  const State start = project_to_simplex(s0.x, s0.y);
  const ConfinedField rhs{p, false, false};
  const AdaptiveSettings cfg = settings_for(horizon, opts);

  const CriticalSet critical = critical_points(p);
  const double eps = opts.convergence_radius;

  double t_prev = 0;
  State prev = start;
  double phi_prev = 0;
  StepStats stats;
  run_adaptive(rhs, 0.0, {start.x, start.y}, horizon, cfg, stats,
               [&](double t, Vec2& y, Vec2& k1) {
                 const State s = project_to_simplex(y.x, y.y);
                 y = {s.x, s.y};
                 const double ph = phi(s);
                 if (phi_prev < 0 && ph >= 0 && t_prev > 0) {
                   // same-direction section passage; locate it linearly
                   const double w = ph - phi_prev != 0 ? -phi_prev / (ph - phi_prev) : 0;
                   const State cross{prev.x + w * (s.x - prev.x),
                                     prev.y + w * (s.y - prev.y)};
                   const double tc = t_prev + w * (t - t_prev);
                   const double u = sec(cross);
                   const auto& cs = rep.crossings;
                   if (cs.size() >= 2) {
                     const double d_new = std::abs(u - cs.back().offset);
                     const double d_old =
                         std::abs(cs.back().offset - cs[cs.size() - 2].offset);
                     if (d_new >= d_old * (1 - 1e-6)) {
                       for (std::size_t j = 0; j < cs.size(); ++j) {
                         const double gap = std::abs(u - cs[j].offset);
                         if (gap < 1e-4) {
                           rep.recurrences.push_back({tc, gap, j});
                           break;
                         }
                       }
                     }
                   }
                   rep.crossings.push_back({tc, u});
                 }
                 phi_prev = ph;
                 prev = s;
                 t_prev = t;
                 // stop once the trajectory has settled on a critical object
                 const double fn = std::hypot(k1.x, k1.y);
                 if (fn < eps && nearest_critical(critical, s).distance < eps)
                   return StepFlow::Stop;
                 return StepFlow::Continue;
               });
  return rep;
}

}  // namespace plc
