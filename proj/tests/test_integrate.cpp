#include "doctest.h"

#include <cmath>
#include <vector>

#include "plc/integrate.hpp"
#include "plc/random.hpp"

using namespace plc;

namespace {

ModelParams random_generic(Rng& rng) {
  const double alpha = rng.uniform(0.3, 1.5);
  const double beta = alpha * rng.uniform(1.3, 4.0);
  const double gamma = rng.uniform(0.3, 1.5);
  const double delta = gamma * rng.uniform(1.3, 4.0);
  return {alpha, beta, gamma, delta};
}

State random_interior(Rng& rng) {
  const double x = rng.uniform(0.05, 0.9);
  const double y = rng.uniform(0.05, 0.9) * (1.0 - x);
  return make_state(x, y);
}

// closed-form solution of dx/dt = alpha x (1-x)
double logistic_exact(double alpha, double x0, double t) {
  const double b = std::log(1.0 / x0 - 1.0);
  return 1.0 / (1.0 + std::exp(-alpha * t + b));
}

double point_to_polyline(const State& s, const std::vector<State>& line) {
  double best = 1e300;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const double ax = line[i].x, ay = line[i].y;
    const double bx = line[i + 1].x, by = line[i + 1].y;
    const double ex = bx - ax, ey = by - ay;
    const double len2 = ex * ex + ey * ey;
    double u = len2 > 0 ? ((s.x - ax) * ex + (s.y - ay) * ey) / len2 : 0;
    u = std::clamp(u, 0.0, 1.0);
    best = std::min(best, std::hypot(s.x - (ax + u * ex), s.y - (ay + u * ey)));
  }
  return best;
}

}  // namespace

TEST_SUITE_BEGIN("integrate");

TEST_CASE("critical initial point stays put") {
  const Trajectory traj = integrate({1.3, 2.0, 0.9, 1.8}, {0, 0}, 100.0);
  CHECK(traj.fate.kind == FateKind::Converged);
  CHECK(traj.fate.target == PointKind::C0);
  for (const auto& s : traj.samples) {
    CHECK(s.s.x == 0.0);
    CHECK(s.s.y == 0.0);
  }
}

TEST_CASE("y0 = 0 reduces to the logistic law") {
  Rng rng(7201);
  IntegrateOptions opts;
  opts.abs_tol = opts.rel_tol = 1e-9;
  std::vector<double> times;
  for (int i = 1; i <= 100; ++i) times.push_back(0.2 * i);
  for (int trial = 0; trial < 5; ++trial) {
    const ModelParams p = random_generic(rng);
    const double x0 = rng.uniform(0.02, 0.9);
    const auto path = integrate_path(p, make_state(x0, 0.0), times, opts);
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(path[i].y == 0.0);
      CHECK(std::abs(path[i].x - logistic_exact(p.alpha, x0, times[i])) < 1e-6);
    }
  }
}

TEST_CASE("axis invariance is exact") {
  const ModelParams p{0.7, 1.9, 1.1, 2.3};
  const Trajectory on_y = integrate(p, {0.0, 0.2}, 500.0);
  for (const auto& s : on_y.samples) CHECK(s.s.x == 0.0);
  CHECK(on_y.fate.kind == FateKind::Converged);
  CHECK(on_y.fate.target == PointKind::Cy);

  const Trajectory on_x = integrate(p, {0.2, 0.0}, 500.0);
  for (const auto& s : on_x.samples) CHECK(s.s.y == 0.0);
  CHECK(on_x.fate.target == PointKind::Cx);
}

TEST_CASE("trajectory bookkeeping") {
  const Trajectory traj = integrate({1, 2, 1, 2}, {0.2, 0.1}, 1e4);
  CHECK(traj.stats.accepted > 0);
  CHECK(traj.stats.max_error_estimate > 0);
  CHECK(traj.samples.size() == std::size_t(traj.stats.accepted) + 1);
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    CHECK(traj.samples[i].t > traj.samples[i - 1].t);
    CHECK(in_simplex(traj.samples[i].s));
  }
  // symmetric parameters, x0 > y0: the progressive side wins
  CHECK(traj.fate.kind == FateKind::Converged);
  CHECK(traj.fate.target == PointKind::Cx);
}

TEST_CASE("interior seeds converge to a boundary sink") {
  Rng rng(7202);
  for (int i = 0; i < 10; ++i) {
    const ModelParams p = random_generic(rng);
    const auto [f, traj] = fate_with_trajectory(p, random_interior(rng));
    REQUIRE(f.kind == FateKind::Converged);
    CHECK((f.target == PointKind::Cx || f.target == PointKind::Cy));
    CHECK(f.distance_at_end < 1e-6);
    CHECK(f.field_norm_at_end < 1e-6);
  }
}

TEST_CASE("diagonal-segment regime converges onto the segment") {
  const Fate f = fate({1, 1, 1, 1}, make_state(0.3, 0.2));
  REQUIRE(f.kind == FateKind::Converged);
  CHECK(f.target == PointKind::SegmentPoint);
  CHECK(std::abs(f.location.x + f.location.y - 1.0) < 1e-9);
}

TEST_CASE("slow flow escapes the largest horizon honestly") {
  // alpha = 5e-5 on the conservative-free axis: by t = 1e5 the logistic rise
  // from x0 = 0.01 has only reached ~0.6, far from any critical point
  const ModelParams p{5e-5, 1.0, 0.5, 1.0};
  const Fate f = fate(p, make_state(0.01, 0.0));
  CHECK(f.kind == FateKind::Undecided);
  CHECK(f.t_end == doctest::Approx(1e5).epsilon(1e-6));
  CHECK(f.distance_at_end > 0.01);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(integrate({1, 2, 1, 2}, {0.2, 0.1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate({1, 2, 1, 2}, {0.2, 0.1}, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(integrate({1, 2, 1, 2}, {0.8, 0.8}, 1.0), std::invalid_argument);
  IntegrateOptions bad;
  bad.abs_tol = 0;
  CHECK_THROWS_AS(integrate({1, 2, 1, 2}, {0.2, 0.1}, 1.0, bad), std::invalid_argument);
}

TEST_CASE("unreachable tolerance underflows the step size") {
  IntegrateOptions opts;
  opts.abs_tol = opts.rel_tol = 1e-300;
  CHECK_THROWS_AS(integrate({1, 2, 1, 2}, {0.2, 0.1}, 1.0, opts), StepSizeUnderflow);
}

TEST_CASE("fish trap holds along sampled trajectories") {
  Rng rng(7203);
  IntegrateOptions opts;
  opts.abs_tol = opts.rel_tol = 1e-10;
  for (int i = 0; i < 20; ++i) {
    const ModelParams p = random_generic(rng);
    for (int k = 0; k < 3; ++k) {
      const auto [f, traj] = fate_with_trajectory(p, random_interior(rng), opts);
      bool entered = false;
      for (const auto& s : traj.samples) {
        const Sector sec = sector_of(p, s.s);
        if (entered) {
          CHECK(in_fish_trap(sec));
          if (!in_fish_trap(sec)) return;  // stop at first counterexample
        } else if (in_fish_trap(sec)) {
          entered = true;
        }
      }
    }
  }
}

TEST_CASE("both components fall while a trajectory stays above both nullclines") {
  const ModelParams p{1, 2, 1, 2};
  const Trajectory traj = integrate(p, {0.05, 0.93}, 50.0);
  REQUIRE(sector_of(p, traj.samples.front().s) == Sector::AboveBoth);
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    if (sector_of(p, traj.samples[i].s) != Sector::AboveBoth) break;
    CHECK(traj.samples[i].s.x <= traj.samples[i - 1].s.x);
    CHECK(traj.samples[i].s.y <= traj.samples[i - 1].s.y);
  }
}

TEST_CASE("halving the tolerance barely moves the final state") {
  const ModelParams p{0.9, 2.1, 0.7, 1.9};
  IntegrateOptions coarse;
  coarse.abs_tol = coarse.rel_tol = 1e-8;
  coarse.detect_fate = false;
  IntegrateOptions fine = coarse;
  fine.abs_tol = fine.rel_tol = 5e-9;
  const Trajectory a = integrate(p, {0.3, 0.2}, 30.0, coarse);
  const Trajectory b = integrate(p, {0.3, 0.2}, 30.0, fine);
  const double diff = std::hypot(a.samples.back().s.x - b.samples.back().s.x,
                                 a.samples.back().s.y - b.samples.back().s.y);
  CHECK(diff < 10 * 5e-9);
}

TEST_CASE("integrate_path validates its time grid") {
  const ModelParams p{1, 2, 1, 2};
  const std::vector<double> bad1{1.0, 1.0};
  CHECK_THROWS_AS(integrate_path(p, {0.1, 0.1}, bad1), std::invalid_argument);
  const std::vector<double> bad2{-1.0, 1.0};
  CHECK_THROWS_AS(integrate_path(p, {0.1, 0.1}, bad2), std::invalid_argument);
  const std::vector<double> ok{0.0, 0.5, 2.0};
  const auto path = integrate_path(p, {0.1, 0.1}, ok);
  CHECK(path.size() == 3);
  CHECK(path[0].x == doctest::Approx(0.1));
}

TEST_CASE("separatrix: symmetric parameters give a symmetric separatrix") {
  const auto branches = trace_separatrix(ModelParams{1, 2, 1, 2}, 4.0);
  REQUIRE(branches[0].size() > 10);
  REQUIRE(branches[1].size() > 10);
  // swapping (x,y) maps the separatrix onto itself (here it is the diagonal,
  // so each branch maps to itself)
  for (std::size_t side = 0; side < 2; ++side) {
    for (std::size_t i = 0; i < branches[side].size(); i += 7) {
      const State mirrored{branches[side][i].y, branches[side][i].x};
      const double d = std::min(point_to_polyline(mirrored, branches[0]),
                                point_to_polyline(mirrored, branches[1]));
      CHECK(d < 1e-4);
    }
  }
}

TEST_CASE("separatrix: seeds straddling a branch reach opposite sinks") {
  const ModelParams p{0.8, 2.4, 1.1, 2.6};
  const auto branches = trace_separatrix(p, 4.0);
  int probes = 0;
  for (const auto& branch : branches) {
    for (std::size_t i = branch.size() / 3; i + 1 < branch.size(); ++i) {
      const State a = branch[i];
      const State b = branch[i + 1];
      if (a.x < 0.05 || a.y < 0.05 || a.x + a.y > 0.95) continue;
      const double tx = b.x - a.x, ty = b.y - a.y;
      const double n = std::hypot(tx, ty);
      if (n == 0) continue;
      const double nx = -ty / n, ny = tx / n;
      const Fate left = fate(p, make_state(a.x + 1e-3 * nx, a.y + 1e-3 * ny));
      const Fate right = fate(p, make_state(a.x - 1e-3 * nx, a.y - 1e-3 * ny));
      REQUIRE(left.kind == FateKind::Converged);
      REQUIRE(right.kind == FateKind::Converged);
      CHECK(left.target != right.target);
      ++probes;
      break;  // one probe per branch
    }
  }
  CHECK(probes >= 1);
}

TEST_CASE("separatrix: seed exactly at the saddle is stationary") {
  const ModelParams p{1, 2, 1, 2};
  const Trajectory traj = integrate(p, make_state(1.0 / 3, 1.0 / 3), 10.0);
  CHECK(traj.fate.kind == FateKind::Converged);
  CHECK(traj.fate.target == PointKind::Interior);
  CHECK(traj.samples.back().s.x == doctest::Approx(1.0 / 3));
}

TEST_CASE("separatrix requires the generic regime") {
  CHECK_THROWS_AS(trace_separatrix(ModelParams{0, 2, 1, 2}, 4.0), std::invalid_argument);
}

TEST_CASE("falsify_periodicity: no recurrences on representative runs") {
  const PeriodicityReport a = falsify_periodicity({1, 2, 1, 2}, {0.2, 0.1}, 1e3);
  CHECK_FALSE(a.periodic_suspected());

  // one-negative fitted example: rise-then-decay, no periodicity
  const ModelParams epi{0.1076, 2.3732, 0.0377, -1.1806};
  const PeriodicityReport b = falsify_periodicity(epi, {0.0618, 0.0001}, 2e3);
  CHECK_FALSE(b.periodic_suspected());
}

TEST_CASE("falsify_periodicity rejects critical or boundary seeds") {
  CHECK_THROWS_AS(falsify_periodicity({1, 2, 1, 2}, {0, 0}, 100.0), std::invalid_argument);
  CHECK_THROWS_AS(falsify_periodicity({1, 2, 1, 2}, {0.5, 0.0}, 100.0),
                  std::invalid_argument);
  // interior equilibrium of the symmetric system
  CHECK_THROWS_AS(falsify_periodicity({1, 2, 1, 2}, {1.0 / 3, 1.0 / 3}, 100.0),
                  std::invalid_argument);
}

TEST_CASE("one-negative example: single rise then decay toward extinction") {
  const ModelParams epi{0.1076, 2.3732, 0.0377, -1.1806};
  const auto [f, traj] = fate_with_trajectory(epi, make_state(0.0618, 0.0001));
  REQUIRE(f.kind == FateKind::Converged);
  CHECK(f.target == PointKind::Cy);
  int sign_changes = 0;
  int prev_sign = 0;
  for (const auto& s : traj.samples) {
    const Deriv d = vector_field(epi, s.s);
    const int sign = d.dx > 1e-14 ? 1 : (d.dx < -1e-14 ? -1 : 0);
    if (sign != 0) {
      if (prev_sign != 0 && sign != prev_sign) ++sign_changes;
      prev_sign = sign;
    }
  }
  CHECK(sign_changes == 1);
  CHECK(traj.samples.back().s.x < 1e-4);
}

TEST_SUITE_END();
