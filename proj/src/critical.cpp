#include "plc/critical.hpp"

#include <algorithm>
#include <cmath>

namespace plc {

namespace {

std::array<double, 2> eigenvector_for(const Mat2& m, double lambda) {
  // Either row of (A - lambda*I) annihilates the eigenvector; build it from
  // whichever construction is better conditioned.
  const std::array<double, 2> a{m.a12, lambda - m.a11};
  const std::array<double, 2> b{lambda - m.a22, m.a21};
  const double na = std::hypot(a[0], a[1]);
  const double nb = std::hypot(b[0], b[1]);
  std::array<double, 2> v = na >= nb ? a : b;
  const double n = std::max(na, nb);
  if (n == 0) return {1.0, 0.0};  // A = lambda*I, any direction works
  v[0] /= n;
  v[1] /= n;
  // deterministic orientation
  const double lead = std::abs(v[0]) >= std::abs(v[1]) ? v[0] : v[1];
  if (lead < 0) {
    v[0] = -v[0];
    v[1] = -v[1];
  }
  return v;
}

}  // namespace

Eigen2 eigen_decompose(const Mat2& m) {
  const double tr = m.trace();
  const double det = m.det();
  const double disc = tr * tr - 4 * det;
  Eigen2 e;
  if (disc >= 0) {
    const double s = std::sqrt(disc);
    const double l1 = (tr + s) / 2;
    const double l2 = (tr - s) / 2;
    e.lambda1 = l1;
    e.lambda2 = l2;
    e.real = true;
    if (s > 0) {
      e.has_vectors = true;
      e.v1 = eigenvector_for(m, l1);
      e.v2 = eigenvector_for(m, l2);
    }
  } else {
    const double im = std::sqrt(-disc) / 2;
    e.lambda1 = {tr / 2, im};
    e.lambda2 = {tr / 2, -im};
    e.real = false;
  }
  return e;
}

Mat2 jacobian(const ModelParams& p, const State& s) {
  return {p.alpha - 2 * p.alpha * s.x - p.beta * s.y, -p.beta * s.x,
          -p.delta * s.y, p.gamma - 2 * p.gamma * s.y - p.delta * s.x};
}

Stability classify_stability(const Eigen2& e, double tol) {
  if (std::abs(e.lambda1) < tol || std::abs(e.lambda2) < tol)
    return Stability::Degenerate;
  const double r1 = e.lambda1.real();
  const double r2 = e.lambda2.real();
  if (r1 < 0 && r2 < 0) return Stability::Sink;
  if (r1 > 0 && r2 > 0) return Stability::Source;
  if (e.real && r1 * r2 < 0) return Stability::Saddle;
  return Stability::Degenerate;  // centers and zero-real-part pairs
}

Stability classify_stability(const CriticalPoint& cp, double tol) {
  return classify_stability(cp.eigen, tol);
}

Nullclines nullclines(const ModelParams& p) {
  Nullclines nc;
  if (std::abs(p.beta) <= kRegimeTol) {
    nc.g_x.degenerate = true;
  } else {
    nc.g_x.slope = -p.alpha / p.beta;
    nc.g_x.intercept = p.alpha / p.beta;
  }
  if (std::abs(p.gamma) <= kRegimeTol) {
    nc.g_y.degenerate = true;
  } else {
    nc.g_y.slope = -p.delta / p.gamma;
    nc.g_y.intercept = 1.0;
  }
  return nc;
}

CriticalPoint make_critical_point(const ModelParams& p, const State& s, PointKind kind) {
  CriticalPoint cp;
  cp.location = s;
  cp.kind = kind;
  cp.jacobian = jacobian(p, s);
  cp.eigen = eigen_decompose(cp.jacobian);
  cp.stability = classify_stability(cp.eigen);
  return cp;
}

CriticalSet critical_points(const ModelParams& p, double tol) {
  const Regime regime = classify_regime(p, tol);
  CriticalSet set;
  set.points.push_back(make_critical_point(p, {0, 0}, PointKind::C0));
  set.points.push_back(make_critical_point(p, {1, 0}, PointKind::Cx));
  set.points.push_back(make_critical_point(p, {0, 1}, PointKind::Cy));

  if (regime == Regime::Generic) {
    const double d = p.D();
    const State c{p.gamma * (p.alpha - p.beta) / d, p.alpha * (p.gamma - p.delta) / d};
    set.points.push_back(make_critical_point(p, c, PointKind::Interior));
  }

  // Critical segments follow from vanishing parameters, independently of the
  // regime tag: alpha = 0 freezes the x-axis, gamma = 0 the y-axis, and
  // alpha = beta together with gamma = delta the diagonal edge.
  const bool a0 = std::abs(p.alpha) <= tol;
  const bool g0 = std::abs(p.gamma) <= tol;
  const bool ab = std::abs(p.beta - p.alpha) <= tol;
  const bool gd = std::abs(p.delta - p.gamma) <= tol;
  if (a0 && regime != Regime::OneNegative) {
    CriticalSegment seg{{0, 0}, {1, 0}, std::nullopt};
    if (p.delta > tol) seg.attracting_from = std::clamp(p.gamma / p.delta, 0.0, 1.0);
    set.segments.push_back(seg);
  }
  if (g0 && regime != Regime::OneNegative) {
    CriticalSegment seg{{0, 0}, {0, 1}, std::nullopt};
    if (p.beta > tol) seg.attracting_from = std::clamp(p.alpha / p.beta, 0.0, 1.0);
    set.segments.push_back(seg);
  }
  if (ab && gd && !a0 && !g0) {
    set.segments.push_back(CriticalSegment{{1, 0}, {0, 1}, 0.0});
  }
  return set;
}

Sector sector_of(const ModelParams& p, const State& s, double band) {
  if (classify_regime(p) != Regime::Generic)
    throw std::invalid_argument("sector_of: sectors are defined only in the generic regime");
  const Nullclines nc = nullclines(p);
  const double dx = s.y - nc.g_x.eval(s.x);  // > 0: above g_x
  const double dy = s.y - nc.g_y.eval(s.x);  // > 0: above g_y
  const bool on_gx = std::abs(dx) <= band;
  const bool on_gy = std::abs(dy) <= band;
  if (on_gx && on_gy) return Sector::AtEquilibrium;
  if (on_gx) return Sector::OnXNullcline;
  if (on_gy) return Sector::OnYNullcline;
  if (dx > 0 && dy > 0) return Sector::AboveBoth;
  if (dx > 0) return Sector::TrapTowardCy;
  if (dy > 0) return Sector::TrapTowardCx;
  return Sector::BelowBoth;
}

bool in_fish_trap(Sector s) {
  return s == Sector::TrapTowardCy || s == Sector::TrapTowardCx ||
         s == Sector::OnXNullcline || s == Sector::OnYNullcline;
}

namespace {

Attractor point_attractor(const char* name, ChangeKind change, double share,
                          std::string basin) {
  Attractor a;
  a.name = name;
  a.change = change;
  a.share = share;
  a.basin = std::move(basin);
  return a;
}

// Sign-quadrant survey for the one-negative regime, where the interior
// equilibrium lies outside the simplex and only some sectors intersect it.
std::vector<std::string> surviving_sectors(const ModelParams& p) {
  const Nullclines nc = nullclines(p);
  if (nc.g_x.degenerate || nc.g_y.degenerate) return {};
  bool seen[4] = {false, false, false, false};
  const int n = 24;
  for (int i = 1; i < n; ++i) {
    for (int j = 1; j < n - i; ++j) {
      const double x = double(i) / n;
      const double y = double(j) / n;
      const bool above_gx = y > nc.g_x.eval(x);
      const bool above_gy = y > nc.g_y.eval(x);
      seen[(above_gx ? 0 : 2) + (above_gy ? 0 : 1)] = true;
    }
  }
  std::vector<std::string> out;
  if (seen[0]) out.push_back("above both nullclines");
  if (seen[1]) out.push_back("above g_x, below g_y");
  if (seen[3]) out.push_back("below both nullclines");
  if (seen[2]) out.push_back("below g_x, above g_y");
  return out;
}

}  // namespace

OutcomeReport outcome_taxonomy(const ModelParams& p, double tol) {
  OutcomeReport rep;
  rep.regime = classify_regime(p, tol);
  switch (rep.regime) {
    case Regime::Generic:
      rep.attractors.push_back(point_attractor(
          "Cx", ChangeKind::Complete, 1.0, "interior basin on the Cx side of the separatrix"));
      rep.attractors.push_back(point_attractor(
          "Cy", ChangeKind::Reversible, 0.0, "interior basin on the Cy side of the separatrix"));
      rep.notes.push_back(
          "interior equilibrium C is a saddle; its attracting eigendirections form the "
          "separatrix between the two basins");
      rep.notes.push_back("C0 is a source; no trajectory ends there");
      break;

    case Regime::OneNegative: {
      // The interior equilibrium has a negative component, so the corner
      // stabilities decide; the surviving sectors are surveyed numerically.
      const Eigen2 ex = eigen_decompose(jacobian(p, {1, 0}));
      const Eigen2 ey = eigen_decompose(jacobian(p, {0, 1}));
      if (classify_stability(ex, tol) == Stability::Sink)
        rep.attractors.push_back(
            point_attractor("Cx", ChangeKind::Complete, 1.0, "determined numerically"));
      if (classify_stability(ey, tol) == Stability::Sink)
        rep.attractors.push_back(
            point_attractor("Cy", ChangeKind::Reversible, 0.0, "determined numerically"));
      std::string note = "interior equilibrium lies outside the simplex; sectors present:";
      for (const auto& s : surviving_sectors(p)) note += " [" + s + "]";
      rep.notes.push_back(note);
      break;
    }

    case Regime::SegmentXAxis: {
      const double q = p.gamma / p.delta;
      rep.attractors.push_back(point_attractor(
          "Cy", ChangeKind::Reversible, 0.0, "trajectories entering the wing toward Cy"));
      Attractor seg;
      seg.name = "x-axis points (p,0) with p > " + std::to_string(q);
      seg.change = ChangeKind::Incomplete;
      seg.basin = "trajectories staying below g_y";
      rep.attractors.push_back(seg);
      rep.notes.push_back(
          "every point of the x-axis is critical; points right of (q,0) attract, points "
          "left of it repel");
      break;
    }

    case Regime::SegmentYAxis: {
      const double q = p.alpha / p.beta;
      rep.attractors.push_back(point_attractor(
          "Cx", ChangeKind::Complete, 1.0, "trajectories entering the wing toward Cx"));
      Attractor seg;
      seg.name = "y-axis points (0,p) with p > " + std::to_string(q);
      seg.change = ChangeKind::Reversible;
      seg.basin = "trajectories staying below g_x";
      rep.attractors.push_back(seg);
      rep.notes.push_back(
          "every point of the y-axis is critical; points above (0,q) attract");
      break;
    }

    case Regime::SegmentBothAxes: {
      Attractor ax;
      ax.name = "x-axis points (p,0)";
      ax.change = ChangeKind::Incomplete;
      ax.basin = "all attracting";
      rep.attractors.push_back(ax);
      Attractor ay;
      ay.name = "y-axis points (0,p)";
      ay.change = ChangeKind::Reversible;
      ay.basin = "all attracting";
      rep.attractors.push_back(ay);
      if (p.beta > tol)
        rep.notes.push_back("trajectories run along straight lines y = (delta/beta) x + const");
      break;
    }

    case Regime::EquilibriumAtCx:
      // gamma = delta makes dy/dt = gamma*y*(1-x-y) >= 0 on the simplex, so
      // y grows along interior trajectories and they converge to Cy; only
      // the x-axis feeds Cx.
      rep.attractors.push_back(
          point_attractor("Cy", ChangeKind::Reversible, 0.0, "all interior trajectories"));
      if (p.alpha > tol) {
        rep.attractors.push_back(
            point_attractor("Cx", ChangeKind::Complete, 1.0, "x-axis only"));
      } else {
        Attractor seg;
        seg.name = "x-axis points (p,0)";
        seg.change = ChangeKind::Incomplete;
        seg.basin = "stationary on the x-axis";
        rep.attractors.push_back(seg);
      }
      rep.notes.push_back("interior equilibrium coincides with Cx and is degenerate there");
      break;

    case Regime::EquilibriumAtCy:
      rep.attractors.push_back(
          point_attractor("Cx", ChangeKind::Complete, 1.0, "all interior trajectories"));
      if (p.gamma > tol) {
        rep.attractors.push_back(
            point_attractor("Cy", ChangeKind::Reversible, 0.0, "y-axis only"));
      } else {
        Attractor seg;
        seg.name = "y-axis points (0,p)";
        seg.change = ChangeKind::Reversible;
        seg.basin = "stationary on the y-axis";
        rep.attractors.push_back(seg);
      }
      rep.notes.push_back("interior equilibrium coincides with Cy and is degenerate there");
      break;

    case Regime::SegmentDiagonal: {
      Attractor seg;
      seg.name = "diagonal points (p, 1-p)";
      seg.change = ChangeKind::Incomplete;
      seg.basin = "all interior trajectories";
      rep.attractors.push_back(seg);
      rep.notes.push_back(
          "every point of the edge y = 1-x is critical and attracting; the final split "
          "leaves no liberal speakers");
      break;
    }
  }
  return rep;
}

const char* to_string(PointKind k) {
  switch (k) {
    case PointKind::C0: return "C0";
    case PointKind::Cx: return "Cx";
    case PointKind::Cy: return "Cy";
    case PointKind::Interior: return "C";
    case PointKind::SegmentPoint: return "segment";
  }
  return "unknown";
}

const char* to_string(Stability s) {
  switch (s) {
    case Stability::Source: return "source";
    case Stability::Sink: return "sink";
    case Stability::Saddle: return "saddle";
    case Stability::Degenerate: return "degenerate";
  }
  return "unknown";
}

const char* to_string(Sector s) {
  switch (s) {
    case Sector::AboveBoth: return "above_both";
    case Sector::TrapTowardCy: return "trap_toward_cy";
    case Sector::BelowBoth: return "below_both";
    case Sector::TrapTowardCx: return "trap_toward_cx";
    case Sector::OnXNullcline: return "on_g_x";
    case Sector::OnYNullcline: return "on_g_y";
    case Sector::AtEquilibrium: return "at_equilibrium";
  }
  return "unknown";
}

const char* to_string(ChangeKind c) {
  switch (c) {
    case ChangeKind::Complete: return "complete";
    case ChangeKind::Reversible: return "reversible";
    case ChangeKind::Incomplete: return "incomplete";
  }
  return "unknown";
}

}  // namespace plc
