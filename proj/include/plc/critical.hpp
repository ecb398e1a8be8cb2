// Nullclines, critical points, linear stability and the qualitative outcome
// taxonomy of the PC system.

#pragma once

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "plc/core.hpp"

namespace plc {

struct Mat2 {
  double a11 = 0, a12 = 0, a21 = 0, a22 = 0;
  double trace() const { return a11 + a22; }
  double det() const { return a11 * a22 - a12 * a21; }
};

// Closed-form eigenstructure of a real 2x2 matrix. Eigenvalues are ordered
// by descending real part; unit eigenvectors are filled in only for real,
// distinct eigenvalues.
struct Eigen2 {
  std::complex<double> lambda1, lambda2;
  bool real = true;
  bool has_vectors = false;
  std::array<double, 2> v1{}, v2{};
};

Eigen2 eigen_decompose(const Mat2& m);

enum class PointKind { C0, Cx, Cy, Interior, SegmentPoint };
enum class Stability { Source, Sink, Saddle, Degenerate };

struct CriticalPoint {
  State location;
  PointKind kind = PointKind::Interior;
  Mat2 jacobian;
  Eigen2 eigen;
  Stability stability = Stability::Degenerate;
};

// A line segment of critical points, parametrized by u in [0,1].
// When attracting_from is set, points with u > *attracting_from attract
// nearby trajectories and points with u < *attracting_from repel them.
struct CriticalSegment {
  State start, end;
  std::optional<double> attracting_from;
  State at(double u) const {
    return {start.x + u * (end.x - start.x), start.y + u * (end.y - start.y)};
  }
};

struct CriticalSet {
  std::vector<CriticalPoint> points;
  std::vector<CriticalSegment> segments;
};

// Nullcline stored as y = slope*x + intercept; degenerate when the line form
// does not exist (beta = 0 for g_x, gamma = 0 for g_y).
struct NullclineLine {
  double slope = 0, intercept = 0;
  bool degenerate = false;
  double eval(double x) const { return slope * x + intercept; }
};

struct Nullclines {
  NullclineLine g_x;  // y = (alpha/beta)(1-x), dx/dt = 0 off the axes
  NullclineLine g_y;  // y = 1 - (delta/gamma) x, dy/dt = 0 off the axes
};

// Position relative to the two nullclines (generic regime). The two trap
// sectors lie between the lines; together with the lines themselves (minus
// the equilibrium) they form the fish trap that the flow cannot leave.
enum class Sector {
  AboveBoth,      // dx/dt < 0, dy/dt < 0
  TrapTowardCy,   // above g_x, below g_y
  BelowBoth,      // dx/dt > 0, dy/dt > 0
  TrapTowardCx,   // below g_x, above g_y
  OnXNullcline,
  OnYNullcline,
  AtEquilibrium,
};

Mat2 jacobian(const ModelParams& p, const State& s);
Stability classify_stability(const Eigen2& e, double tol = kRegimeTol);
Stability classify_stability(const CriticalPoint& cp, double tol = kRegimeTol);
Nullclines nullclines(const ModelParams& p);

CriticalPoint make_critical_point(const ModelParams& p, const State& s, PointKind kind);

// All critical points of the system: the corners C0=(0,0), Cx=(1,0),
// Cy=(0,1), the interior equilibrium in the generic regime, and critical
// segments in the singular regimes.
CriticalSet critical_points(const ModelParams& p, double tol = kRegimeTol);

// Throws std::invalid_argument outside the generic regime. Points within
// `band` of a nullcline are reported as on it (the on-line bands win over
// sector assignment).
Sector sector_of(const ModelParams& p, const State& s, double band = kSectorBand);

bool in_fish_trap(Sector s);

enum class ChangeKind { Complete, Reversible, Incomplete };

struct Attractor {
  std::string name;
  ChangeKind change = ChangeKind::Incomplete;
  std::optional<double> share;  // long-term progressive share, when a single value
  std::string basin;
};

struct OutcomeReport {
  Regime regime = Regime::Generic;
  std::vector<Attractor> attractors;
  std::vector<std::string> notes;
};

// Attracting limit objects of the flow and their language-change labels,
// per parameter regime.
OutcomeReport outcome_taxonomy(const ModelParams& p, double tol = kRegimeTol);

const char* to_string(PointKind k);
const char* to_string(Stability s);
const char* to_string(Sector s);
const char* to_string(ChangeKind c);

}  // namespace plc
