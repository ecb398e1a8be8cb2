#include "plc/fit.hpp"
#include <cstdio>
#include <cstdlib>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "plc/random.hpp"

namespace plc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// c / (1 + exp(w)) without overflow in either tail, clamped into [0, c].
double logistic_form(double c, double w) {
  double v;
  if (w > 36.0)
    v = c * std::exp(-w);
  else if (w < -36.0)
    v = c;
  else
    v = c / (1.0 + std::exp(w));
  return std::clamp(v, 0.0, std::max(c, 0.0));
}

std::vector<double> times_of(const Dataset& data) {
  std::vector<double> t;
  t.reserve(data.points.size());
  for (const auto& pt : data.points) t.push_back(pt.t);
  return t;
}

double max_value(const Dataset& data) {
  double m = 0;
  for (const auto& pt : data.points) m = std::max(m, pt.value);
  return m;
}

bool theta_admissible(ModelFamily f, const std::vector<double>& th, bool allow_negative) {
  for (double v : th)
    if (!std::isfinite(v)) return false;
  switch (f) {
    case ModelFamily::PiotrowskiAltmann:
    case ModelFamily::AltmannK2:
      return th[0] > 0 && th[2] >= 0;
    case ModelFamily::AltmannK3:
      return th[0] >= 0;
    case ModelFamily::Plc: {
      if (th[4] < 0 || th[5] < 0 || th[4] + th[5] > 1) return false;
      const ModelParams p{th[0], th[1], th[2], th[3]};
      const int n = negative_signals(p, 0.0);
      if (n == 0) return true;
      if (!allow_negative || n > 1) return false;
      return p.beta + p.delta >= p.alpha + p.gamma;
    }
  }
  return false;
}

void project_generic_cone(double& al, double& be, double& ga, double& de) {
  al = std::max(al, 0.0);
  ga = std::max(ga, 0.0);
  if (be < al) al = be = std::max(0.0, 0.5 * (al + be));
  if (de < ga) ga = de = std::max(0.0, 0.5 * (ga + de));
}

// Pull a parameter vector back into the model's validity domain after an
// optimizer step.
void project_theta(ModelFamily f, std::vector<double>& th, bool allow_negative) {
  switch (f) {
    case ModelFamily::PiotrowskiAltmann:
    case ModelFamily::AltmannK2:
      th[0] = std::max(th[0], 1e-12);
      th[2] = std::max(th[2], 0.0);
      return;
    case ModelFamily::AltmannK3:
      th[0] = std::max(th[0], 0.0);
      return;
    case ModelFamily::Plc:
      break;
  }
  th[4] = std::clamp(th[4], 0.0, 1.0);
  th[5] = std::clamp(th[5], 0.0, 1.0);
  if (const double s = th[4] + th[5]; s > 1.0) {
    th[4] /= s;
    th[5] /= s;
  }
  double& al = th[0];
  double& be = th[1];
  double& ga = th[2];
  double& de = th[3];
  if (!allow_negative) {
    project_generic_cone(al, be, ga, de);
    return;
  }
  for (int pass = 0; pass < 6; ++pass) {
    const double viol[4] = {-al, -ga, al - be, ga - de};
    int worst = -1, count = 0;
    double worst_v = 0;
    for (int i = 0; i < 4; ++i)
      if (viol[i] > 0) {
        ++count;
        if (viol[i] > worst_v) {
          worst_v = viol[i];
          worst = i;
        }
      }
    if (count > 1) {
      // keep the dominant negative propensity, repair the others
      for (int i = 0; i < 4; ++i) {
        if (i == worst || viol[i] <= 0) continue;
        switch (i) {
          case 0: al = 0; break;
          case 1: ga = 0; break;
          case 2: al = be = 0.5 * (al + be); break;
          case 3: ga = de = 0.5 * (ga + de); break;
        }
      }
    }
    if (const double deficit = (al + ga) - (be + de); deficit > 0) {
      al -= deficit / 4;
      be += deficit / 4;
      ga -= deficit / 4;
      de += deficit / 4;
    }
    const ModelParams p{al, be, ga, de};
    if (negative_signals(p, 0.0) <= 1 && be + de >= al + ga) return;
  }
  project_generic_cone(al, be, ga, de);
}

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct LmOutcome {
  std::vector<double> theta;
  double rss = kInf;
  int iters = 0;
  bool converged = false;
  std::vector<double> history;
};

double eval_rss(ModelFamily f, const std::vector<double>& th, const Dataset& data,
                const std::vector<double>& times, const IntegrateOptions& ode,
                VectorXd* residuals) {
  try {
    const std::vector<double> curve = model_curve(f, th, times, ode);
    double rss = 0;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const double r = curve[i] - data.points[i].value;
      if (residuals) (*residuals)(Eigen::Index(i)) = r;
      rss += r * r;
    }
    return rss;
  } catch (const std::exception&) {
    return kInf;
  }
}

// Forward-difference residual Jacobian on the given coordinates; the bump
// direction is flipped where a forward bump would leave the validity domain.
MatrixXd residual_jacobian(ModelFamily f, const std::vector<double>& theta,
                           const Dataset& data, const std::vector<double>& times,
                           const std::vector<int>& coords, const VectorXd& r_base,
                           double fd_step, bool allow_negative,
                           const IntegrateOptions& ode) {
  const Eigen::Index n = Eigen::Index(data.points.size());
  MatrixXd jac(n, Eigen::Index(coords.size()));
  VectorXd rb(n);
  for (std::size_t jj = 0; jj < coords.size(); ++jj) {
    const int j = coords[jj];
    // relative step with an absolute floor, so columns of weak parameters do
    // not drown in the residual-evaluation noise
    double h = fd_step * std::max(std::abs(theta[j]), 1.0);
    std::vector<double> bumped = theta;
    bumped[j] += h;
    if (!theta_admissible(f, bumped, allow_negative)) {
      h = -h;
      bumped[j] = theta[j] + h;
    }
    const double rssb = eval_rss(f, bumped, data, times, ode, &rb);
    if (!std::isfinite(rssb)) {
      jac.col(Eigen::Index(jj)).setZero();
      continue;
    }
    jac.col(Eigen::Index(jj)) = (rb - r_base) / h;
  }
  return jac;
}

// Inward normals of the parameter-domain constraints active at theta.
std::vector<std::vector<double>> active_normals(ModelFamily f,
                                                const std::vector<double>& th,
                                                bool allow_negative) {
  constexpr double tol = 1e-11;
  std::vector<std::vector<double>> normals;
  const auto axis = [&](std::size_t p, std::size_t j, double sign) {
    std::vector<double> n(p, 0.0);
    n[j] = sign;
    return n;
  };
  switch (f) {
    case ModelFamily::PiotrowskiAltmann:
    case ModelFamily::AltmannK2:
      if (th[0] <= 2e-12) normals.push_back(axis(th.size(), 0, 1));
      if (th[2] <= tol) normals.push_back(axis(th.size(), 2, 1));
      break;
    case ModelFamily::AltmannK3:
      if (th[0] <= tol) normals.push_back(axis(th.size(), 0, 1));
      break;
    case ModelFamily::Plc: {
      if (th[0] <= tol) normals.push_back(axis(6, 0, 1));
      if (th[2] <= tol) normals.push_back(axis(6, 2, 1));
      if (th[1] - th[0] <= tol) normals.push_back({-1, 1, 0, 0, 0, 0});
      if (th[3] - th[2] <= tol) normals.push_back({0, 0, -1, 1, 0, 0});
      if (th[4] <= tol) normals.push_back(axis(6, 4, 1));
      if (th[5] <= tol) normals.push_back(axis(6, 5, 1));
      if (1 - th[4] - th[5] <= tol) normals.push_back({0, 0, 0, 0, -1, -1});
      if (allow_negative && th[1] + th[3] - th[0] - th[2] <= tol)
        normals.push_back({-1, 1, -1, 1, 0, 0});
      break;
    }
  }
  return normals;
}

LmOutcome levenberg(ModelFamily f, const Dataset& data, std::vector<double> theta,
                    const FitOptions& o) {
  const std::vector<double> times = times_of(data);
  const Eigen::Index n = Eigen::Index(data.points.size());
  std::vector<char> is_frozen(theta.size(), 0);
  for (int j : o.frozen) is_frozen[std::size_t(j)] = 1;
  std::vector<int> free_coords;
  for (std::size_t j = 0; j < theta.size(); ++j)
    if (!is_frozen[j]) free_coords.push_back(int(j));

  const auto proj = [&](std::vector<double>& th) {
    const std::vector<double> keep = th;
    project_theta(f, th, o.allow_negative);
    for (int j : o.frozen) th[std::size_t(j)] = keep[std::size_t(j)];
  };
  proj(theta);

  // candidate along a step direction: the full step if admissible, otherwise
  // the longest admissible prefix (the domain boundary acts as a wall, not as
  // a projection target)
  const auto candidate_along = [&](const std::vector<double>& base,
                                   const VectorXd& step)
      -> std::optional<std::vector<double>> {
    const auto at = [&](double s) {
      std::vector<double> th = base;
      for (std::size_t jj = 0; jj < free_coords.size(); ++jj)
        th[std::size_t(free_coords[jj])] += s * step(Eigen::Index(jj));
      return th;
    };
    auto full = at(1.0);
    if (theta_admissible(f, full, o.allow_negative)) return full;
    double lo = 0, hi = 1;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (theta_admissible(f, at(mid), o.allow_negative))
        lo = mid;
      else
        hi = mid;
    }
    if (lo > 1e-10) return at(lo);
    return std::nullopt;
  };

  // remove the outward component along each active constraint
  const auto deflect = [&](const std::vector<double>& base, VectorXd step) -> VectorXd {
    for (const auto& normal : active_normals(f, base, o.allow_negative)) {
      VectorXd nf(Eigen::Index(free_coords.size()));
      for (std::size_t jj = 0; jj < free_coords.size(); ++jj)
        nf(Eigen::Index(jj)) = normal[std::size_t(free_coords[jj])];
      const double nn = nf.squaredNorm();
      if (nn < 1e-30) continue;
      const double outward = step.dot(nf);
      if (outward < 0) step -= (outward / nn) * nf;
    }
    return step;
  };

  LmOutcome out;
  VectorXd r(n);
  double rss = eval_rss(f, theta, data, times, o.ode, &r);
  if (!std::isfinite(rss)) {
    out.theta = std::move(theta);
    return out;
  }
  out.history.push_back(rss);

  double lambda = 1e-3;
  bool converged = false;
  int iter = 0;
  for (; iter < o.max_iterations && !converged; ++iter) {
    const MatrixXd jac = residual_jacobian(f, theta, data, times, free_coords, r,
                                           o.fd_step, o.allow_negative, o.ode);
    const VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() < o.gradient_tol) {
      converged = true;
      break;
    }
    const MatrixXd hess = jac.transpose() * jac;
    const VectorXd dscale = hess.diagonal().cwiseMax(1e-12);

    const bool debug = std::getenv("PLC_FIT_DEBUG") != nullptr;
    bool accepted = false;
    for (int tries = 0; tries < 60 && !accepted; ++tries) {
      MatrixXd damped = hess;
      damped.diagonal() += lambda * dscale;
      const VectorXd step = damped.ldlt().solve(-grad);
      if (!step.allFinite()) {
        lambda = std::min(lambda * 4, 1e14);
        continue;
      }
      auto cand = candidate_along(theta, step);
      if (!cand) cand = candidate_along(theta, deflect(theta, step));
      if (!cand) {
        lambda = std::min(lambda * 4, 1e14);
        if (lambda >= 1e14) break;
        continue;
      }
      VectorXd rc(n);
      const double rssc = eval_rss(f, *cand, data, times, o.ode, &rc);
      if (debug)
        std::fprintf(stderr, "  iter %d try %d lambda %.2e |g| %.2e rss %.6e -> %.6e\n",
                     iter, tries, lambda, grad.lpNorm<Eigen::Infinity>(), rss, rssc);
      if (std::isfinite(rssc) && rssc < rss) {
        const double improvement = (rss - rssc) / std::max(rss, 1e-300);
        theta = std::move(*cand);
        r = rc;
        rss = rssc;
        out.history.push_back(rss);
        lambda = std::max(lambda / 3, 1e-12);
        accepted = true;
        if (improvement < o.rel_rss_tol || rss == 0.0) converged = true;
      } else {
        lambda = std::min(lambda * 4, 1e14);
        if (lambda >= 1e14) break;
      }
    }
    if (!accepted) break;  // damping exhausted at a flat spot
  }
  out.theta = std::move(theta);
  out.rss = rss;
  out.iters = iter;
  out.converged = converged;
  return out;
}

// Crude logistic guess: logit-transform the usable points and regress
// linearly against time.
std::vector<double> smart_start(ModelFamily f, const Dataset& data) {
  const double fmax = max_value(data);
  const double c0 = std::max(1.05 * fmax, 1e-3);
  double sum_t = 0, sum_z = 0, sum_tt = 0, sum_tz = 0;
  int m = 0;
  for (const auto& pt : data.points) {
    if (pt.value <= 0 || pt.value >= c0) continue;
    const double z = std::log(c0 / pt.value - 1.0);
    sum_t += pt.t;
    sum_z += z;
    sum_tt += pt.t * pt.t;
    sum_tz += pt.t * z;
    ++m;
  }
  double a0 = 10.0, b0 = 0.5;
  if (m >= 2) {
    const double det = m * sum_tt - sum_t * sum_t;
    if (std::abs(det) > 1e-12) {
      const double intercept = (sum_z * sum_tt - sum_t * sum_tz) / det;
      b0 = (m * sum_tz - sum_t * sum_z) / det * -1.0;
      a0 = std::exp(std::clamp(intercept, -300.0, 300.0));
    }
  }
  switch (f) {
    case ModelFamily::PiotrowskiAltmann:
      return {a0, b0, c0};
    case ModelFamily::AltmannK2:
      return {a0, b0, c0, 0.0};
    case ModelFamily::AltmannK3:
      return {c0, -std::log(a0), b0, 0.0, 0.0};
    case ModelFamily::Plc: {
      const double alpha0 = std::clamp(std::abs(b0), 1e-3, 10.0);
      const double x00 = std::clamp(c0 / (1.0 + a0), 1e-5, 0.5);
      const bool falling = data.points.back().value < data.points.front().value;
      const double y00 = falling ? 0.05 : 1e-4;
      const double gamma0 = 0.5 * alpha0 + 0.05;
      return {alpha0, 2 * alpha0 + 0.5, gamma0, 2 * gamma0 + 0.2, x00, y00};
    }
  }
  return {};
}

// Secondary guess for series with an interior maximum: seed the overtaking
// mechanism (conservatives grow until the progressive term flips sign).
std::optional<std::vector<double>> peak_start(ModelFamily f, const Dataset& data) {
  if (f != ModelFamily::Plc) return std::nullopt;
  const auto& pts = data.points;
  std::size_t pk = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (pts[i].value > pts[pk].value) pk = i;
  if (pk == 0 || pk + 1 >= pts.size()) return std::nullopt;
  if (pts[pk].value <= 1.2 * pts.back().value) return std::nullopt;

  const double f0 = std::max(pts.front().value, 1e-5);
  double alpha0 = 0.5;
  if (pts[1].value > pts[0].value && pts[0].value > 0)
    alpha0 = std::clamp(std::log(pts[1].value / pts[0].value) /
                            (pts[1].t - pts[0].t),
                        0.05, 5.0);
  double tail = 0.5;
  const auto& a = pts[pts.size() - 2];
  const auto& b = pts.back();
  if (a.value > 0 && b.value > 0 && b.value < a.value)
    tail = std::clamp(std::log(a.value / b.value) / (b.t - a.t), 0.05, 5.0);
  const double beta0 = alpha0 + tail;
  const double y00 = 1e-3;
  const double t_pk = std::max(pts[pk].t, 1.0);
  const double gamma0 =
      std::clamp(std::log(std::max(alpha0 / beta0, 2e-3) / y00) / t_pk, 0.05, 10.0);
  return std::vector<double>{alpha0, beta0, gamma0, 2 * gamma0, f0, y00};
}

std::vector<double> draw_start(ModelFamily f, const Dataset& data, Rng& rng,
                               bool allow_negative) {
  const double fmax = std::max(max_value(data), 1e-3);
  switch (f) {
    case ModelFamily::PiotrowskiAltmann:
      return {rng.log_uniform(1e-2, 1e4), rng.uniform(-3, 3),
              fmax * rng.uniform(0.5, 1.5)};
    case ModelFamily::AltmannK2:
      return {rng.log_uniform(1e-2, 1e4), rng.uniform(-3, 3),
              fmax * rng.uniform(0.5, 1.5), rng.uniform(-0.5, 0.5)};
    case ModelFamily::AltmannK3:
      return {fmax * rng.uniform(0.5, 1.5), rng.uniform(-10, 10), rng.uniform(-3, 3),
              rng.uniform(-1, 1), rng.uniform(-0.1, 0.1)};
    case ModelFamily::Plc: {
      double alpha = rng.log_uniform(1e-3, 10);
      double beta = rng.log_uniform(1e-3, 10);
      double gamma = rng.log_uniform(1e-3, 10);
      double delta = rng.log_uniform(1e-3, 10);
      if (allow_negative) {
        const double u = rng.uniform();
        if (u < 0.2)
          beta = -beta;
        else if (u < 0.4)
          delta = -delta;
      }
      return {alpha, beta, gamma, delta, rng.uniform(0, 0.2), rng.uniform(0, 0.2)};
    }
  }
  return {};
}

std::vector<double> sigma_on_coords(ModelFamily f, const std::vector<double>& theta,
                                    const Dataset& data, const std::vector<int>& coords,
                                    double fd_step, bool allow_negative,
                                    const IntegrateOptions& ode,
                                    std::vector<bool>* flagged) {
  const std::vector<double> times = times_of(data);
  const Eigen::Index n = Eigen::Index(data.points.size());
  VectorXd r(n);
  const double rss = eval_rss(f, theta, data, times, ode, &r);
  if (!std::isfinite(rss)) throw std::runtime_error("uncertainties: model evaluation failed");
  const MatrixXd jac =
      residual_jacobian(f, theta, data, times, coords, r, fd_step, allow_negative, ode);

  std::vector<std::vector<double>> jrows(static_cast<std::size_t>(n),
                                         std::vector<double>(coords.size(), 0.0));
  for (Eigen::Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < coords.size(); ++j)
      jrows[std::size_t(i)][j] = jac(i, Eigen::Index(j));
  std::vector<double> res(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) res[std::size_t(i)] = r(i);
  return sigma_from_jacobian(jrows, res, flagged);
}

}  // namespace

int parameter_count(ModelFamily f) {
  switch (f) {
    case ModelFamily::PiotrowskiAltmann: return 3;
    case ModelFamily::AltmannK2: return 4;
    case ModelFamily::AltmannK3: return 5;
    case ModelFamily::Plc: return 6;
  }
  return 0;
}

std::vector<std::string> parameter_names(ModelFamily f) {
  switch (f) {
    case ModelFamily::PiotrowskiAltmann: return {"a", "b", "c"};
    case ModelFamily::AltmannK2: return {"a", "b", "c", "d"};
    case ModelFamily::AltmannK3: return {"c", "k0", "k1", "k2", "k3"};
    case ModelFamily::Plc: return {"alpha", "beta", "gamma", "delta", "x0", "y0"};
  }
  return {};
}

const char* to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::PiotrowskiAltmann: return "pa";
    case ModelFamily::AltmannK2: return "altmann-k2";
    case ModelFamily::AltmannK3: return "altmann-k3";
    case ModelFamily::Plc: return "plc";
  }
  return "unknown";
}

std::optional<ModelFamily> family_from_string(std::string_view s) {
  if (s == "pa" || s == "piotrowski-altmann") return ModelFamily::PiotrowskiAltmann;
  if (s == "altmann-k2" || s == "k2") return ModelFamily::AltmannK2;
  if (s == "altmann-k3" || s == "k3") return ModelFamily::AltmannK3;
  if (s == "plc") return ModelFamily::Plc;
  return std::nullopt;
}

double model_eval(ModelFamily f, std::span<const double> theta, double t,
                  const IntegrateOptions& ode) {
  const double time = t;
  return model_curve(f, theta, std::span<const double>(&time, 1), ode)[0];
}

std::vector<double> model_curve(ModelFamily f, std::span<const double> theta,
                                std::span<const double> times,
                                const IntegrateOptions& ode) {
  if (int(theta.size()) != parameter_count(f))
    throw std::invalid_argument("model_curve: parameter vector size mismatch");
  std::vector<double> out;
  out.reserve(times.size());
  switch (f) {
    case ModelFamily::PiotrowskiAltmann:
      for (double t : times)
        out.push_back(logistic_form(theta[2], std::log(theta[0]) - theta[1] * t));
      return out;
    case ModelFamily::AltmannK2:
      for (double t : times)
        out.push_back(logistic_form(
            theta[2], std::log(theta[0]) - (theta[1] * t + theta[3] * t * t)));
      return out;
    case ModelFamily::AltmannK3:
      for (double t : times)
        out.push_back(logistic_form(
            theta[0],
            -(theta[1] + theta[2] * t + theta[3] * t * t + theta[4] * t * t * t)));
      return out;
    case ModelFamily::Plc: {
      const ModelParams p{theta[0], theta[1], theta[2], theta[3]};
      validate_params(p);
      const State s0 = make_state(theta[4], theta[5]);
      const std::vector<State> path = integrate_path(p, s0, times, ode);
      for (const State& s : path) out.push_back(s.x);
      return out;
    }
  }
  throw std::invalid_argument("model_curve: unknown family");
}

void validate_dataset(const Dataset& data, ModelFamily f, int free_params) {
  const int p = free_params >= 0 ? free_params : parameter_count(f);
  if (int(data.points.size()) < p + 1)
    throw std::invalid_argument(
        "dataset must contain at least (free parameters + 1) points");
  for (std::size_t i = 0; i < data.points.size(); ++i) {
    const auto& pt = data.points[i];
    if (!(std::isfinite(pt.t) && std::isfinite(pt.value)))
      throw std::invalid_argument("dataset contains non-finite entries");
    if (pt.value < 0 || pt.value > 1)
      throw std::invalid_argument("dataset values must be fractions in [0, 1]");
    if (i > 0 && pt.t <= data.points[i - 1].t)
      throw std::invalid_argument("dataset times must be strictly increasing");
    if (f == ModelFamily::Plc && pt.t < 0)
      throw std::invalid_argument("PLC fits require times >= 0");
  }
}

FitResult fit(ModelFamily f, const Dataset& data, std::optional<std::vector<double>> init,
              const FitOptions& opts) {
  const int p = parameter_count(f);
  for (int j : opts.frozen)
    if (j < 0 || j >= p) throw std::invalid_argument("fit: frozen index out of range");
  if (!opts.frozen.empty() && !init)
    throw std::invalid_argument("fit: frozen parameters require an init vector");
  if (init && int(init->size()) != p)
    throw std::invalid_argument("fit: init vector size mismatch");
  if (opts.multistart < 1) throw std::invalid_argument("fit: multistart must be >= 1");
  const int n_free = p - int(opts.frozen.size());
  validate_dataset(data, f, n_free);

  const auto apply_frozen = [&](std::vector<double>& th) {
    if (init)
      for (int j : opts.frozen) th[std::size_t(j)] = (*init)[std::size_t(j)];
  };

  std::vector<std::vector<double>> starts;
  if (init) starts.push_back(*init);
  if (int(starts.size()) < opts.multistart) {
    auto s = smart_start(f, data);
    apply_frozen(s);
    starts.push_back(std::move(s));
  }
  if (int(starts.size()) < opts.multistart) {
    if (auto s = peak_start(f, data)) {
      apply_frozen(*s);
      starts.push_back(std::move(*s));
    }
  }
  // score a wider pool of prior draws cheaply and launch from the best
  Rng rng(opts.seed);
  const int remaining = opts.multistart - int(starts.size());
  if (remaining > 0) {
    const std::vector<double> times = times_of(data);
    std::vector<std::pair<double, std::vector<double>>> pool;
    const int pool_size = std::max(50, 25 * remaining);
    for (int i = 0; i < pool_size; ++i) {
      auto s = draw_start(f, data, rng, opts.allow_negative);
      apply_frozen(s);
      project_theta(f, s, opts.allow_negative);
      apply_frozen(s);
      if (!theta_admissible(f, s, opts.allow_negative)) continue;
      const double score = eval_rss(f, s, data, times, opts.ode, nullptr);
      if (std::isfinite(score)) pool.emplace_back(score, std::move(s));
    }
    std::stable_sort(pool.begin(), pool.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (int i = 0; i < remaining && i < int(pool.size()); ++i)
      starts.push_back(std::move(pool[std::size_t(i)].second));
  }

  LmOutcome best;
  for (auto& start : starts) {
    LmOutcome run = levenberg(f, data, start, opts);
    if (run.rss < best.rss) best = std::move(run);  // ties keep the earlier start
  }
  if (!std::isfinite(best.rss))
    throw std::runtime_error("fit: no start produced a finite objective");

  FitResult result;
  result.family = f;
  result.theta = best.theta;
  result.rss = best.rss;
  result.rmse = std::sqrt(best.rss / double(data.points.size()));
  result.n_iter = best.iters;
  result.converged = best.converged;
  result.rss_history = std::move(best.history);

  std::vector<char> is_frozen(std::size_t(p), 0);
  for (int j : opts.frozen) is_frozen[std::size_t(j)] = 1;
  std::vector<int> free_coords;
  for (int j = 0; j < p; ++j)
    if (!is_frozen[std::size_t(j)]) free_coords.push_back(j);

  result.sigma.assign(std::size_t(p), 0.0);
  result.sigma_flagged.assign(std::size_t(p), false);
  if (int(data.points.size()) > n_free && n_free > 0) {
    std::vector<bool> flagged;
    const std::vector<double> sig =
        sigma_on_coords(f, result.theta, data, free_coords, opts.fd_step,
                        opts.allow_negative, opts.ode, &flagged);
    for (std::size_t jj = 0; jj < free_coords.size(); ++jj) {
      result.sigma[std::size_t(free_coords[jj])] = sig[jj];
      result.sigma_flagged[std::size_t(free_coords[jj])] = flagged[jj];
    }
  }
  if (f == ModelFamily::Plc) result.predicted_outcome = long_term_outcome(result);
  return result;
}

std::vector<double> uncertainties(ModelFamily f, std::span<const double> theta,
                                  const Dataset& data, std::vector<bool>* flagged,
                                  const IntegrateOptions& ode) {
  const int p = parameter_count(f);
  if (int(theta.size()) != p)
    throw std::invalid_argument("uncertainties: parameter vector size mismatch");
  if (int(data.points.size()) <= p)
    throw std::invalid_argument("uncertainties: need more points than parameters");
  std::vector<int> coords(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) coords[std::size_t(j)] = j;
  const std::vector<double> th(theta.begin(), theta.end());
  return sigma_on_coords(f, th, data, coords, 1e-6, true, ode, flagged);
}

std::vector<double> sigma_from_jacobian(const std::vector<std::vector<double>>& jac,
                                        std::span<const double> residuals,
                                        std::vector<bool>* flagged) {
  const std::size_t n = jac.size();
  if (n == 0) throw std::invalid_argument("sigma_from_jacobian: empty Jacobian");
  const std::size_t p = jac[0].size();
  if (residuals.size() != n)
    throw std::invalid_argument("sigma_from_jacobian: residual size mismatch");
  if (n <= p)
    throw std::invalid_argument("sigma_from_jacobian: need more residuals than parameters");

  MatrixXd J(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) J(Eigen::Index(i), Eigen::Index(j)) = jac[i][j];
  double rss = 0;
  for (double r : residuals) rss += r * r;
  const double s2 = rss / double(n - p);

  const MatrixXd H = J.transpose() * J;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
  const VectorXd lam = es.eigenvalues();
  const MatrixXd V = es.eigenvectors();
  const double lmax = std::max(lam.maxCoeff(), 0.0);
  const double thr = 1e-12 * std::max(lmax, 1e-300);

  if (flagged) flagged->assign(p, false);
  std::vector<double> sigma(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double cjj = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      if (lam(i) > thr) {
        const double v = V(Eigen::Index(j), i);
        cjj += v * v / lam(i);
      } else if (flagged && std::abs(V(Eigen::Index(j), i)) > 1e-3) {
        (*flagged)[j] = true;
      }
    }
    sigma[j] = std::sqrt(std::max(s2 * cjj, 0.0));
  }
  return sigma;
}

HoldoutResult predict_holdout(ModelFamily f, const Dataset& data, int holdout_k,
                              const FitOptions& opts) {
  const int n = int(data.points.size());
  const int p = parameter_count(f);
  if (holdout_k < 1) throw std::invalid_argument("predict_holdout: holdout must be >= 1");
  if (holdout_k >= n - p)
    throw std::invalid_argument(
        "predict_holdout: holdout must satisfy k < points - parameters");

  Dataset train;
  train.label = data.label;
  train.points.assign(data.points.begin(), data.points.end() - holdout_k);

  HoldoutResult out;
  out.fit = fit(f, train, std::nullopt, opts);

  std::vector<double> held_times;
  for (int i = n - holdout_k; i < n; ++i) held_times.push_back(data.points[i].t);
  const std::vector<double> pred = model_curve(f, out.fit.theta, held_times, opts.ode);
  for (int i = 0; i < holdout_k; ++i) {
    const auto& pt = data.points[std::size_t(n - holdout_k + i)];
    out.held_out.push_back({pt.t, pt.value, pred[std::size_t(i)],
                            pred[std::size_t(i)] - pt.value});
  }
  return out;
}

Outcome long_term_outcome(const FitResult& fit_result, const IntegrateOptions& ode) {
  if (fit_result.family != ModelFamily::Plc)
    throw std::invalid_argument("long_term_outcome: only defined for the PLC family");
  const auto& th = fit_result.theta;
  const ModelParams p{th[0], th[1], th[2], th[3]};
  validate_params(p);
  const State s0 = make_state(th[4], th[5]);
  const Fate f = fate(p, s0, ode);

  Outcome out;
  out.decided = f.kind == FateKind::Converged;
  out.target = f.target;
  out.share = f.target == PointKind::Cx ? 1.0 : f.location.x;
  if (out.share <= 1e-9)
    out.change = ChangeKind::Reversible;
  else if (out.share >= 1.0 - 1e-9)
    out.change = ChangeKind::Complete;
  else
    out.change = ChangeKind::Incomplete;
  return out;
}

}  // namespace plc
