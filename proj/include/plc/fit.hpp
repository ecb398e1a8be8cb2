// Nonlinear least-squares fitting of usage-fraction time series against four
// model families: three closed-form logistic laws and the PC system itself.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "plc/core.hpp"
#include "plc/critical.hpp"
#include "plc/integrate.hpp"

namespace plc {

struct DataPoint {
  double t = 0;
  double value = 0;
};

struct Dataset {
  std::vector<DataPoint> points;
  std::string label;
};

// Parameter vectors (in order):
//   PiotrowskiAltmann  f(t) = c / (1 + a e^{-b t})                  [a, b, c]
//   AltmannK2          f(t) = c / (1 + a e^{-(b t + d t^2)})        [a, b, c, d]
//   AltmannK3          f(t) = c / (1 + e^{-(k0+k1 t+k2 t^2+k3 t^3)})[c, k0..k3]
//   Plc                x(t) of the PC system                        [alpha, beta,
//                                                                    gamma, delta, x0, y0]
enum class ModelFamily { PiotrowskiAltmann, AltmannK2, AltmannK3, Plc };

int parameter_count(ModelFamily f);
std::vector<std::string> parameter_names(ModelFamily f);
const char* to_string(ModelFamily f);
std::optional<ModelFamily> family_from_string(std::string_view s);

struct Outcome {
  ChangeKind change = ChangeKind::Incomplete;
  double share = 0;  // long-term progressive fraction
  PointKind target = PointKind::Interior;
  bool decided = true;  // false if integration hit the horizon first
};

struct FitOptions {
  int multistart = 8;          // total number of starts (user init and the
                               // data-informed start count toward it)
  std::uint64_t seed = 12345;
  bool allow_negative = false; // permit the one-negative PLC regime
  int max_iterations = 500;
  double rel_rss_tol = 1e-10;
  double gradient_tol = 1e-8;
  double fd_step = 1e-6;       // relative forward-difference step
  std::vector<int> frozen;     // indices held at their init values
  IntegrateOptions ode{.abs_tol = 1e-12, .rel_tol = 1e-12, .detect_fate = false};
};

struct FitResult {
  ModelFamily family = ModelFamily::PiotrowskiAltmann;
  std::vector<double> theta;
  std::vector<double> sigma;        // standard errors (0 for frozen entries)
  std::vector<bool> sigma_flagged;  // parameter unconstrained at the optimum
  double rss = 0;
  double rmse = 0;
  int n_iter = 0;
  bool converged = false;
  std::vector<double> rss_history;  // accepted-step objective values
  std::optional<Outcome> predicted_outcome;  // PLC only
};

double model_eval(ModelFamily f, std::span<const double> theta, double t,
                  const IntegrateOptions& ode = {});
std::vector<double> model_curve(ModelFamily f, std::span<const double> theta,
                                std::span<const double> times,
                                const IntegrateOptions& ode = {});

inline double model_eval(ModelFamily f, std::initializer_list<double> theta, double t,
                         const IntegrateOptions& ode = {}) {
  return model_eval(f, std::span<const double>(theta.begin(), theta.size()), t, ode);
}
inline std::vector<double> model_curve(ModelFamily f, std::initializer_list<double> theta,
                                       std::span<const double> times,
                                       const IntegrateOptions& ode = {}) {
  return model_curve(f, std::span<const double>(theta.begin(), theta.size()), times, ode);
}

// Throws std::invalid_argument for non-finite or out-of-range values,
// non-increasing times, or fewer points than free parameters + 1.
void validate_dataset(const Dataset& data, ModelFamily f, int free_params = -1);

// Damped Gauss-Newton (Levenberg-style) minimization of the residual sum of
// squares, with multistart over documented priors. Deterministic for a given
// seed. Non-convergence is flagged, with the best iterate returned.
FitResult fit(ModelFamily f, const Dataset& data,
              std::optional<std::vector<double>> init = std::nullopt,
              const FitOptions& opts = {});

// sigma_j = sqrt(s^2 [(J^T J)^-1]_jj) at theta, s^2 = rss/(n-p). Directions
// in which J^T J is singular (relative 1e-12) are dropped via the
// pseudo-inverse and the involved parameters flagged.
std::vector<double> uncertainties(ModelFamily f, std::span<const double> theta,
                                  const Dataset& data,
                                  std::vector<bool>* flagged = nullptr,
                                  const IntegrateOptions& ode = {});

// Shared covariance computation on an explicit residual Jacobian (n x p).
std::vector<double> sigma_from_jacobian(const std::vector<std::vector<double>>& jac,
                                        std::span<const double> residuals,
                                        std::vector<bool>* flagged = nullptr);

struct HoldoutPoint {
  double t = 0, observed = 0, predicted = 0, residual = 0;
};

struct HoldoutResult {
  FitResult fit;  // fit on the first n - k points
  std::vector<HoldoutPoint> held_out;
};

HoldoutResult predict_holdout(ModelFamily f, const Dataset& data, int holdout_k,
                              const FitOptions& opts = {});

// Long-term language-change label of a fitted PC system, decided by the fate
// of the trajectory from (x0, y0).
Outcome long_term_outcome(const FitResult& fit_result, const IntegrateOptions& ode = {});

}  // namespace plc
