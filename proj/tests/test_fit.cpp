#include "doctest.h"

#include <cmath>
#include <vector>

#include "plc/fit.hpp"
#include "plc/random.hpp"

using namespace plc;

namespace {

Dataset logistic_dataset(double a, double b, double c, int n) {
  Dataset d;
  d.label = "logistic";
  for (int t = 0; t < n; ++t)
    d.points.push_back({double(t), c / (1.0 + a * std::exp(-b * t))});
  return d;
}

Dataset plc_dataset(const std::vector<double>& theta, int n, double noise_rel, Rng* rng) {
  std::vector<double> times;
  for (int t = 0; t < n; ++t) times.push_back(double(t));
  IntegrateOptions tight{.abs_tol = 1e-12, .rel_tol = 1e-12, .detect_fate = false};
  const std::vector<double> values = model_curve(ModelFamily::Plc, theta, times, tight);
  Dataset d;
  d.label = "synthetic";
  for (int t = 0; t < n; ++t) {
    double v = values[std::size_t(t)];
    if (rng) v = std::clamp(v * (1.0 + noise_rel * rng->gaussian()), 0.0, 1.0);
    d.points.push_back({double(t), v});
  }
  return d;
}

}  // namespace

TEST_SUITE_BEGIN("fit");

TEST_CASE("model_eval: logistic values and asymptote") {
  const std::vector<double> theta{70.4286, 0.4642, 1.0};
  const double f0 = model_eval(ModelFamily::PiotrowskiAltmann, theta, 0.0);
  CHECK(f0 == doctest::Approx(1.0 / 71.4286).epsilon(1e-12));
  const double tail = model_eval(ModelFamily::PiotrowskiAltmann, theta, 1e4);
  CHECK(tail == doctest::Approx(1.0).epsilon(1e-12));
  // overflow guards: extreme exponents stay finite and within [0, c]
  const double huge = model_eval(ModelFamily::PiotrowskiAltmann, {1e300, -5.0, 1.0}, 300.0);
  CHECK(std::isfinite(huge));
  CHECK(huge >= 0);
  CHECK(huge <= 1);
}

TEST_CASE("model families agree where they nest") {
  std::vector<double> times;
  for (int i = 0; i <= 40; ++i) times.push_back(0.5 * i);
  const std::vector<double> pa =
      model_curve(ModelFamily::PiotrowskiAltmann, {12.0, 0.7, 0.85}, times);
  const std::vector<double> k2 =
      model_curve(ModelFamily::AltmannK2, {12.0, 0.7, 0.85, 0.0}, times);
  const std::vector<double> k3 = model_curve(
      ModelFamily::AltmannK3, {0.85, -std::log(12.0), 0.7, 0.0, 0.0}, times);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(pa[i] == doctest::Approx(k2[i]).epsilon(1e-14));
    CHECK(pa[i] == doctest::Approx(k3[i]).epsilon(1e-12));
  }
}

TEST_CASE("PLC with y0 = 0 equals the logistic law with c = 1") {
  const double alpha = 0.8, x0 = 0.05;
  std::vector<double> times;
  for (int i = 0; i <= 100; ++i) times.push_back(0.2 * i);
  const std::vector<double> plc_curve =
      model_curve(ModelFamily::Plc, {alpha, 2.0, 1.1, 2.2, x0, 0.0}, times,
                  IntegrateOptions{.abs_tol = 1e-11, .rel_tol = 1e-11, .detect_fate = false});
  const std::vector<double> pa_curve =
      model_curve(ModelFamily::PiotrowskiAltmann, {1.0 / x0 - 1.0, alpha, 1.0}, times);
  for (std::size_t i = 0; i < times.size(); ++i)
    CHECK(std::abs(plc_curve[i] - pa_curve[i]) < 1e-6);
}

TEST_CASE("validate_dataset rejects undersized or malformed data") {
  Dataset tiny = logistic_dataset(10, 0.5, 1.0, 3);
  CHECK_THROWS_AS(validate_dataset(tiny, ModelFamily::PiotrowskiAltmann),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit(ModelFamily::PiotrowskiAltmann, tiny), std::invalid_argument);

  Dataset bad = logistic_dataset(10, 0.5, 1.0, 8);
  bad.points[3].value = 1.5;
  CHECK_THROWS_AS(validate_dataset(bad, ModelFamily::PiotrowskiAltmann),
                  std::invalid_argument);

  Dataset unsorted = logistic_dataset(10, 0.5, 1.0, 8);
  unsorted.points[4].t = unsorted.points[3].t;
  CHECK_THROWS_AS(validate_dataset(unsorted, ModelFamily::PiotrowskiAltmann),
                  std::invalid_argument);
}

TEST_CASE("PA fit recovers exact logistic data") {
  const Dataset data = logistic_dataset(70.4286, 0.4642, 1.0, 14);
  FitOptions opts;
  opts.multistart = 4;
  const FitResult r = fit(ModelFamily::PiotrowskiAltmann, data, std::nullopt, opts);
  CHECK(std::abs(r.theta[0] - 70.4286) / 70.4286 < 1e-3);
  CHECK(std::abs(r.theta[1] - 0.4642) / 0.4642 < 1e-3);
  CHECK(std::abs(r.theta[2] - 1.0) < 1e-3);
  CHECK(r.rmse < 1e-6);
}

TEST_CASE("PLC fit reproduces a zero-noise synthetic trajectory") {
  const std::vector<double> truth{0.6, 2.6, 2.1, 4.2, 0.01, 0.001};
  const Dataset data = plc_dataset(truth, 15, 0.0, nullptr);
  FitOptions opts;
  opts.multistart = 12;
  const FitResult r = fit(ModelFamily::Plc, data, std::nullopt, opts);
  CHECK(r.rmse < 1e-6);
}

TEST_CASE("optimizer accepted steps never increase the objective") {
  Rng noise(7301);
  const Dataset data = plc_dataset({0.6, 2.6, 2.1, 4.2, 0.01, 0.001}, 15, 0.01, &noise);
  FitOptions opts;
  opts.multistart = 3;
  const FitResult r = fit(ModelFamily::Plc, data, std::nullopt, opts);
  REQUIRE(r.rss_history.size() > 1);
  for (std::size_t i = 1; i < r.rss_history.size(); ++i)
    CHECK(r.rss_history[i] <= r.rss_history[i - 1]);
}

TEST_CASE("refitting from the optimum is a fixed point") {
  const Dataset data = logistic_dataset(25.0, 0.6, 0.9, 12);
  FitOptions opts;
  opts.multistart = 4;
  const FitResult first = fit(ModelFamily::PiotrowskiAltmann, data, std::nullopt, opts);
  FitOptions again;
  again.multistart = 1;
  const FitResult second = fit(ModelFamily::PiotrowskiAltmann, data, first.theta, again);
  for (std::size_t j = 0; j < first.theta.size(); ++j)
    CHECK(std::abs(second.theta[j] - first.theta[j]) < 1e-8);
}

TEST_CASE("frozen-parameter PLC fit matches the frozen logistic fit") {
  // route A: PLC with beta, gamma, delta, y0 frozen -> free (alpha, x0)
  // route B: PA with c frozen at 1 -> free (a, b); same two-parameter model
  const Dataset data = logistic_dataset(19.0, 0.8, 1.0, 20);
  FitOptions a_opts;
  a_opts.multistart = 1;
  a_opts.frozen = {1, 2, 3, 5};
  const FitResult plc_fit = fit(ModelFamily::Plc, data,
                                std::vector<double>{0.5, 1.7, 1.1, 2.2, 0.1, 0.0}, a_opts);
  FitOptions b_opts;
  b_opts.multistart = 1;
  b_opts.frozen = {2};
  const FitResult pa_fit = fit(ModelFamily::PiotrowskiAltmann, data,
                               std::vector<double>{10.0, 0.5, 1.0}, b_opts);
  CHECK(plc_fit.theta[1] == doctest::Approx(1.7));  // frozen coordinates untouched
  CHECK(plc_fit.theta[5] == 0.0);
  CHECK(std::abs(plc_fit.theta[0] - pa_fit.theta[1]) < 1e-6);                  // alpha vs b
  CHECK(std::abs(plc_fit.theta[4] - 1.0 / (1.0 + pa_fit.theta[0])) < 1e-6);    // x0 vs a
}

TEST_CASE("uncertainties: zero-noise optimum has zero sigma") {
  const Dataset data = logistic_dataset(30.0, 0.5, 1.0, 10);
  FitOptions opts;
  opts.multistart = 4;
  const FitResult r = fit(ModelFamily::PiotrowskiAltmann, data, std::nullopt, opts);
  for (double s : r.sigma) CHECK(s < 1e-6);
}

TEST_CASE("sigma_from_jacobian matches the one-parameter closed form") {
  // f(t) = theta * t, textbook result: sigma^2 = s^2 / sum t_i^2
  const std::vector<double> t{1, 2, 3};
  const std::vector<double> y{1.1, 1.9, 3.2};
  double stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  const double theta = sty / stt;
  std::vector<std::vector<double>> jac;
  std::vector<double> res;
  double rss = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    jac.push_back({t[i]});
    res.push_back(theta * t[i] - y[i]);
    rss += res.back() * res.back();
  }
  const std::vector<double> sigma = sigma_from_jacobian(jac, res);
  const double expected = std::sqrt(rss / double(t.size() - 1) / stt);
  CHECK(sigma[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("uncertainties: unidentifiable directions are flagged or huge") {
  // with y0 pinned to zero, beta/gamma/delta have no effect on the trajectory
  const Dataset data = logistic_dataset(19.0, 0.8, 1.0, 20);
  FitOptions opts;
  opts.multistart = 2;
  opts.frozen = {5};
  const FitResult r = fit(ModelFamily::Plc, data,
                          std::vector<double>{0.5, 1.7, 1.1, 2.2, 0.1, 0.0}, opts);
  for (int j : {1, 2, 3}) {
    const bool unidentified =
        r.sigma_flagged[std::size_t(j)] ||
        r.sigma[std::size_t(j)] > std::abs(r.theta[std::size_t(j)]);
    CHECK(unidentified);
  }
}

TEST_CASE("uncertainties rejects n <= p") {
  const Dataset data = logistic_dataset(10, 0.5, 1.0, 3);
  const std::vector<double> theta{10, 0.5, 1.0};
  CHECK_THROWS_AS(uncertainties(ModelFamily::PiotrowskiAltmann, theta, data),
                  std::invalid_argument);
}

TEST_CASE("predict_holdout: zero-noise data predicts the held-out tail") {
  const std::vector<double> truth{0.6, 2.6, 2.1, 4.2, 0.01, 0.001};
  const Dataset data = plc_dataset(truth, 15, 0.0, nullptr);
  FitOptions opts;
  opts.multistart = 12;
  const HoldoutResult hr = predict_holdout(ModelFamily::Plc, data, 3, opts);
  REQUIRE(hr.held_out.size() == 3);
  for (const auto& hp : hr.held_out) CHECK(std::abs(hp.residual) < 1e-4);
  CHECK_THROWS_AS(predict_holdout(ModelFamily::Plc, data, 9, opts),
                  std::invalid_argument);
  CHECK_THROWS_AS(predict_holdout(ModelFamily::Plc, data, 0, opts),
                  std::invalid_argument);
}

TEST_CASE("long_term_outcome labels") {
  FitResult wurde;
  wurde.family = ModelFamily::Plc;
  wurde.theta = {0.6142, 2.6240, 2.1509, 4.2129, 0.0067, 0.0};
  const Outcome complete = long_term_outcome(wurde);
  CHECK(complete.change == ChangeKind::Complete);
  CHECK(complete.target == PointKind::Cx);
  CHECK(complete.share == doctest::Approx(1.0));

  FitResult epi;
  epi.family = ModelFamily::Plc;
  epi.theta = {0.1076, 2.3732, 0.0377, -1.1806, 0.0618, 0.0001};
  const Outcome reversible = long_term_outcome(epi);
  CHECK(reversible.change == ChangeKind::Reversible);
  CHECK(reversible.share == doctest::Approx(0.0));

  FitResult no_progressives;
  no_progressives.family = ModelFamily::Plc;
  no_progressives.theta = {0.9, 2.0, 0.8, 1.9, 0.0, 0.1};
  CHECK(long_term_outcome(no_progressives).change == ChangeKind::Reversible);

  FitResult wrong_family;
  wrong_family.family = ModelFamily::PiotrowskiAltmann;
  wrong_family.theta = {10, 0.5, 1.0};
  CHECK_THROWS_AS(long_term_outcome(wrong_family), std::invalid_argument);
}

TEST_CASE("parameter recovery under 1% noise") {
  Rng master(7302);
  int ok = 0;
  const int runs = 5;
  for (int i = 0; i < runs; ++i) {
    const std::vector<double> truth{master.uniform(0.4, 1.0), 0, master.uniform(0.8, 2.4),
                                    0, master.uniform(0.005, 0.05),
                                    master.uniform(0.0005, 0.01)};
    std::vector<double> th = truth;
    th[1] = th[0] * master.uniform(2.0, 4.0);
    th[3] = th[2] * master.uniform(1.5, 2.5);
    Rng noise(9000 + std::uint64_t(i));
    const Dataset noiseless = plc_dataset(th, 15, 0.0, nullptr);
    Dataset noisy = noiseless;
    double noise_rms = 0;
    for (auto& pt : noisy.points) {
      const double v = std::clamp(pt.value * (1.0 + 0.01 * noise.gaussian()), 0.0, 1.0);
      noise_rms += (v - pt.value) * (v - pt.value);
      pt.value = v;
    }
    noise_rms = std::sqrt(noise_rms / double(noisy.points.size()));
    FitOptions opts;
    opts.multistart = 12;
    opts.seed = 100 + std::uint64_t(i);
    const FitResult r = fit(ModelFamily::Plc, noisy, std::nullopt, opts);
    std::vector<double> times;
    for (const auto& pt : noisy.points) times.push_back(pt.t);
    const std::vector<double> fitted = model_curve(ModelFamily::Plc, r.theta, times, opts.ode);
    double err = 0;
    for (std::size_t k = 0; k < times.size(); ++k)
      err += (fitted[k] - noiseless.points[k].value) * (fitted[k] - noiseless.points[k].value);
    err = std::sqrt(err / double(times.size()));
    if (err <= 2.0 * std::max(noise_rms, 1e-12)) ++ok;
  }
  CHECK(ok >= runs - 1);
}

TEST_CASE("family metadata") {
  CHECK(parameter_count(ModelFamily::PiotrowskiAltmann) == 3);
  CHECK(parameter_count(ModelFamily::AltmannK2) == 4);
  CHECK(parameter_count(ModelFamily::AltmannK3) == 5);
  CHECK(parameter_count(ModelFamily::Plc) == 6);
  CHECK(family_from_string("pa") == ModelFamily::PiotrowskiAltmann);
  CHECK(family_from_string("plc") == ModelFamily::Plc);
  CHECK(family_from_string("altmann-k2") == ModelFamily::AltmannK2);
  CHECK_FALSE(family_from_string("nope").has_value());
  CHECK(parameter_names(ModelFamily::Plc).size() == 6);
}

TEST_SUITE_END();
