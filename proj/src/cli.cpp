#include "plc/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace plc {

namespace {

using nlohmann::json;

json num(double v, const RunConfig& cfg) {
  if (!std::isfinite(v)) return json();  // null for non-finite values
  return cfg.full_precision ? json(v) : json(round_sig(v));
}

json state_json(const State& s, const RunConfig& cfg) {
  return json::array({num(s.x, cfg), num(s.y, cfg)});
}

json eigen_json(const Eigen2& e, const RunConfig& cfg) {
  return json::array({json::array({num(e.lambda1.real(), cfg), num(e.lambda1.imag(), cfg)}),
                      json::array({num(e.lambda2.real(), cfg), num(e.lambda2.imag(), cfg)})});
}

json params_json(const ModelParams& p, const RunConfig& cfg) {
  return {{"alpha", num(p.alpha, cfg)}, {"beta", num(p.beta, cfg)},
          {"gamma", num(p.gamma, cfg)}, {"delta", num(p.delta, cfg)},
          {"D", num(p.D(), cfg)}};
}

json fate_json(const Fate& f, const RunConfig& cfg) {
  return {{"kind", f.kind == FateKind::Converged ? "converged" : "undecided"},
          {"target", to_string(f.target)},
          {"location", state_json(f.location, cfg)},
          {"distance", num(f.distance_at_end, cfg)},
          {"field_norm", num(f.field_norm_at_end, cfg)},
          {"t_end", num(f.t_end, cfg)}};
}

json fit_block(const FitResult& fr, const RunConfig& cfg) {
  json params = json::object();
  const auto names = parameter_names(fr.family);
  for (std::size_t j = 0; j < names.size(); ++j) {
    json entry = {{"value", num(fr.theta[j], cfg)}, {"sigma", num(fr.sigma[j], cfg)}};
    if (fr.sigma_flagged[j]) entry["unconstrained"] = true;
    params[names[j]] = entry;
  }
  json b = {{"parameters", params},
            {"rss", num(fr.rss, cfg)},
            {"rmse", num(fr.rmse, cfg)},
            {"converged", fr.converged},
            {"iterations", fr.n_iter}};
  if (fr.predicted_outcome) {
    const Outcome& o = *fr.predicted_outcome;
    b["predicted_outcome"] = {{"change", to_string(o.change)},
                              {"share", num(o.share, cfg)},
                              {"target", to_string(o.target)},
                              {"decided", o.decided}};
  }
  return b;
}

bool parse_number(const std::string& field, double& out) {
  const char* begin = field.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t') ++end;
  return *end == '\0' && std::isfinite(out);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto a = f.find_first_not_of(" \t");
    const auto b = f.find_last_not_of(" \t");
    f = a == std::string::npos ? "" : f.substr(a, b - a + 1);
  }
  return fields;
}

void write_csv_header(std::ofstream& out, const std::string& path, const char* header) {
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  out << header << "\n";
}

}  // namespace

double round_sig(double v, int digits) {
  if (v == 0 || !std::isfinite(v)) return v;
  const double mag =
      std::pow(10.0, digits - 1 - int(std::floor(std::log10(std::abs(v)))));
  return std::round(v * mag) / mag;
}

Dataset load_dataset_csv(std::istream& in, const std::string& label, bool percent,
                         std::ostream& warnings) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
  }
  if (lines.empty()) throw std::invalid_argument("dataset file is empty");

  const auto first = split_csv_line(lines[0]);
  if (first.size() > 2)
    throw std::invalid_argument("dataset must have one or two columns");
  bool headerless = true;
  {
    double ignored;
    for (const auto& f : first)
      if (!parse_number(f, ignored)) headerless = false;
  }
  std::size_t row0 = 1;
  if (headerless) {
    warnings << "warning: no header row detected, reading " << first.size()
             << "-column data directly\n";
    row0 = 0;
  }

  Dataset data;
  data.label = label;
  for (std::size_t i = row0; i < lines.size(); ++i) {
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != first.size())
      throw std::invalid_argument("dataset row " + std::to_string(i + 1) +
                                  " has an inconsistent column count");
    double t = 0, v = 0;
    if (fields.size() == 2) {
      if (!parse_number(fields[0], t) || !parse_number(fields[1], v))
        throw std::invalid_argument("dataset row " + std::to_string(i + 1) +
                                    " is not numeric");
    } else {
      t = double(data.points.size());
      if (!parse_number(fields[0], v))
        throw std::invalid_argument("dataset row " + std::to_string(i + 1) +
                                    " is not numeric");
    }
    if (percent) v /= 100.0;
    data.points.push_back({t, v});
  }
  if (data.points.empty()) throw std::invalid_argument("dataset has no data rows");
  return data;
}

Dataset load_dataset_file(const std::string& path, bool percent, std::ostream& warnings) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open dataset file: " + path);
  const std::string label = std::filesystem::path(path).stem().string();
  return load_dataset_csv(in, label, percent, warnings);
}

int run_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (!(cfg.horizon > 0)) throw std::invalid_argument("--horizon must be positive");
    if (!(cfg.abs_tol > 0) || !(cfg.rel_tol > 0))
      throw std::invalid_argument("tolerances must be positive");
    validate_params(cfg.params);
    const State s0 = make_state(cfg.x0, cfg.y0);

    IntegrateOptions opts;
    opts.abs_tol = cfg.abs_tol;
    opts.rel_tol = cfg.rel_tol;
    const Trajectory traj = integrate(cfg.params, s0, cfg.horizon, opts);

    if (!cfg.csv_path.empty()) {
      std::ofstream csv(cfg.csv_path);
      write_csv_header(csv, cfg.csv_path, "t,x,y");
      for (const auto& s : traj.samples)
        csv << s.t << "," << s.s.x << "," << s.s.y << "\n";
    }

    const json report = {
        {"fate", fate_json(traj.fate, cfg)},
        {"params", params_json(cfg.params, cfg)},
        {"initial", state_json(traj.samples.front().s, cfg)},
        {"horizon", num(cfg.horizon, cfg)},
        {"samples", traj.samples.size()},
        {"step_stats",
         {{"accepted", traj.stats.accepted},
          {"rejected", traj.stats.rejected},
          {"max_error_estimate", num(traj.stats.max_error_estimate, cfg)}}},
        {"tolerances", {{"abs", num(cfg.abs_tol, cfg)}, {"rel", num(cfg.rel_tol, cfg)}}}};
    out << report.dump(2) << "\n";
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int run_classify(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const Regime regime = classify_regime(cfg.params);
    const CriticalSet set = critical_points(cfg.params);
    const Nullclines nc = nullclines(cfg.params);
    const OutcomeReport outcomes = outcome_taxonomy(cfg.params);

    json points = json::array();
    for (const auto& cp : set.points) {
      points.push_back({{"kind", to_string(cp.kind)},
                        {"location", state_json(cp.location, cfg)},
                        {"jacobian",
                         json::array({json::array({num(cp.jacobian.a11, cfg), num(cp.jacobian.a12, cfg)}),
                                      json::array({num(cp.jacobian.a21, cfg), num(cp.jacobian.a22, cfg)})})},
                        {"eigenvalues", eigen_json(cp.eigen, cfg)},
                        {"stability", to_string(cp.stability)}});
    }
    json segments = json::array();
    for (const auto& seg : set.segments) {
      json s = {{"start", state_json(seg.start, cfg)}, {"end", state_json(seg.end, cfg)}};
      if (seg.attracting_from) s["attracting_from"] = num(*seg.attracting_from, cfg);
      segments.push_back(s);
    }
    const auto line_json = [&](const NullclineLine& l) {
      return l.degenerate
                 ? json{{"degenerate", true}}
                 : json{{"slope", num(l.slope, cfg)}, {"intercept", num(l.intercept, cfg)},
                        {"degenerate", false}};
    };
    json attractors = json::array();
    for (const auto& a : outcomes.attractors) {
      json e = {{"attractor", a.name}, {"change", to_string(a.change)}, {"basin", a.basin}};
      if (a.share) e["share"] = num(*a.share, cfg);
      attractors.push_back(e);
    }

    const json report = {{"regime", to_string(regime)},
                         {"params", params_json(cfg.params, cfg)},
                         {"critical_points", points},
                         {"critical_segments", segments},
                         {"nullclines", {{"g_x", line_json(nc.g_x)}, {"g_y", line_json(nc.g_y)}}},
                         {"outcomes", attractors},
                         {"notes", outcomes.notes}};
    out << report.dump(2) << "\n";
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int run_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    const Dataset data = load_dataset_file(cfg.input_path, cfg.percent, err);

    FitOptions opts;
    opts.multistart = cfg.multistart;
    opts.seed = cfg.seed;
    opts.allow_negative = cfg.allow_negative;
    const FitResult full = fit(cfg.family, data, std::nullopt, opts);

    json report = {{"family", to_string(cfg.family)},
                   {"dataset", {{"label", data.label}, {"points", data.points.size()}}},
                   {"seed", cfg.seed},
                   {"fit", fit_block(full, cfg)}};

    if (cfg.holdout > 0) {
      const HoldoutResult hr = predict_holdout(cfg.family, data, cfg.holdout, opts);
      json held = json::array();
      for (const auto& hp : hr.held_out)
        held.push_back({{"t", num(hp.t, cfg)},
                        {"observed", num(hp.observed, cfg)},
                        {"predicted", num(hp.predicted, cfg)},
                        {"residual", num(hp.residual, cfg)}});
      report["predict"] = {{"holdout", cfg.holdout},
                           {"fit", fit_block(hr.fit, cfg)},
                           {"held_out", held}};
    }

    if (!cfg.curve_path.empty()) {
      if (cfg.curve_points < 2)
        throw std::invalid_argument("--curve-points must be at least 2");
      const double t0 = data.points.front().t;
      const double t1 = data.points.back().t;
      std::vector<double> ts(std::size_t(cfg.curve_points));
      for (int i = 0; i < cfg.curve_points; ++i)
        ts[std::size_t(i)] = t0 + (t1 - t0) * double(i) / double(cfg.curve_points - 1);
      const std::vector<double> values = model_curve(cfg.family, full.theta, ts);
      std::ofstream csv(cfg.curve_path);
      write_csv_header(csv, cfg.curve_path, "t,value");
      csv.precision(17);
      for (std::size_t i = 0; i < ts.size(); ++i)
        csv << ts[i] << "," << values[i] << "\n";
      report["curve"] = cfg.curve_path;
    }

    out << report.dump(2) << "\n";
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

int run_portrait(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    if (cfg.grid < 2) throw std::invalid_argument("--grid must be at least 2");
    const Regime regime = classify_regime(cfg.params);
    if (regime != Regime::Generic)
      throw std::invalid_argument(std::string("portrait requires the generic regime; "
                                              "these parameters are ") +
                                  to_string(regime));

    std::filesystem::create_directories(cfg.out_dir);
    const auto path = [&](const char* name) {
      return (std::filesystem::path(cfg.out_dir) / name).string();
    };

    const Nullclines nc = nullclines(cfg.params);
    {
      std::ofstream csv(path("nullclines.csv"));
      write_csv_header(csv, path("nullclines.csv"), "line,x,y");
      const int m = 50;
      for (int i = 0; i <= m; ++i) {
        const double x = double(i) / m;
        csv << "g_x," << x << "," << nc.g_x.eval(x) << "\n";
      }
      const double x_max = cfg.params.gamma / cfg.params.delta;
      for (int i = 0; i <= m; ++i) {
        const double x = x_max * double(i) / m;
        csv << "g_y," << x << "," << nc.g_y.eval(x) << "\n";
      }
    }

    const auto branches = trace_separatrix(cfg.params, cfg.arc_budget);
    {
      std::ofstream csv(path("separatrix.csv"));
      write_csv_header(csv, path("separatrix.csv"), "branch,x,y");
      for (int b = 0; b < 2; ++b)
        for (const State& s : branches[std::size_t(b)])
          csv << b << "," << s.x << "," << s.y << "\n";
    }

    {
      std::ofstream csv(path("basins.csv"));
      write_csv_header(csv, path("basins.csv"), "x,y,fate");
      const int n = cfg.grid;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double x = double(i) / (n - 1);
          const double y = double(j) / (n - 1);
          if (x + y > 1 + 1e-12) continue;
          const Fate f = fate(cfg.params, make_state(x, y));
          csv << x << "," << y << ","
              << (f.kind == FateKind::Converged ? to_string(f.target) : "undecided")
              << "\n";
        }
      }
    }

    CriticalSet set = critical_points(cfg.params);
    State saddle{};
    for (const auto& cp : set.points)
      if (cp.kind == PointKind::Interior) saddle = cp.location;

    const json manifest = {{"regime", to_string(regime)},
                           {"params", params_json(cfg.params, cfg)},
                           {"saddle", state_json(saddle, cfg)},
                           {"grid", cfg.grid},
                           {"files",
                            {{"nullclines", path("nullclines.csv")},
                             {"separatrix", path("separatrix.csv")},
                             {"basins", path("basins.csv")}}}};
    out << manifest.dump(2) << "\n";
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace plc
