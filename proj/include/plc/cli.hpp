// Command-line front end: dataset ingestion, the simulate/classify/fit/
// portrait subcommands, and their JSON / CSV outputs.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "plc/fit.hpp"

namespace plc {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;    // bad flags or bad input data
inline constexpr int kExitNumeric = 3;  // numerical failure

struct RunConfig {
  std::uint64_t seed = 12345;
  bool full_precision = false;

  // model parameters and initial state (simulate/classify/portrait)
  ModelParams params;
  double x0 = 0, y0 = 0;

  // simulate
  double horizon = 1e4;
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  std::string csv_path;  // trajectory output, empty to skip

  // fit
  ModelFamily family = ModelFamily::Plc;
  std::string input_path;
  int multistart = 8;
  int holdout = 0;
  bool allow_negative = false;
  bool percent = false;       // divide ingested values by 100
  std::string curve_path;     // dense fitted-curve CSV, empty to skip
  int curve_points = 200;

  // portrait
  int grid = 21;
  double arc_budget = 4.0;
  std::string out_dir = ".";
};

// Round towards the default 6-significant-digit report precision.
double round_sig(double v, int digits = 6);

// CSV ingestion. Accepts a `t,value` header, a headerless two-column file
// (with a warning), or a single value column (times become the row index).
Dataset load_dataset_csv(std::istream& in, const std::string& label, bool percent,
                         std::ostream& warnings);
Dataset load_dataset_file(const std::string& path, bool percent, std::ostream& warnings);

int run_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_classify(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int run_portrait(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace plc
