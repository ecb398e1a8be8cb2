// plc: simulate, classify, fit and map the PC model of language change.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "plc/cli.hpp"

namespace {

void add_param_options(CLI::App* cmd, plc::RunConfig& cfg) {
  cmd->add_option("--alpha", cfg.params.alpha, "interaction rate alpha")->required();
  cmd->add_option("--beta", cfg.params.beta, "interaction rate beta")->required();
  cmd->add_option("--gamma", cfg.params.gamma, "interaction rate gamma")->required();
  cmd->add_option("--delta", cfg.params.delta, "interaction rate delta")->required();
}

void add_seed_option(CLI::App* cmd, plc::RunConfig& cfg) {
  cmd->add_option("--seed", cfg.seed, "random seed")->envname("PLC_SEED");
}

}  // namespace

int main(int argc, char** argv) {
  plc::RunConfig cfg;
  std::string family = "plc";

  CLI::App app{"Toolkit for the progressive/liberal/conservative model of language change"};
  app.require_subcommand(1);

  CLI::App* sim = app.add_subcommand("simulate", "integrate a trajectory and report its fate");
  add_param_options(sim, cfg);
  sim->add_option("--x0", cfg.x0, "initial progressive fraction")->required();
  sim->add_option("--y0", cfg.y0, "initial conservative fraction")->required();
  sim->add_option("--horizon", cfg.horizon, "integration horizon");
  sim->add_option("--abs-tol", cfg.abs_tol, "absolute local error tolerance");
  sim->add_option("--rel-tol", cfg.rel_tol, "relative local error tolerance");
  sim->add_option("--csv", cfg.csv_path, "write the trajectory as t,x,y rows");
  sim->add_flag("--full-precision", cfg.full_precision, "do not round JSON numbers");
  add_seed_option(sim, cfg);

  CLI::App* cls = app.add_subcommand("classify", "regime, critical points and outcomes");
  add_param_options(cls, cfg);
  cls->add_flag("--full-precision", cfg.full_precision, "do not round JSON numbers");
  add_seed_option(cls, cfg);

  CLI::App* fitc = app.add_subcommand("fit", "least-squares fit of a usage time series");
  fitc->add_option("input", cfg.input_path, "CSV dataset (t,value)")->required();
  fitc->add_option("--family", family, "pa | altmann-k2 | altmann-k3 | plc");
  fitc->add_option("--holdout", cfg.holdout, "withhold the last K points and predict them")
      ->check(CLI::NonNegativeNumber);
  fitc->add_option("--multistart", cfg.multistart, "number of optimizer starts")
      ->check(CLI::PositiveNumber);
  fitc->add_flag("--allow-negative", cfg.allow_negative,
                 "permit one negative interaction parameter (PLC)");
  fitc->add_flag("--percent", cfg.percent, "input values are percentages, divide by 100");
  fitc->add_option("--emit-curve", cfg.curve_path, "write dense fitted-model values");
  fitc->add_option("--curve-points", cfg.curve_points, "samples for --emit-curve");
  fitc->add_flag("--full-precision", cfg.full_precision, "do not round JSON numbers");
  add_seed_option(fitc, cfg);

  CLI::App* por = app.add_subcommand("portrait",
                                     "nullclines, separatrix and basin grid as CSV files");
  add_param_options(por, cfg);
  por->add_option("--grid", cfg.grid, "basin grid resolution");
  por->add_option("--arc-budget", cfg.arc_budget, "separatrix arc-length budget");
  por->add_option("--out-dir", cfg.out_dir, "output directory");
  por->add_flag("--full-precision", cfg.full_precision, "do not round JSON numbers");
  add_seed_option(por, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : plc::kExitUsage;
  }

  if (fitc->parsed()) {
    const auto fam = plc::family_from_string(family);
    if (!fam) {
      std::cerr << "error: unknown family '" << family << "'\n";
      return plc::kExitUsage;
    }
    cfg.family = *fam;
    return plc::run_fit(cfg, std::cout, std::cerr);
  }
  if (sim->parsed()) return plc::run_simulate(cfg, std::cout, std::cerr);
  if (cls->parsed()) return plc::run_classify(cfg, std::cout, std::cerr);
  if (por->parsed()) return plc::run_portrait(cfg, std::cout, std::cerr);
  return plc::kExitUsage;
}
