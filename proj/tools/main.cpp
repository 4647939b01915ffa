#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "iscd/experiment.hpp"

namespace {

std::vector<double> parse_csv_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(std::stod(item));
  }
  return out;
}

bool parse_grid(const std::string& s, iscd::DoaRequest& req) {
  std::stringstream ss(s);
  std::string part;
  std::vector<double> vals;
  while (std::getline(ss, part, ':')) {
    vals.push_back(std::stod(part));
  }
  if (vals.size() != 3 || vals[1] <= 0.0 || vals[2] < vals[0]) {
    return false;
  }
  req.grid_lo = vals[0];
  req.grid_step = vals[1];
  req.grid_hi = vals[2];
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ISCD-MPC benchmark runner"};
  app.require_subcommand(1);

  // run <benchmark>
  auto* run = app.add_subcommand("run", "Run one benchmark closed loop");
  std::string benchmark;
  std::string out_dir = "out";
  std::string config_file;
  std::string x0_arg;
  iscd::ExperimentConfig flags;
  run->add_option("benchmark", benchmark,
                  "kapitza | nonholonomic | emag | triple_integrator")
      ->required();
  int horizon = 0, rho = 0, steps = 0;
  double eps = 0.0;
  auto* opt_l = run->add_option("--l", horizon, "horizon length");
  auto* opt_rho = run->add_option("--rho", rho, "iteration cap per step");
  auto* opt_eps = run->add_option("--eps", eps, "stopping tolerance");
  auto* opt_steps = run->add_option("--steps", steps, "number of control steps");
  auto* opt_x0 = run->add_option("--x0", x0_arg, "initial state, comma separated");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--config", config_file, "key = value config file");

  // doa
  auto* doa = app.add_subcommand("doa", "Domain-of-attraction sweep");
  iscd::DoaRequest req;
  std::string horizons_arg = "50,100,200";
  std::string grid_arg = "-10:1:10";
  doa->add_option("--l", horizons_arg, "horizons, comma separated");
  doa->add_option("--grid", grid_arg, "per-axis grid min:step:max");
  doa->add_option("--steps", req.steps, "control steps per run");
  doa->add_option("--threads", req.threads, "worker threads (0 = all cores)");
  doa->add_option("--out", req.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      iscd::ExperimentConfig cfg;
      if (!config_file.empty()) {
        cfg = iscd::load_config_file(config_file);
      }
      flags.benchmark = benchmark;
      if (opt_l->count()) flags.horizon = horizon;
      if (opt_rho->count()) flags.max_iterations = rho;
      if (opt_eps->count()) flags.tolerance = eps;
      if (opt_steps->count()) flags.steps = steps;
      if (opt_x0->count()) flags.x0 = parse_csv_list(x0_arg);
      cfg = iscd::merge_overrides(cfg, flags);

      const int code = iscd::run_experiment(cfg, out_dir);
      if (code != 0) {
        std::cerr << "run aborted; see " << out_dir << "/metadata.txt for the reason\n";
      }
      return code;
    }

    if (doa->parsed()) {
      if (!parse_grid(grid_arg, req)) {
        std::cerr << "bad --grid, expected min:step:max\n";
        return 1;
      }
      req.horizons.clear();
      for (double h : parse_csv_list(horizons_arg)) {
        req.horizons.push_back(static_cast<int>(h));
      }
      return iscd::run_doa(req);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
