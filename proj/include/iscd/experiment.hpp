#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iscd/simulator.hpp"

namespace iscd {

/// Resolved experiment request: a benchmark name plus optional overrides of
/// the published defaults. Overrides are dimension-checked against the
/// benchmark when applied.
struct ExperimentConfig {
  std::string benchmark;
  std::optional<int> horizon;
  std::optional<int> max_iterations;
  std::optional<double> tolerance;
  std::optional<int> steps;
  std::optional<std::vector<double>> x0;
  std::optional<std::vector<double>> q_diag;
  std::optional<std::vector<double>> q_terminal_diag;
  std::optional<std::vector<double>> r_diag;
  std::optional<double> u_min;
  std::optional<double> u_max;
  bool seedless = true;
};

/// Parse a flat key = value config file (comma lists for arrays, # comments).
/// Unknown keys or malformed values throw std::invalid_argument.
ExperimentConfig load_config_file(const std::string& path);

/// Layer command-line style overrides on top of file values: any field set
/// in `overrides` wins.
ExperimentConfig merge_overrides(ExperimentConfig base, const ExperimentConfig& overrides);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double v);

struct ResolvedRun {
  Benchmark bench;
  MpcConfig config;
  VectorXd x0;
  int steps = 0;
};

/// Apply the overrides of `cfg` to its benchmark's published defaults.
ResolvedRun resolve(const ExperimentConfig& cfg);

/// Run one benchmark and write trajectory.csv (columns k, t, x1..xn,
/// u1..um, sigma_u1.., rho_k, qp_status) and metadata.txt (every resolved
/// parameter, key = value) into out_dir. Returns 0 on success and 2 when the
/// run aborted; the partial trajectory and the abort reason are still
/// written.
int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

struct DoaRequest {
  std::vector<int> horizons{50, 100, 200};
  double grid_lo = -10.0;
  double grid_step = 1.0;
  double grid_hi = 10.0;
  int steps = 600;
  int threads = 0;
  std::string out_dir = "out";
};

/// Domain-of-attraction sweep of the triple integrator: one CSV per horizon
/// (columns x1_0, x2_0, converged, criterion_value) plus summary.txt with
/// the converged counts. Returns 0.
int run_doa(const DoaRequest& req);

/// Serialize a record as CSV; parsing it back reproduces the record exactly.
std::string record_to_csv(const ClosedLoopRecord& rec);

}  // namespace iscd
