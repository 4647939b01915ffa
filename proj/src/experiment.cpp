#include "iscd/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace iscd {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) {
    return "";
  }
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) {
      throw std::invalid_argument("trailing characters");
    }
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad numeric value for " + key + ": " + s);
  }
}

int parse_int(const std::string& s, const std::string& key) {
  const double v = parse_double(s, key);
  const int i = static_cast<int>(v);
  if (static_cast<double>(i) != v) {
    throw std::invalid_argument("config: " + key + " must be an integer");
  }
  return i;
}

std::vector<double> parse_list(const std::string& s, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_double(trim(item), key));
  }
  if (out.empty()) {
    throw std::invalid_argument("config: empty list for " + key);
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) {
      out += ",";
    }
    out += format_double(v[i]);
  }
  return out;
}

std::string join(const VectorXd& v) {
  return join(std::vector<double>(v.data(), v.data() + v.size()));
}

VectorXd to_vector(const std::vector<double>& v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[i];
  }
  return out;
}

MatrixXd diag_matrix(const std::vector<double>& v) {
  return to_vector(v).asDiagonal();
}

std::vector<double> diagonal_of(const MatrixXd& M) {
  std::vector<double> out(static_cast<std::size_t>(M.rows()));
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = M(i, i);
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("config: cannot open " + path);
  }
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') {
      continue;
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key = value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key == "benchmark") {
      cfg.benchmark = value;
    } else if (key == "l") {
      cfg.horizon = parse_int(value, key);
    } else if (key == "rho") {
      cfg.max_iterations = parse_int(value, key);
    } else if (key == "eps") {
      cfg.tolerance = parse_double(value, key);
    } else if (key == "steps") {
      cfg.steps = parse_int(value, key);
    } else if (key == "x0") {
      cfg.x0 = parse_list(value, key);
    } else if (key == "q") {
      cfg.q_diag = parse_list(value, key);
    } else if (key == "q_terminal") {
      cfg.q_terminal_diag = parse_list(value, key);
    } else if (key == "r") {
      cfg.r_diag = parse_list(value, key);
    } else if (key == "u_min") {
      cfg.u_min = parse_double(value, key);
    } else if (key == "u_max") {
      cfg.u_max = parse_double(value, key);
    } else if (key == "seedless") {
      if (value == "true") {
        cfg.seedless = true;
      } else if (value == "false") {
        cfg.seedless = false;
      } else {
        throw std::invalid_argument("config: seedless must be true or false");
      }
    } else {
      throw std::invalid_argument("config: unknown key " + key);
    }
  }
  return cfg;
}

ExperimentConfig merge_overrides(ExperimentConfig base, const ExperimentConfig& o) {
  if (!o.benchmark.empty()) {
    base.benchmark = o.benchmark;
  }
  if (o.horizon) base.horizon = o.horizon;
  if (o.max_iterations) base.max_iterations = o.max_iterations;
  if (o.tolerance) base.tolerance = o.tolerance;
  if (o.steps) base.steps = o.steps;
  if (o.x0) base.x0 = o.x0;
  if (o.q_diag) base.q_diag = o.q_diag;
  if (o.q_terminal_diag) base.q_terminal_diag = o.q_terminal_diag;
  if (o.r_diag) base.r_diag = o.r_diag;
  if (o.u_min) base.u_min = o.u_min;
  if (o.u_max) base.u_max = o.u_max;
  base.seedless = base.seedless && o.seedless;
  return base;
}

ResolvedRun resolve(const ExperimentConfig& cfg) {
  std::optional<SaturationSpec> levels;
  if (cfg.u_min || cfg.u_max) {
    const Benchmark defaults = benchmark_by_name(cfg.benchmark);
    double lo = -1.0;
    double hi = 1.0;
    for (const auto& [key, value] : defaults.params) {
      if (key == "u_min") lo = value;
      if (key == "u_max") hi = value;
    }
    SaturationSpec spec{cfg.u_min.value_or(lo), cfg.u_max.value_or(hi)};
    if (!spec.valid()) {
      throw std::invalid_argument("config: requires u_min < u_max");
    }
    levels = spec;
  }

  ResolvedRun run;
  run.bench = benchmark_by_name(cfg.benchmark, levels);
  run.config = run.bench.config;
  if (cfg.horizon) {
    run.config.horizon = *cfg.horizon;
  }
  if (cfg.max_iterations) {
    run.config.max_iterations = *cfg.max_iterations;
  }
  if (cfg.tolerance) {
    run.config.tolerance = *cfg.tolerance;
  }
  const int n = run.bench.internal.n;
  const int m = run.bench.internal.m;
  if (cfg.q_diag) {
    if (static_cast<int>(cfg.q_diag->size()) != n) {
      throw std::invalid_argument("config: q must have " + std::to_string(n) + " entries");
    }
    run.config.weights.Q = diag_matrix(*cfg.q_diag);
    if (!cfg.q_terminal_diag) {
      run.config.weights.Q_terminal = run.config.weights.Q;
    }
  }
  if (cfg.q_terminal_diag) {
    if (static_cast<int>(cfg.q_terminal_diag->size()) != n) {
      throw std::invalid_argument("config: q_terminal must have " + std::to_string(n) +
                                  " entries");
    }
    run.config.weights.Q_terminal = diag_matrix(*cfg.q_terminal_diag);
  }
  if (cfg.r_diag) {
    if (static_cast<int>(cfg.r_diag->size()) != m) {
      throw std::invalid_argument("config: r must have " + std::to_string(m) + " entries");
    }
    run.config.weights.R = diag_matrix(*cfg.r_diag);
  }
  run.x0 = run.bench.x0;
  if (cfg.x0) {
    if (static_cast<int>(cfg.x0->size()) != run.bench.nx) {
      throw std::invalid_argument("config: x0 must have " + std::to_string(run.bench.nx) +
                                  " entries");
    }
    run.x0 = to_vector(*cfg.x0);
  }
  run.steps = cfg.steps.value_or(run.bench.default_steps);
  if (run.steps < 1) {
    throw std::invalid_argument("config: steps must be positive");
  }
  run.config.validate(n, m);
  return run;
}

std::string record_to_csv(const ClosedLoopRecord& rec) {
  std::string out = "k,t";
  const Eigen::Index nx = rec.x.empty() ? 0 : rec.x.front().size();
  const Eigen::Index nu = rec.u.empty() ? 0 : rec.u.front().size();
  for (Eigen::Index i = 1; i <= nx; ++i) {
    out += ",x" + std::to_string(i);
  }
  for (Eigen::Index i = 1; i <= nu; ++i) {
    out += ",u" + std::to_string(i);
  }
  for (Eigen::Index i = 1; i <= nu; ++i) {
    out += ",sigma_u" + std::to_string(i);
  }
  out += ",rho_k,qp_status\n";
  for (std::size_t k = 0; k < rec.t.size(); ++k) {
    out += std::to_string(k) + "," + format_double(rec.t[k]);
    for (Eigen::Index i = 0; i < nx; ++i) {
      out += "," + format_double(rec.x[k][i]);
    }
    for (Eigen::Index i = 0; i < nu; ++i) {
      out += "," + format_double(rec.u[k][i]);
    }
    for (Eigen::Index i = 0; i < nu; ++i) {
      out += "," + format_double(rec.u_sat[k][i]);
    }
    out += "," + std::to_string(rec.iterations[k]) + "," + rec.qp_status[k] + "\n";
  }
  return out;
}

namespace {

std::string metadata_text(const ResolvedRun& run, const ExperimentConfig& cfg,
                          const ClosedLoopRecord& rec) {
  std::string out;
  out += "benchmark = " + run.bench.name + "\n";
  for (const auto& [key, value] : run.bench.params) {
    out += key + " = " + format_double(value) + "\n";
  }
  out += "l = " + std::to_string(run.config.horizon) + "\n";
  out += "rho = " + std::to_string(run.config.max_iterations) + "\n";
  out += "eps = " + format_double(run.config.tolerance) + "\n";
  out += "q = " + join(diagonal_of(run.config.weights.Q)) + "\n";
  out += "q_terminal = " + join(diagonal_of(run.config.weights.Q_terminal)) + "\n";
  out += "r = " + join(diagonal_of(run.config.weights.R)) + "\n";
  out += "x0 = " + join(run.x0) + "\n";
  out += "steps = " + std::to_string(run.steps) + "\n";
  out += "seedless = " + std::string(cfg.seedless ? "true" : "false") + "\n";
  out += "aborted = " + std::string(rec.aborted ? "true" : "false") + "\n";
  if (rec.aborted) {
    out += "abort_step = " + std::to_string(rec.abort_step) + "\n";
    out += "abort_reason = " + rec.abort_reason + "\n";
  }
  return out;
}

}  // namespace

int run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const ResolvedRun run = resolve(cfg);
  const ClosedLoopRecord rec = run_closed_loop(run.bench, run.config, run.x0, run.steps);

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_file(dir / "trajectory.csv", record_to_csv(rec));
  write_file(dir / "metadata.txt", metadata_text(run, cfg, rec));
  return rec.aborted ? 2 : 0;
}

int run_doa(const DoaRequest& req) {
  const Benchmark bench = triple_integrator();
  const std::vector<DoaPoint> grid = doa_grid(req.grid_lo, req.grid_step, req.grid_hi);
  const DoaResult res =
      doa_sweep(bench, grid, req.horizons, req.steps, req.threads);

  std::filesystem::create_directories(req.out_dir);
  const std::filesystem::path dir(req.out_dir);
  std::string summary = "benchmark = " + bench.name + "\n";
  summary += "grid = " + format_double(req.grid_lo) + ":" + format_double(req.grid_step) +
             ":" + format_double(req.grid_hi) + "\n";
  summary += "points = " + std::to_string(grid.size()) + "\n";
  summary += "steps = " + std::to_string(req.steps) + "\n";
  for (std::size_t h = 0; h < res.horizons.size(); ++h) {
    std::string csv = "x1_0,x2_0,converged,criterion_value\n";
    int count = 0;
    for (std::size_t i = 0; i < res.grid.size(); ++i) {
      csv += format_double(res.grid[i].x1) + "," + format_double(res.grid[i].x2) + "," +
             (res.converged[h][i] ? "1" : "0") + "," +
             format_double(res.criterion[h][i]) + "\n";
      count += res.converged[h][i] ? 1 : 0;
    }
    write_file(dir / ("doa_l" + std::to_string(res.horizons[h]) + ".csv"), csv);
    summary += "converged_l" + std::to_string(res.horizons[h]) + " = " +
               std::to_string(count) + "\n";
  }
  write_file(dir / "summary.txt", summary);
  return 0;
}

}  // namespace iscd
