#pragma once

#include <functional>
#include <string>
#include <vector>

#include "iscd/plants.hpp"

namespace iscd {

/// Integrate x' = field(t, x) from t0 to t1 with an adaptive embedded
/// Runge-Kutta 4(5) pair (Dormand-Prince coefficients). Steps are accepted
/// when the embedded error estimate passes the mixed tolerance
/// atol + rtol * |x|; the first attempt spans the whole interval (clamped to
/// max_step when positive) and the controller shrinks from there. Throws
/// StiffnessError on step-size underflow and DivergenceError on non-finite
/// field values.
VectorXd rk45(const std::function<VectorXd(double, const VectorXd&)>& field,
              const VectorXd& x0, double t0, double t1, double rtol = 1e-5,
              double atol = 1e-5, double max_step = 0.0);

/// Per-step time series of one closed-loop run. All series have steps + 1
/// rows; the control of row k is the one applied over [k T_s, (k+1) T_s) and
/// was computed strictly from data through step k - 1. `iterations` and
/// `qp_status` describe the controller call made at that step (zero / "none"
/// on the final row, which makes no call).
struct ClosedLoopRecord {
  std::vector<double> t;
  std::vector<VectorXd> x;
  std::vector<VectorXd> u;
  std::vector<VectorXd> u_sat;
  std::vector<int> iterations;
  std::vector<std::string> qp_status;
  bool aborted = false;
  std::string abort_reason;
  int abort_step = -1;
};

/// Sampled-data closed loop: hold each control over one sample interval,
/// integrate the truth dynamics with rk45 (tolerances 1e-5), and compute the
/// next control from the sample via the discrete internal model. For
/// output-feedback benchmarks the controller state is reconstructed from the
/// measured input-output history. Controller or integrator failures abort
/// the run and are recorded instead of thrown.
ClosedLoopRecord run_closed_loop(const Benchmark& b, const MpcConfig& cfg,
                                 const VectorXd& x0, int steps);

/// Sum of recorded state norms over rows k_begin..k_end inclusive.
double tail_state_norm_sum(const ClosedLoopRecord& rec, int k_begin, int k_end);

struct DoaPoint {
  double x1 = 0.0;
  double x2 = 0.0;
};

/// Grid sweep outcome: converged[h][i] and criterion[h][i] refer to
/// horizons[h] and grid[i].
struct DoaResult {
  std::vector<DoaPoint> grid;
  std::vector<int> horizons;
  std::vector<std::vector<char>> converged;
  std::vector<std::vector<double>> criterion;
};

/// Run the closed loop from (x1, x2, 0, ...) for every grid point and
/// horizon and evaluate the tail convergence criterion
/// sum_{k=580}^{600} |x_k| < 0.01. Runs are independent and distributed over
/// a worker pool; failures of individual points count as non-converged.
/// Requires steps >= 600.
DoaResult doa_sweep(const Benchmark& b, std::span<const DoaPoint> grid,
                    std::span<const int> horizons, int steps = 600, int threads = 0);

/// Integer grid {-10, ..., 10}^2 used by the domain-of-attraction study.
std::vector<DoaPoint> doa_grid(double lo, double step, double hi);

}  // namespace iscd
