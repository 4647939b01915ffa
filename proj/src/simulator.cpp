#include "iscd/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "iscd/controller.hpp"

namespace iscd {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Difference between the 5th-order weights and the embedded 4th-order ones.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;

VectorXd eval_field(const std::function<VectorXd(double, const VectorXd&)>& field,
                    double t, const VectorXd& x) {
  VectorXd f = field(t, x);
  if (!f.allFinite()) {
    throw DivergenceError("rk45: field is not finite at t = " + std::to_string(t));
  }
  return f;
}

}  // namespace

VectorXd rk45(const std::function<VectorXd(double, const VectorXd&)>& field,
              const VectorXd& x0, double t0, double t1, double rtol, double atol,
              double max_step) {
  if (!(t1 > t0)) {
    throw std::invalid_argument("rk45: requires t1 > t0");
  }
  const double span = t1 - t0;
  const double h_min = 16.0 * std::numeric_limits<double>::epsilon() *
                       std::max(std::abs(t0), std::max(std::abs(t1), 1.0));

  VectorXd x = x0;
  double t = t0;
  double h = (max_step > 0.0) ? std::min(span, max_step) : span;
  VectorXd k1 = eval_field(field, t, x);

  while (t < t1) {
    h = std::min(h, t1 - t);
    const VectorXd k2 = eval_field(field, t + c2 * h, x + h * (a21 * k1));
    const VectorXd k3 = eval_field(field, t + c3 * h, x + h * (a31 * k1 + a32 * k2));
    const VectorXd k4 =
        eval_field(field, t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const VectorXd k5 = eval_field(
        field, t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const VectorXd k6 = eval_field(
        field, t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const VectorXd x_new = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const VectorXd k7 = eval_field(field, t + h, x_new);
    const VectorXd err =
        h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double err_norm = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double sc = atol + rtol * std::max(std::abs(x[i]), std::abs(x_new[i]));
      const double e = err[i] / sc;
      err_norm += e * e;
    }
    err_norm = std::sqrt(err_norm / std::max<double>(x.size(), 1));

    if (err_norm <= 1.0) {
      t += h;
      x = x_new;
      k1 = k7;  // first-same-as-last
      if (t >= t1) {
        break;
      }
    }
    double factor = (err_norm > 0.0) ? 0.9 * std::pow(err_norm, -0.2) : 5.0;
    factor = std::clamp(factor, 0.2, 5.0);
    h *= factor;
    if (max_step > 0.0) {
      h = std::min(h, max_step);
    }
    if (h < h_min) {
      throw StiffnessError("rk45: step size underflow at t = " + std::to_string(t));
    }
  }
  return x;
}

ClosedLoopRecord run_closed_loop(const Benchmark& b, const MpcConfig& cfg,
                                 const VectorXd& x0, int steps) {
  if (steps < 1) {
    throw std::invalid_argument("run_closed_loop: steps must be at least 1");
  }
  if (x0.size() != b.nx) {
    throw std::invalid_argument("run_closed_loop: initial state dimension mismatch");
  }

  ClosedLoopRecord rec;
  rec.t.reserve(steps + 1);
  rec.x.reserve(steps + 1);
  rec.u.reserve(steps + 1);
  rec.u_sat.reserve(steps + 1);
  rec.iterations.reserve(steps + 1);
  rec.qp_status.reserve(steps + 1);

  VectorXd x = x0;
  VectorXd u = b.u0;
  VectorXd warm = replicate_control(b.u0, cfg.horizon);
  IoHistory hist = b.output_feedback ? IoHistory(*b.io) : IoHistory(1, 1, 1);

  for (int k = 0; k < steps; ++k) {
    const double tk = k * b.T_s;
    int iterations = 0;
    std::string status = "none";
    try {
      StepResult res = [&] {
        if (b.output_feedback) {
          const VectorXd y = b.measurement * x;
          const VectorXd xc = reconstruct_state(*b.io, hist, y);
          const ScdcModel model = bocf_scdc_model(*b.io, hist);
          return mpc_step(model, xc, u, warm, cfg);
        }
        return mpc_step(b.internal, x, u, warm, cfg);
      }();
      iterations = res.diagnostics.last_iteration;
      status = res.diagnostics.qp_statuses.empty()
                   ? "none"
                   : to_string(res.diagnostics.qp_statuses.back());
      warm = warm_start_shift(res.sequence, b.internal.m);

      rec.t.push_back(tk);
      rec.x.push_back(b.record_state(x));
      rec.u.push_back(b.record_control(u));
      rec.u_sat.push_back(b.record_saturated(u));
      rec.iterations.push_back(iterations);
      rec.qp_status.push_back(status);

      if (b.output_feedback) {
        hist.push(b.measurement * x, u);
      }
      x = rk45([&](double, const VectorXd& xx) { return b.truth(xx, u); }, x, tk,
               (k + 1) * b.T_s);
      u = res.u_next;
    } catch (const std::runtime_error& err) {
      rec.aborted = true;
      rec.abort_reason = err.what();
      rec.abort_step = k;
      return rec;
    }
  }

  rec.t.push_back(steps * b.T_s);
  rec.x.push_back(b.record_state(x));
  rec.u.push_back(b.record_control(u));
  rec.u_sat.push_back(b.record_saturated(u));
  rec.iterations.push_back(0);
  rec.qp_status.push_back("none");
  return rec;
}

double tail_state_norm_sum(const ClosedLoopRecord& rec, int k_begin, int k_end) {
  if (k_begin < 0 || k_end >= static_cast<int>(rec.x.size()) || k_begin > k_end) {
    throw std::invalid_argument("tail_state_norm_sum: window out of range");
  }
  double sum = 0.0;
  for (int k = k_begin; k <= k_end; ++k) {
    sum += rec.x[k].norm();
  }
  return sum;
}

DoaResult doa_sweep(const Benchmark& b, std::span<const DoaPoint> grid,
                    std::span<const int> horizons, int steps, int threads) {
  if (steps < 600) {
    throw std::invalid_argument("doa_sweep: the convergence window needs steps >= 600");
  }
  DoaResult out;
  out.grid.assign(grid.begin(), grid.end());
  out.horizons.assign(horizons.begin(), horizons.end());
  out.converged.assign(horizons.size(), std::vector<char>(grid.size(), 0));
  out.criterion.assign(horizons.size(),
                       std::vector<double>(grid.size(),
                                           std::numeric_limits<double>::infinity()));

  const int items = static_cast<int>(grid.size() * horizons.size());
  if (items == 0) {
    return out;
  }
  int workers = threads > 0 ? threads
                            : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, items);

  std::atomic<int> next{0};
  auto work = [&]() {
    for (int item = next.fetch_add(1); item < items; item = next.fetch_add(1)) {
      const std::size_t h = static_cast<std::size_t>(item) / grid.size();
      const std::size_t i = static_cast<std::size_t>(item) % grid.size();
      MpcConfig cfg = b.config;
      cfg.horizon = out.horizons[h];
      VectorXd x0 = VectorXd::Zero(b.nx);
      x0[0] = grid[i].x1;
      x0[1] = grid[i].x2;
      try {
        const ClosedLoopRecord rec = run_closed_loop(b, cfg, x0, steps);
        if (!rec.aborted) {
          const double crit = tail_state_norm_sum(rec, 580, 600);
          out.criterion[h][i] = crit;
          out.converged[h][i] = crit < 0.01 ? 1 : 0;
        }
      } catch (const std::exception&) {
        // recorded as non-converged
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) {
    pool.emplace_back(work);
  }
  work();
  for (auto& th : pool) {
    th.join();
  }
  return out;
}

std::vector<DoaPoint> doa_grid(double lo, double step, double hi) {
  if (!(step > 0.0) || hi < lo) {
    throw std::invalid_argument("doa_grid: need step > 0 and hi >= lo");
  }
  std::vector<double> axis;
  for (double v = lo; v <= hi + 1e-9 * step; v += step) {
    axis.push_back(v);
  }
  std::vector<DoaPoint> grid;
  grid.reserve(axis.size() * axis.size());
  for (double x1 : axis) {
    for (double x2 : axis) {
      grid.push_back({x1, x2});
    }
  }
  return grid;
}

}  // namespace iscd
