#include "iscd/bocf.hpp"

#include <stdexcept>

namespace iscd {

namespace {

MatrixXd eval_map(const std::function<MatrixXd(int, const IoWindow&)>& map, int tau,
                  const IoWindow& win, Eigen::Index rows, Eigen::Index cols,
                  const char* name) {
  MatrixXd M = map(tau, win);
  if (M.rows() != rows || M.cols() != cols) {
    throw ModelError(std::string("bocf: ") + name + "_" + std::to_string(tau) +
                     " has wrong dimensions");
  }
  if (!M.allFinite()) {
    throw ModelError(std::string("bocf: ") + name + "_" + std::to_string(tau) +
                     " is not finite");
  }
  return M;
}

}  // namespace

IoHistory::IoHistory(int order, int ny, int nu) : order_(order) {
  if (order < 1 || ny < 1 || nu < 1) {
    throw std::invalid_argument("IoHistory: dimensions must be positive");
  }
  const std::size_t depth = static_cast<std::size_t>(2 * order - 1);
  ys_.assign(depth, VectorXd::Zero(ny));
  us_.assign(depth, VectorXd::Zero(nu));
}

void IoHistory::push(const VectorXd& y, const VectorXd& u) {
  if (y.size() != ys_.front().size() || u.size() != us_.front().size()) {
    throw std::invalid_argument("IoHistory: sample dimensions mismatch");
  }
  ys_.insert(ys_.begin(), y);
  ys_.pop_back();
  us_.insert(us_.begin(), u);
  us_.pop_back();
}

IoWindow IoHistory::window_at(int shift) const {
  IoWindow win;
  win.y.assign(ys_.begin() + shift, ys_.begin() + shift + order_);
  win.u.assign(us_.begin() + shift, us_.begin() + shift + order_);
  return win;
}

BocfSystem build_bocf(const IoCoefficients& co, const IoWindow& window) {
  const int n = co.order;
  const int p = co.ny;
  const int m = co.nu;
  if (static_cast<int>(window.y.size()) != n || static_cast<int>(window.u.size()) != n) {
    throw std::invalid_argument("build_bocf: window must hold `order` samples");
  }

  BocfSystem sys;
  sys.A = MatrixXd::Zero(n * p, n * p);
  sys.B = MatrixXd::Zero(n * p, m);
  sys.C = MatrixXd::Zero(p, n * p);
  sys.C.leftCols(p) = MatrixXd::Identity(p, p);

  for (int tau = 1; tau <= n; ++tau) {
    const MatrixXd F = eval_map(co.f, tau, window, p, p, "F");
    const MatrixXd G = eval_map(co.g, tau, window, p, m, "G");
    sys.A.block((tau - 1) * p, 0, p, p) = -F;
    if (tau < n) {
      sys.A.block((tau - 1) * p, tau * p, p, p) = MatrixXd::Identity(p, p);
    }
    sys.B.middleRows((tau - 1) * p, p) = G;
  }
  return sys;
}

VectorXd reconstruct_state(const IoCoefficients& co, const IoHistory& hist,
                           const VectorXd& y_k) {
  const int n = co.order;
  const int p = co.ny;
  if (y_k.size() != p) {
    throw std::invalid_argument("reconstruct_state: output dimension mismatch");
  }

  VectorXd x(n * p);
  x.head(p) = y_k;
  if (n == 1) {
    return x;
  }

  // Unrolling the companion recursion shows the term s steps back entered
  // the state with the coefficients of its own time, so each term gets the
  // window ending at that sample.
  std::vector<IoWindow> wins(static_cast<std::size_t>(n));
  for (int s = 1; s < n; ++s) {
    wins[static_cast<std::size_t>(s)] = hist.window_at(s - 1);
  }
  for (int tau = 2; tau <= n; ++tau) {
    VectorXd acc = VectorXd::Zero(p);
    for (int s = 1; s <= n - tau + 1; ++s) {
      const int idx = tau + s - 1;  // coefficient index, 1-based
      const IoWindow& win = wins[static_cast<std::size_t>(s)];
      acc += -eval_map(co.f, idx, win, p, p, "F") * hist.y_back(s) +
             eval_map(co.g, idx, win, p, co.nu, "G") * hist.u_back(s);
    }
    x.segment((tau - 1) * p, p) = acc;
  }
  return x;
}

ScdcModel bocf_scdc_model(const IoCoefficients& co, const IoHistory& hist) {
  ScdcModel model;
  model.n = co.order * co.ny;
  model.m = co.nu;
  model.label = "bocf[" + std::to_string(co.order) + "]";
  model.coeff = [co, measured = hist.window()](std::span<const VectorXd> xs,
                                               std::span<const VectorXd> us, MatrixXd& A,
                                               MatrixXd& B) {
    const int n = co.order;
    const int p = co.ny;
    const int j = static_cast<int>(xs.size()) - 1;  // current prediction stage
    IoWindow win;
    win.y.resize(static_cast<std::size_t>(n));
    win.u.resize(static_cast<std::size_t>(n));
    for (int s = 1; s <= n; ++s) {
      const int q = j + 1 - s;  // stage of the window sample
      if (q >= 0) {
        win.y[s - 1] = xs[q].head(p);
        win.u[s - 1] = us[q];
      } else {
        win.y[s - 1] = measured.y[-q - 1];
        win.u[s - 1] = measured.u[-q - 1];
      }
    }
    BocfSystem sys = build_bocf(co, win);
    A = std::move(sys.A);
    B = std::move(sys.B);
  };
  return model;
}

}  // namespace iscd
