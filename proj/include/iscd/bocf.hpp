#pragma once

#include <functional>
#include <vector>

#include "iscd/scdc.hpp"

namespace iscd {

/// The last `order` samples of an input-output recursion, most recent first:
/// y[s-1] and u[s-1] are the output and control s steps back.
struct IoWindow {
  std::vector<VectorXd> y;
  std::vector<VectorXd> u;
};

/// Coefficient maps of an input-output recursion of order n,
///
///   y_k = -sum_tau F_tau y_{k-tau} + sum_tau G_tau u_{k-tau},
///
/// where F_tau (ny x ny) and G_tau (ny x nu) are evaluated on the window of
/// the n preceding samples.
struct IoCoefficients {
  int order = 1;
  int ny = 1;
  int nu = 1;
  std::function<MatrixXd(int tau, const IoWindow&)> f;
  std::function<MatrixXd(int tau, const IoWindow&)> g;
};

/// Rolling measured history feeding the coefficient maps; starts from zero
/// initial data. Holds 2*order - 1 samples so that state reconstruction can
/// evaluate the maps on shifted windows. Owned by one controller instance.
class IoHistory {
 public:
  IoHistory(int order, int ny, int nu);
  explicit IoHistory(const IoCoefficients& co) : IoHistory(co.order, co.ny, co.nu) {}

  /// Record the sample of the step just completed.
  void push(const VectorXd& y, const VectorXd& u);

  /// The `order` most recent samples.
  IoWindow window() const { return window_at(0); }

  /// The `order` samples ending `shift` steps further back.
  IoWindow window_at(int shift) const;

  const VectorXd& y_back(int s) const { return ys_[s - 1]; }  // y of s steps back
  const VectorXd& u_back(int s) const { return us_[s - 1]; }

 private:
  int order_;
  std::vector<VectorXd> ys_;  // most recent first
  std::vector<VectorXd> us_;
};

/// Observable-canonical state-space realization of the recursion: block
/// companion A with identity superdiagonal blocks, stacked coefficient B,
/// and C selecting the leading output block.
struct BocfSystem {
  MatrixXd A;
  MatrixXd B;
  MatrixXd C;
};

/// Evaluate the coefficient maps on `window` and assemble the realization.
/// To advance the state from sample k, the window must end at (y_k, u_k).
BocfSystem build_bocf(const IoCoefficients& co, const IoWindow& window);

/// Reconstruct the realization's full state at sample k from the measured
/// history and the current output: a deadbeat observer, exact for any
/// coefficient sequence the recursion was driven with. The leading block of
/// the result is y_k itself; each remaining term evaluates the coefficient
/// maps on the window ending at that term's own sample, which collapses to a
/// single window when the coefficients do not vary in time.
VectorXd reconstruct_state(const IoCoefficients& co, const IoHistory& hist,
                           const VectorXd& y_k);

/// Wrap the realization as a pseudo-linear model over the n*ny-dimensional
/// state. Inside a prediction pass the coefficient windows are assembled
/// from the pass itself (predicted outputs are the leading block of each
/// predicted state); samples before the pass come from `hist`.
ScdcModel bocf_scdc_model(const IoCoefficients& co, const IoHistory& hist);

}  // namespace iscd
