#pragma once

#include <span>
#include <vector>

#include "iscd/qp.hpp"
#include "iscd/scdc.hpp"

namespace iscd {

/// Configuration of one receding-horizon controller.
struct MpcConfig {
  int horizon = 2;          // number of predicted stages, >= 2
  int max_iterations = 1;   // iteration cap per step, >= 1
  double tolerance = 1e-3;  // stopping tolerance on the control sequence
  HorizonWeights weights;
  ConstraintSet constraints;

  void validate(int n, int m) const;
};

/// Forward pass of one candidate control sequence. `states` holds the
/// predicted states for stages 1..l; `A`/`B` hold the coefficients evaluated
/// along the pass for stages 0..l-1.
struct Propagation {
  std::vector<VectorXd> states;
  std::vector<MatrixXd> A;
  std::vector<MatrixXd> B;
};

/// Simulate the pseudo-linear map from (x_k, u_k) under the stacked sequence
/// U = (u_1, ..., u_{l-1}). The first predicted state equals the plant map of
/// the current sample and does not depend on U. Throws DivergenceError with
/// the failing stage when a state leaves the finite domain.
Propagation propagate(const ScdcModel& model, const VectorXd& x_k, const VectorXd& u_k,
                      const VectorXd& sequence);

struct IterateResult {
  VectorXd sequence;  // QP minimizer, or the previous iterate when not optimal
  QpSolution qp;
};

/// One inner iteration: freeze the coefficients along the previous iterate's
/// trajectory, condense, and solve the resulting QP.
IterateResult iterate_once(const ScdcModel& model, const VectorXd& x_k,
                           const VectorXd& u_k, const VectorXd& prev,
                           const MpcConfig& cfg);

struct StepDiagnostics {
  int last_iteration = 1;  // index of the last iterate; the warm start counts as 1
  std::vector<double> iterate_gaps;   // |U_i - U_{i-1}|, one per solved QP
  std::vector<QpStatus> qp_statuses;  // per inner iteration
  double predicted_cost = 0.0;        // horizon cost along the final iterate
  bool qp_fallback = false;           // a non-optimal QP ended the iterations
};

struct StepResult {
  VectorXd u_next;    // control to apply at the next step
  VectorXd sequence;  // final iterate, input to the next warm start
  StepDiagnostics diagnostics;
};

/// One full controller step: iterate from the warm start until the control
/// sequence changes by less than the tolerance (Euclidean norm) or the
/// iteration cap is reached, then return the head of the final sequence.
/// With max_iterations == 1 no QP is solved and the warm start is applied
/// unchanged. A non-optimal QP keeps the previous iterate and ends the
/// iterations for this step.
StepResult mpc_step(const ScdcModel& model, const VectorXd& x_k, const VectorXd& u_k,
                    const VectorXd& warm, const MpcConfig& cfg);

/// Shift a finished sequence one stage forward, duplicating the last block:
/// (u_1, u_2, ..., u_{l-1}) -> (u_2, ..., u_{l-1}, u_{l-1}).
VectorXd warm_start_shift(const VectorXd& sequence, int m);

/// Initial warm start: u0 replicated over the horizon.
VectorXd replicate_control(const VectorXd& u0, int horizon);

/// Horizon cost 1/2 x_l^T Q_l x_l + 1/2 sum_j (x_j^T Q x_j + u_j^T R u_j)
/// over states x_1..x_l and controls u_1..u_{l-1}.
double evaluate_cost(std::span<const VectorXd> states, const VectorXd& sequence,
                     const HorizonWeights& w);

}  // namespace iscd
