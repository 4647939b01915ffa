#pragma once

#include <Eigen/Dense>

#include <limits>
#include <span>
#include <vector>

namespace iscd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Stage weights of the horizon cost. Q and Q_terminal must be symmetric
/// positive semidefinite; R must be symmetric positive definite (checked by
/// attempted factorization).
struct HorizonWeights {
  MatrixXd Q;
  MatrixXd Q_terminal;
  MatrixXd R;

  void validate(int n, int m) const;
};

/// Constraints over the stacked horizon vector
///
///   v = (x_1, ..., x_l, u_1, ..., u_{l-1}),
///
/// of dimension l*(n+m) - m. Empty matrices mean no rows of that kind; box
/// bounds use +-infinity for unbounded components and may be empty.
struct ConstraintSet {
  MatrixXd A_ineq;  // A_ineq v <= b_ineq
  VectorXd b_ineq;
  MatrixXd A_eq;  // A_eq v = b_eq
  VectorXd b_eq;
  VectorXd lb;  // lb <= v <= ub
  VectorXd ub;
  // Per-channel bounds applied to the control of every stage. Unlike the
  // stacked bounds these do not depend on the horizon length.
  VectorXd u_lb;
  VectorXd u_ub;

  bool empty() const;
  void validate(Eigen::Index stacked_dim) const;
};

enum class QpStatus { optimal, infeasible, max_iter };

const char* to_string(QpStatus s);

/// Dense condensed quadratic program over the stacked control vector z:
///
///   min  1/2 z^T H z + g^T z + offset
///   s.t. G_ineq z <= h_ineq,  G_eq z = h_eq,  lb <= z <= ub.
///
/// H is symmetric positive definite by construction (it inherits R > 0
/// through condensing). The offset does not affect the minimizer.
struct QpProblem {
  MatrixXd H;
  VectorXd g;
  MatrixXd G_ineq;
  VectorXd h_ineq;
  MatrixXd G_eq;
  VectorXd h_eq;
  VectorXd lb;
  VectorXd ub;
  double offset = 0.0;

  Eigen::Index dim() const { return g.size(); }
  double objective(const VectorXd& z) const;
};

struct QpMultipliers {
  VectorXd ineq;   // one per G_ineq row
  VectorXd eq;     // one per G_eq row, sign free
  VectorXd lower;  // one per component, lb side
  VectorXd upper;  // one per component, ub side
};

/// Active-set indices reported by solve_qp refer to the inequality
/// constraints in this order: general rows first, then finite upper bounds
/// by component, then finite lower bounds by component.
struct QpSolution {
  VectorXd z;
  QpStatus status = QpStatus::max_iter;
  double kkt_residual = std::numeric_limits<double>::infinity();
  std::vector<int> active_set;
  QpMultipliers multipliers;
  int pivots = 0;
};

/// Build the condensed QP of one horizon subproblem. A_seq and B_seq hold
/// the frozen stage coefficients for stages 1..l-1 and xi1 is the fixed head
/// state, so the predicted states
///
///   xi_{j+1} = A_j xi_j + B_j mu_j,  j = 1..l-1,
///
/// are eliminated and z = (mu_1, ..., mu_{l-1}). Constant cost terms go into
/// `offset`. Constraint rows and bounds acting on state components of the
/// stacked vector are mapped through the prediction matrices onto z; rows
/// acting on control components map directly.
QpProblem condense(std::span<const MatrixXd> A_seq, std::span<const MatrixXd> B_seq,
                   const VectorXd& xi1, const HorizonWeights& w, const ConstraintSet& c);

/// Solve the QP with a dual active-set method (one factorization update per
/// added constraint). Requires H positive definite. With status == optimal
/// the solution satisfies stationarity, primal and dual feasibility and
/// complementary slackness to 1e-8 in the scaled infinity norm; infeasible
/// constraint sets are detected, and hitting the pivot cap returns the best
/// iterate with status == max_iter.
QpSolution solve_qp(const QpProblem& p);

/// Infinity norm of the stacked KKT residual (stationarity, primal and dual
/// feasibility, complementary slackness) at (z, m). Each block is divided by
/// the magnitude of the data entering it, floored at one, so the value
/// reduces to the plain infinity norm on unit-scale problems and is zero at
/// an exact optimum.
double kkt_residual(const QpProblem& p, const VectorXd& z, const QpMultipliers& m);

}  // namespace iscd
