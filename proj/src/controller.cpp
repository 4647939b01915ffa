#include "iscd/controller.hpp"

#include <cmath>
#include <stdexcept>

namespace iscd {

void MpcConfig::validate(int n, int m) const {
  if (horizon < 2) {
    throw std::invalid_argument("MpcConfig: horizon must be at least 2");
  }
  if (max_iterations < 1) {
    throw std::invalid_argument("MpcConfig: max_iterations must be at least 1");
  }
  if (!(tolerance > 0.0)) {
    throw std::invalid_argument("MpcConfig: tolerance must be positive");
  }
  weights.validate(n, m);
  constraints.validate(static_cast<Eigen::Index>(horizon) * (n + m) - m);
}

Propagation propagate(const ScdcModel& model, const VectorXd& x_k, const VectorXd& u_k,
                      const VectorXd& sequence) {
  const int m = model.m;
  if (m <= 0 || sequence.size() % m != 0 || sequence.size() == 0) {
    throw std::invalid_argument("propagate: sequence length must be a positive multiple of m");
  }
  if (x_k.size() != model.n || u_k.size() != m) {
    throw std::invalid_argument("propagate: sample dimensions mismatch");
  }
  const int lm1 = static_cast<int>(sequence.size()) / m;
  const int l = lm1 + 1;

  // The pass is exposed to the coefficient map via spans, so reserve up
  // front; no reallocation may happen while it runs.
  std::vector<VectorXd> xs, us;
  xs.reserve(static_cast<std::size_t>(l) + 1);
  us.reserve(static_cast<std::size_t>(l));
  xs.push_back(x_k);
  us.push_back(u_k);

  Propagation out;
  out.states.reserve(l);
  out.A.reserve(l);
  out.B.reserve(l);

  for (int j = 0; j < l; ++j) {
    MatrixXd A, B;
    model.eval(std::span<const VectorXd>(xs.data(), xs.size()),
               std::span<const VectorXd>(us.data(), us.size()), A, B);
    VectorXd next = A * xs.back() + B * us.back();
    if (!next.allFinite()) {
      throw DivergenceError(model.label + ": prediction diverged at stage " +
                                std::to_string(j + 1),
                            j + 1);
    }
    out.A.push_back(std::move(A));
    out.B.push_back(std::move(B));
    out.states.push_back(next);
    xs.push_back(std::move(next));
    if (j + 1 < l) {
      us.push_back(sequence.segment(static_cast<Eigen::Index>(j) * m, m));
    }
  }
  return out;
}

IterateResult iterate_once(const ScdcModel& model, const VectorXd& x_k,
                           const VectorXd& u_k, const VectorXd& prev,
                           const MpcConfig& cfg) {
  if (prev.size() != static_cast<Eigen::Index>(cfg.horizon - 1) * model.m) {
    throw std::invalid_argument("iterate_once: sequence length disagrees with the horizon");
  }
  const Propagation prop = propagate(model, x_k, u_k, prev);

  // The QP sees the frozen coefficients of stages 1..l-1; the stage-0
  // coefficients only produce the fixed head state.
  const std::span<const MatrixXd> A1(prop.A.data() + 1, prop.A.size() - 1);
  const std::span<const MatrixXd> B1(prop.B.data() + 1, prop.B.size() - 1);
  const QpProblem qp = condense(A1, B1, prop.states.front(), cfg.weights, cfg.constraints);
  QpSolution sol = solve_qp(qp);

  IterateResult out;
  out.sequence = (sol.status == QpStatus::optimal) ? sol.z : prev;
  out.qp = std::move(sol);
  return out;
}

StepResult mpc_step(const ScdcModel& model, const VectorXd& x_k, const VectorXd& u_k,
                    const VectorXd& warm, const MpcConfig& cfg) {
  cfg.validate(model.n, model.m);
  if (warm.size() != static_cast<Eigen::Index>(cfg.horizon - 1) * model.m) {
    throw std::invalid_argument("mpc_step: warm start length disagrees with the horizon");
  }

  StepResult out;
  StepDiagnostics& diag = out.diagnostics;
  VectorXd U = warm;
  int last = 1;

  for (int i = 2; i <= cfg.max_iterations; ++i) {
    IterateResult it = iterate_once(model, x_k, u_k, U, cfg);
    diag.qp_statuses.push_back(it.qp.status);
    if (it.qp.status != QpStatus::optimal) {
      diag.qp_fallback = true;
      last = i - 1;
      break;
    }
    const double gap = (it.sequence - U).norm();
    diag.iterate_gaps.push_back(gap);
    U = std::move(it.sequence);
    last = i;
    if (gap < cfg.tolerance) {
      break;
    }
  }

  diag.last_iteration = last;
  const Propagation final_pass = propagate(model, x_k, u_k, U);
  diag.predicted_cost = evaluate_cost(final_pass.states, U, cfg.weights);
  out.u_next = U.head(model.m);
  out.sequence = std::move(U);
  return out;
}

VectorXd warm_start_shift(const VectorXd& sequence, int m) {
  if (m <= 0 || sequence.size() % m != 0 || sequence.size() == 0) {
    throw std::invalid_argument("warm_start_shift: sequence length must be a positive multiple of m");
  }
  const Eigen::Index d = sequence.size();
  VectorXd out(d);
  out.head(d - m) = sequence.tail(d - m);
  out.tail(m) = sequence.tail(m);
  return out;
}

VectorXd replicate_control(const VectorXd& u0, int horizon) {
  if (horizon < 2) {
    throw std::invalid_argument("replicate_control: horizon must be at least 2");
  }
  const Eigen::Index m = u0.size();
  VectorXd out(static_cast<Eigen::Index>(horizon - 1) * m);
  for (int j = 0; j < horizon - 1; ++j) {
    out.segment(static_cast<Eigen::Index>(j) * m, m) = u0;
  }
  return out;
}

double evaluate_cost(std::span<const VectorXd> states, const VectorXd& sequence,
                     const HorizonWeights& w) {
  const std::size_t l = states.size();
  if (l < 2) {
    throw std::invalid_argument("evaluate_cost: need at least two predicted states");
  }
  const Eigen::Index m = w.R.rows();
  if (sequence.size() != static_cast<Eigen::Index>(l - 1) * m) {
    throw std::invalid_argument("evaluate_cost: sequence length disagrees with the states");
  }
  double cost = 0.5 * states.back().dot(w.Q_terminal * states.back());
  for (std::size_t j = 0; j + 1 < l; ++j) {
    const VectorXd& x = states[j];
    const VectorXd u = sequence.segment(static_cast<Eigen::Index>(j) * m, m);
    cost += 0.5 * x.dot(w.Q * x) + 0.5 * u.dot(w.R * u);
  }
  return cost;
}

}  // namespace iscd
