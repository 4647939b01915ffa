#include "iscd/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace iscd {

namespace {

constexpr double kKktTol = 1e-8;
constexpr double kFeasTol = 1e-10;

double inf() { return std::numeric_limits<double>::infinity(); }

MatrixXd matrix_sqrt_psd(const MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
  const VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// H^{-1} rhs, optionally with one iterative-refinement pass whose residual
// is accumulated in long double; badly conditioned horizon costs (diagonal
// spans many orders of magnitude) still yield usable stationarity that way.
VectorXd refined_solve(const Eigen::LLT<MatrixXd>& llt, const MatrixXd& H,
                       const VectorXd& rhs, bool refine) {
  VectorXd z = llt.solve(rhs);
  if (!refine) {
    return z;
  }
  const Eigen::Index d = rhs.size();
  VectorXd r(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    long double acc = rhs[i];
    for (Eigen::Index j = 0; j < d; ++j) {
      acc -= static_cast<long double>(H(i, j)) * static_cast<long double>(z[j]);
    }
    r[i] = static_cast<double>(acc);
  }
  z += llt.solve(r);
  return z;
}

enum class ConstraintKind { equality, row, upper, lower };

struct LinearConstraint {
  VectorXd normal;
  double rhs = 0.0;
  ConstraintKind kind = ConstraintKind::row;
  int source = 0;  // row index or component index
  int id = -1;     // reporting index for inequality-type constraints
  double sign = 1.0;  // equality rows may be engaged with flipped sign
};

}  // namespace

void HorizonWeights::validate(int n, int m) const {
  auto check_dims = [](const MatrixXd& M, int dim, const char* name) {
    if (M.rows() != dim || M.cols() != dim) {
      throw std::invalid_argument(std::string("HorizonWeights: ") + name +
                                  " has wrong dimensions");
    }
  };
  check_dims(Q, n, "Q");
  check_dims(Q_terminal, n, "Q_terminal");
  check_dims(R, m, "R");
  auto check_sym_psd = [](const MatrixXd& M, const char* name) {
    const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
      throw std::invalid_argument(std::string("HorizonWeights: ") + name +
                                  " is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw std::invalid_argument(std::string("HorizonWeights: ") + name +
                                  " is not positive semidefinite");
    }
  };
  check_sym_psd(Q, "Q");
  check_sym_psd(Q_terminal, "Q_terminal");
  const double rscale = std::max(1.0, R.cwiseAbs().maxCoeff());
  if ((R - R.transpose()).cwiseAbs().maxCoeff() > 1e-10 * rscale) {
    throw std::invalid_argument("HorizonWeights: R is not symmetric");
  }
  Eigen::LLT<MatrixXd> llt(R);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("HorizonWeights: R is not positive definite");
  }
}

bool ConstraintSet::empty() const {
  return A_ineq.rows() == 0 && A_eq.rows() == 0 && lb.size() == 0 && ub.size() == 0 &&
         u_lb.size() == 0 && u_ub.size() == 0;
}

void ConstraintSet::validate(Eigen::Index stacked_dim) const {
  if (A_ineq.rows() != b_ineq.size() ||
      (A_ineq.rows() > 0 && A_ineq.cols() != stacked_dim)) {
    throw std::invalid_argument("ConstraintSet: inconsistent inequality rows");
  }
  if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != stacked_dim)) {
    throw std::invalid_argument("ConstraintSet: inconsistent equality rows");
  }
  if (lb.size() != ub.size()) {
    throw std::invalid_argument("ConstraintSet: lb and ub must have equal size");
  }
  if (lb.size() > 0) {
    if (lb.size() != stacked_dim) {
      throw std::invalid_argument("ConstraintSet: bounds must cover the stacked vector");
    }
    for (Eigen::Index s = 0; s < lb.size(); ++s) {
      if (std::isfinite(lb[s]) && std::isfinite(ub[s]) && !(lb[s] < ub[s])) {
        throw std::invalid_argument("ConstraintSet: requires lb < ub per component");
      }
    }
  }
  if (u_lb.size() != u_ub.size()) {
    throw std::invalid_argument("ConstraintSet: u_lb and u_ub must have equal size");
  }
  for (Eigen::Index s = 0; s < u_lb.size(); ++s) {
    if (!(u_lb[s] < u_ub[s])) {
      throw std::invalid_argument("ConstraintSet: requires u_lb < u_ub per channel");
    }
  }
}

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal:
      return "optimal";
    case QpStatus::infeasible:
      return "infeasible";
    case QpStatus::max_iter:
      return "max_iter";
  }
  return "unknown";
}

double QpProblem::objective(const VectorXd& z) const {
  return 0.5 * z.dot(H * z) + g.dot(z) + offset;
}

QpProblem condense(std::span<const MatrixXd> A_seq, std::span<const MatrixXd> B_seq,
                   const VectorXd& xi1, const HorizonWeights& w, const ConstraintSet& c) {
  if (A_seq.empty() || A_seq.size() != B_seq.size()) {
    throw std::invalid_argument("condense: coefficient sequences must be non-empty and equal length");
  }
  const int lm1 = static_cast<int>(A_seq.size());
  const int l = lm1 + 1;
  const Eigen::Index n = xi1.size();
  const Eigen::Index m = B_seq[0].cols();
  for (int j = 0; j < lm1; ++j) {
    if (A_seq[j].rows() != n || A_seq[j].cols() != n || B_seq[j].rows() != n ||
        B_seq[j].cols() != m) {
      throw std::invalid_argument("condense: coefficient dimensions mismatch at stage " +
                                  std::to_string(j + 1));
    }
  }
  w.validate(static_cast<int>(n), static_cast<int>(m));
  const Eigen::Index d = m * lm1;
  const Eigen::Index ln = l * n;
  c.validate(ln + d);

  QpProblem p;
  p.H = MatrixXd::Zero(d, d);
  for (int j = 0; j < lm1; ++j) {
    p.H.block(j * m, j * m, m, m) = w.R;
  }
  p.g = VectorXd::Zero(d);
  p.offset = 0.5 * xi1.dot(w.Q * xi1);

  bool state_bounds = false;
  if (c.lb.size() > 0) {
    for (Eigen::Index s = 0; s < ln && !state_bounds; ++s) {
      state_bounds = std::isfinite(c.lb[s]) || std::isfinite(c.ub[s]);
    }
  }
  const bool need_stack = c.A_ineq.rows() > 0 || c.A_eq.rows() > 0 || state_bounds;

  // Constant coefficient matrix over the horizon (integrator-like models and
  // frozen linear parts): the weighted sums telescope, so H and g follow in
  // O(l^2) block products instead of the O(l^3) forward recursion.
  bool const_A = !need_stack;
  for (int j = 1; j < lm1 && const_A; ++j) {
    const_A = (A_seq[j] - A_seq[0]).cwiseAbs().maxCoeff() == 0.0;
  }
  if (const_A) {  // cost terms only; constraint mapping continues below
    const MatrixXd& A = A_seq[0];
    std::vector<MatrixXd> T(static_cast<std::size_t>(l) + 1);
    T[l] = w.Q_terminal;
    for (int k = l - 1; k >= 2; --k) {
      T[k] = w.Q + A.transpose() * T[k + 1] * A;
    }
    std::vector<VectorXd> phi(static_cast<std::size_t>(l) + 1);
    phi[1] = xi1;
    for (int j = 2; j <= l; ++j) {
      phi[j] = A * phi[j - 1];
      const MatrixXd& Qj = (j == l) ? w.Q_terminal : w.Q;
      p.offset += 0.5 * phi[j].dot(Qj * phi[j]);
    }
    std::vector<VectorXd> wk(static_cast<std::size_t>(l) + 1);
    wk[l] = w.Q_terminal * phi[l];
    for (int k = l - 1; k >= 2; --k) {
      wk[k] = w.Q * phi[k] + A.transpose() * wk[k + 1];
    }
    const MatrixXd At = A.transpose();
    if (m == 1) {
      // diagonal sweep: V carries (A^T)^delta T_{b+1} B_b for every column b
      MatrixXd Bmat(n, lm1), V(n, lm1), Vnext(n, lm1);
      for (int b = 1; b <= lm1; ++b) {
        Bmat.col(b - 1) = B_seq[b - 1].col(0);
        V.col(b - 1).noalias() = T[b + 1] * B_seq[b - 1].col(0);
      }
      Eigen::RowVectorXd vals(lm1);
      for (int delta = 0; delta < lm1; ++delta) {
        const int count = lm1 - delta;
        vals.head(count) =
            Bmat.leftCols(count).cwiseProduct(V.rightCols(count)).colwise().sum();
        for (int a = 1; a <= count; ++a) {
          p.H(a - 1, a + delta - 1) += vals[a - 1];
          if (delta > 0) {
            p.H(a + delta - 1, a - 1) += vals[a - 1];
          }
        }
        if (delta + 1 < lm1) {
          Vnext.noalias() = At * V;
          V.swap(Vnext);
        }
      }
      for (int b = 1; b <= lm1; ++b) {
        p.g[b - 1] += B_seq[b - 1].col(0).dot(wk[b + 1]);
      }
    } else {
      // column sweep: R carries (A^T)^(b-a) T_{b+1} B_b while a runs down
      MatrixXd R(n, m), Rnext(n, m), blk(m, m);
      for (int b = 1; b <= lm1; ++b) {
        R.noalias() = T[b + 1] * B_seq[b - 1];
        for (int a = b; a >= 1; --a) {
          blk.noalias() = B_seq[a - 1].transpose() * R;
          p.H.block((a - 1) * m, (b - 1) * m, m, m) += blk;
          if (a != b) {
            p.H.block((b - 1) * m, (a - 1) * m, m, m) += blk.transpose();
          }
          if (a > 1) {
            Rnext.noalias() = At * R;
            R.swap(Rnext);
          }
        }
        p.g.segment((b - 1) * m, m).noalias() += B_seq[b - 1].transpose() * wk[b + 1];
      }
    }
  }

  MatrixXd Gbar;
  VectorXd phibar;
  if (!const_A) {
    const MatrixXd sqQ = matrix_sqrt_psd(w.Q);
    const MatrixXd sqQl = matrix_sqrt_psd(w.Q_terminal);

    if (need_stack) {
      Gbar = MatrixXd::Zero(ln, d);
      phibar = VectorXd::Zero(ln);
      phibar.head(n) = xi1;
    }

    // Forward recursion over the prediction, accumulating the cost on the
    // fly. xi_{j+1} depends only on mu_1..mu_j, so each rank update touches
    // the leading j*m columns only.
    MatrixXd G = MatrixXd::Zero(n, d);
    MatrixXd Gtmp(n, d), W(n, d);
    VectorXd phi = xi1;
    for (int j = 1; j <= lm1; ++j) {
      Gtmp.noalias() = A_seq[j - 1] * G;
      G.swap(Gtmp);
      G.middleCols((j - 1) * m, m) = B_seq[j - 1];
      phi = A_seq[j - 1] * phi;

      const bool terminal = (j == lm1);
      const MatrixXd& Qj = terminal ? w.Q_terminal : w.Q;
      const MatrixXd& sq = terminal ? sqQl : sqQ;
      const Eigen::Index active = j * m;
      W.leftCols(active).noalias() = sq * G.leftCols(active);
      p.H.topLeftCorner(active, active)
          .selfadjointView<Eigen::Lower>()
          .rankUpdate(W.leftCols(active).transpose());
      p.g.head(active).noalias() += G.leftCols(active).transpose() * (Qj * phi);
      p.offset += 0.5 * phi.dot(Qj * phi);

      if (need_stack) {
        Gbar.middleRows(j * n, n) = G;
        phibar.segment(j * n, n) = phi;
      }
    }
    p.H = MatrixXd(p.H.selfadjointView<Eigen::Lower>());
  }

  if (c.A_ineq.rows() > 0) {
    p.G_ineq = c.A_ineq.leftCols(ln) * Gbar + c.A_ineq.rightCols(d);
    p.h_ineq = c.b_ineq - c.A_ineq.leftCols(ln) * phibar;
  }
  if (c.A_eq.rows() > 0) {
    p.G_eq = c.A_eq.leftCols(ln) * Gbar + c.A_eq.rightCols(d);
    p.h_eq = c.b_eq - c.A_eq.leftCols(ln) * phibar;
  }

  if (c.lb.size() > 0) {
    bool any_ctrl = false;
    VectorXd zlb = VectorXd::Constant(d, -inf());
    VectorXd zub = VectorXd::Constant(d, inf());
    for (Eigen::Index s = 0; s < d; ++s) {
      zlb[s] = c.lb[ln + s];
      zub[s] = c.ub[ln + s];
      any_ctrl = any_ctrl || std::isfinite(zlb[s]) || std::isfinite(zub[s]);
    }
    if (any_ctrl) {
      p.lb = std::move(zlb);
      p.ub = std::move(zub);
    }
    if (state_bounds) {
      std::vector<std::pair<VectorXd, double>> rows;
      for (Eigen::Index s = 0; s < ln; ++s) {
        if (std::isfinite(c.ub[s])) {
          rows.emplace_back(Gbar.row(s), c.ub[s] - phibar[s]);
        }
        if (std::isfinite(c.lb[s])) {
          rows.emplace_back(-Gbar.row(s), phibar[s] - c.lb[s]);
        }
      }
      const Eigen::Index base = p.G_ineq.rows();
      p.G_ineq.conservativeResize(base + static_cast<Eigen::Index>(rows.size()), d);
      p.h_ineq.conservativeResize(base + static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        p.G_ineq.row(base + static_cast<Eigen::Index>(r)) = rows[r].first;
        p.h_ineq[base + static_cast<Eigen::Index>(r)] = rows[r].second;
      }
    }
  }

  if (c.u_lb.size() > 0) {
    if (c.u_lb.size() != m) {
      throw std::invalid_argument("condense: per-channel bounds must have m entries");
    }
    if (p.lb.size() == 0) {
      p.lb = VectorXd::Constant(d, -inf());
      p.ub = VectorXd::Constant(d, inf());
    }
    for (Eigen::Index s = 0; s < d; ++s) {
      p.lb[s] = std::max(p.lb[s], c.u_lb[s % m]);
      p.ub[s] = std::min(p.ub[s], c.u_ub[s % m]);
    }
  }
  return p;
}

QpSolution solve_qp(const QpProblem& p0) {
  const Eigen::Index d = p0.dim();
  if (p0.H.rows() != d || p0.H.cols() != d) {
    throw std::invalid_argument("solve_qp: H and g dimensions mismatch");
  }
  if (d == 0) {
    QpSolution trivial;
    trivial.status = QpStatus::optimal;
    trivial.kkt_residual = 0.0;
    return trivial;
  }
  const VectorXd diag = p0.H.diagonal();
  if ((diag.array() <= 0.0).any()) {
    throw std::invalid_argument("solve_qp: H is not positive definite");
  }

  // Jacobi equilibration z = D z~: heavily weighted horizons put fifteen
  // orders of magnitude on the diagonal, which the working set arithmetic
  // cannot survive unscaled. Solutions and multipliers map back exactly.
  const VectorXd D = diag.cwiseSqrt().cwiseInverse();
  const bool refine = diag.maxCoeff() / diag.minCoeff() > 1e10;

  QpProblem p;
  p.H = D.asDiagonal() * p0.H * D.asDiagonal();
  p.g = D.cwiseProduct(p0.g);
  if (p0.G_ineq.rows() > 0) {
    p.G_ineq = p0.G_ineq * D.asDiagonal();
    p.h_ineq = p0.h_ineq;
  }
  if (p0.G_eq.rows() > 0) {
    p.G_eq = p0.G_eq * D.asDiagonal();
    p.h_eq = p0.h_eq;
  }
  if (p0.lb.size() > 0) {
    p.lb = p0.lb.cwiseQuotient(D);
    p.ub = p0.ub.cwiseQuotient(D);
  }

  Eigen::LLT<MatrixXd> llt(p.H);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve_qp: H is not positive definite");
  }

  QpSolution sol;
  sol.z = refined_solve(llt, p.H, -p.g, refine);
  sol.multipliers.ineq = VectorXd::Zero(p.G_ineq.rows());
  sol.multipliers.eq = VectorXd::Zero(p.G_eq.rows());
  sol.multipliers.lower = VectorXd::Zero(d);
  sol.multipliers.upper = VectorXd::Zero(d);

  // Maps the scaled iterate and bound multipliers back, then evaluates the
  // KKT residual on the problem as given.
  auto unscale_and_check = [&](QpSolution& s) {
    s.z = D.cwiseProduct(s.z).eval();
    s.multipliers.lower = s.multipliers.lower.cwiseQuotient(D).eval();
    s.multipliers.upper = s.multipliers.upper.cwiseQuotient(D).eval();
    s.kkt_residual = kkt_residual(p0, s.z, s.multipliers);
    if (s.status == QpStatus::optimal && s.kkt_residual > kKktTol) {
      s.status = QpStatus::max_iter;
    }
  };

  // Unconstrained fast path; this is the route taken by every benchmark run,
  // where saturation lives in the coefficients instead of the constraint set.
  const bool has_bounds = p.lb.size() > 0 || p.ub.size() > 0;
  if (p.G_ineq.rows() == 0 && p.G_eq.rows() == 0 && !has_bounds) {
    sol.status = QpStatus::optimal;
    unscale_and_check(sol);
    return sol;
  }

  if (has_bounds && (p.lb.size() != d || p.ub.size() != d)) {
    throw std::invalid_argument("solve_qp: bounds must cover every variable");
  }

  // Unified constraint list: equalities first, then inequality rows, finite
  // upper bounds, finite lower bounds. The inequality-type positions define
  // the reported active-set indices.
  std::vector<LinearConstraint> cons;
  const int n_eq = static_cast<int>(p.G_eq.rows());
  for (int r = 0; r < n_eq; ++r) {
    cons.push_back({p.G_eq.row(r).transpose(), p.h_eq[r], ConstraintKind::equality, r, -1, 1.0});
  }
  int next_id = 0;
  for (int r = 0; r < p.G_ineq.rows(); ++r) {
    cons.push_back({p.G_ineq.row(r).transpose(), p.h_ineq[r], ConstraintKind::row, r, next_id++, 1.0});
  }
  if (has_bounds) {
    for (Eigen::Index s = 0; s < d; ++s) {
      if (std::isfinite(p.ub[s])) {
        VectorXd e = VectorXd::Zero(d);
        e[s] = 1.0;
        cons.push_back({std::move(e), p.ub[s], ConstraintKind::upper, static_cast<int>(s),
                        next_id++, 1.0});
      }
    }
    for (Eigen::Index s = 0; s < d; ++s) {
      if (std::isfinite(p.lb[s])) {
        VectorXd e = VectorXd::Zero(d);
        e[s] = -1.0;
        cons.push_back({std::move(e), -p.lb[s], ConstraintKind::lower, static_cast<int>(s),
                        next_id++, 1.0});
      }
    }
  }
  const int total = static_cast<int>(cons.size());
  const int pivot_cap = 10 * (static_cast<int>(d) + (total - n_eq));

  std::vector<int> act;        // indices into cons
  std::vector<double> lam;     // multipliers of active constraints
  std::vector<char> is_active(cons.size(), 0);
  MatrixXd Y(d, 0);   // H^{-1} N^T columns
  MatrixXd LS(0, 0);  // lower Cholesky factor of S = N H^{-1} N^T
  int pivots = 0;

  auto schur_solve = [&](const VectorXd& rhs) -> VectorXd {
    const Eigen::Index k = rhs.size();
    VectorXd wv = LS.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(rhs);
    return LS.topLeftCorner(k, k).transpose().triangularView<Eigen::Upper>().solve(wv);
  };
  auto normals_dot = [&](const VectorXd& y) -> VectorXd {
    VectorXd out(static_cast<Eigen::Index>(act.size()));
    for (std::size_t i = 0; i < act.size(); ++i) {
      out[static_cast<Eigen::Index>(i)] = cons[act[i]].normal.dot(y);
    }
    return out;
  };
  auto refactor = [&]() {
    const int k = static_cast<int>(act.size());
    MatrixXd S(k, k);
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j <= i; ++j) {
        S(i, j) = cons[act[i]].normal.dot(Y.col(j));
      }
    }
    Eigen::LLT<MatrixXd> sllt(S.selfadjointView<Eigen::Lower>());
    LS = sllt.matrixL();
    return sllt.info() == Eigen::Success;
  };
  auto grow = [&](int ci, const VectorXd& y_p, double sigma, double lam_p) {
    const int k = static_cast<int>(act.size());
    const VectorXd s = normals_dot(y_p);
    LS.conservativeResize(k + 1, k + 1);
    LS.col(k).head(k).setZero();
    if (k > 0) {
      const VectorXd wv = LS.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(s);
      LS.row(k).head(k) = wv.transpose();
      LS(k, k) = std::sqrt(std::max(sigma - wv.squaredNorm(), 1e-300));
    } else {
      LS(0, 0) = std::sqrt(std::max(sigma, 1e-300));
    }
    Y.conservativeResize(Eigen::NoChange, k + 1);
    Y.col(k) = y_p;
    act.push_back(ci);
    lam.push_back(lam_p);
    is_active[ci] = 1;
  };
  auto drop = [&](int pos) {
    is_active[act[pos]] = 0;
    act.erase(act.begin() + pos);
    lam.erase(lam.begin() + pos);
    const int k = static_cast<int>(act.size());
    for (int j = pos; j < k; ++j) {
      Y.col(j) = Y.col(j + 1);
    }
    Y.conservativeResize(Eigen::NoChange, k);
    return refactor();
  };

  // Engage constraint ci: raise its multiplier, dropping dual-blocking
  // constraints, until it becomes tight or infeasibility is proven. Returns
  // false when the solve must stop (status already set).
  auto engage = [&](int ci) -> bool {
    const LinearConstraint& con = cons[ci];
    double v = con.normal.dot(sol.z) - con.rhs;
    const VectorXd y_p = llt.solve(con.normal);
    const double sigma = con.normal.dot(y_p);
    const double q_zero = 1e-12 * sigma;  // dependence is relative to the normal's own curvature
    double lam_p = 0.0;
    while (true) {
      if (++pivots > pivot_cap) {
        sol.status = QpStatus::max_iter;
        return false;
      }
      VectorXd r, dtilde;
      double q;
      if (!act.empty()) {
        const VectorXd s = normals_dot(y_p);
        r = schur_solve(s);
        dtilde = y_p - Y * r;
        q = sigma - s.dot(r);
      } else {
        r.resize(0);
        dtilde = y_p;
        q = sigma;
      }
      if (q <= q_zero && std::abs(v) <= kFeasTol * std::max(1.0, std::abs(con.rhs))) {
        return true;  // linearly dependent and already satisfied
      }
      double t1 = inf();
      int blocker = -1;
      for (std::size_t i = 0; i < act.size(); ++i) {
        const LinearConstraint& ai = cons[act[i]];
        if (ai.kind == ConstraintKind::equality) {
          continue;
        }
        const double ri = r[static_cast<Eigen::Index>(i)];
        if (ri > 1e-12) {
          const double cand = lam[i] / ri;
          const double tie = 1e-14 * std::max(1.0, std::abs(cand));
          if (blocker < 0 || cand < t1 - tie ||
              (cand <= t1 + tie &&
               ai.id < cons[act[static_cast<std::size_t>(blocker)]].id)) {
            t1 = cand;
            blocker = static_cast<int>(i);
          }
        }
      }
      const double t2 = (q > q_zero) ? v / q : inf();
      const double t = std::max(std::min(t1, t2), 0.0);
      if (!std::isfinite(t)) {
        sol.status = QpStatus::infeasible;
        return false;
      }
      if (t > 0.0) {
        sol.z -= t * dtilde;
        for (std::size_t i = 0; i < act.size(); ++i) {
          lam[i] -= t * r[static_cast<Eigen::Index>(i)];
        }
        lam_p += t;
        v -= t * q;
      }
      if (t2 <= t1) {
        grow(ci, y_p, sigma, lam_p);
        return true;
      }
      if (!drop(blocker)) {
        sol.status = QpStatus::max_iter;
        return false;
      }
    }
  };

  auto finalize = [&]() {
    for (std::size_t i = 0; i < act.size(); ++i) {
      const LinearConstraint& con = cons[act[i]];
      const double value = lam[i];
      switch (con.kind) {
        case ConstraintKind::equality:
          sol.multipliers.eq[con.source] = con.sign * value;
          break;
        case ConstraintKind::row:
          sol.multipliers.ineq[con.source] = value;
          break;
        case ConstraintKind::upper:
          sol.multipliers.upper[con.source] = value;
          break;
        case ConstraintKind::lower:
          sol.multipliers.lower[con.source] = value;
          break;
      }
      if (con.kind != ConstraintKind::equality) {
        sol.active_set.push_back(con.id);
      }
    }
    std::sort(sol.active_set.begin(), sol.active_set.end());
    sol.pivots = pivots;
    unscale_and_check(sol);
  };

  // Equalities enter the working set first and are never dropped; their
  // engagement sign is flipped so the violation is nonnegative.
  for (int e = 0; e < n_eq; ++e) {
    LinearConstraint& con = cons[static_cast<std::size_t>(e)];
    if (con.normal.dot(sol.z) - con.rhs < 0.0) {
      con.normal = -con.normal;
      con.rhs = -con.rhs;
      con.sign = -1.0;
    }
    if (!engage(e)) {
      finalize();
      return sol;
    }
  }

  // Main loop: repeatedly engage the most violated inequality (smallest
  // index on ties).
  while (true) {
    int worst = -1;
    double worst_v = kFeasTol;
    for (int ci = n_eq; ci < total; ++ci) {
      if (is_active[static_cast<std::size_t>(ci)]) {
        continue;
      }
      const LinearConstraint& con = cons[static_cast<std::size_t>(ci)];
      const double v = (con.normal.dot(sol.z) - con.rhs) / std::max(1.0, std::abs(con.rhs));
      if (v > worst_v) {
        worst_v = v;
        worst = ci;
      }
    }
    if (worst < 0) {
      sol.status = QpStatus::optimal;
      break;
    }
    if (!engage(worst)) {
      break;
    }
  }
  finalize();
  return sol;
}

double kkt_residual(const QpProblem& p, const VectorXd& z, const QpMultipliers& m) {
  double res = 0.0;

  VectorXd st = p.H * z + p.g;
  double scale = std::max(1.0, std::max((p.H * z).cwiseAbs().maxCoeff(),
                                        p.g.size() ? p.g.cwiseAbs().maxCoeff() : 0.0));
  if (m.ineq.size() > 0 && p.G_ineq.rows() > 0) {
    const VectorXd term = p.G_ineq.transpose() * m.ineq;
    st += term;
    scale = std::max(scale, term.cwiseAbs().maxCoeff());
  }
  if (m.eq.size() > 0 && p.G_eq.rows() > 0) {
    const VectorXd term = p.G_eq.transpose() * m.eq;
    st += term;
    scale = std::max(scale, term.cwiseAbs().maxCoeff());
  }
  if (m.upper.size() == z.size()) {
    st += m.upper;
    scale = std::max(scale, m.upper.cwiseAbs().maxCoeff());
  }
  if (m.lower.size() == z.size()) {
    st -= m.lower;
    scale = std::max(scale, m.lower.cwiseAbs().maxCoeff());
  }
  res = std::max(res, st.cwiseAbs().maxCoeff() / scale);

  auto comp_term = [](double lambda, double slack) {
    return std::abs(lambda * slack) / std::max(1.0, std::abs(lambda));
  };

  for (Eigen::Index r = 0; r < p.G_ineq.rows(); ++r) {
    const double slack = p.h_ineq[r] - p.G_ineq.row(r).dot(z);
    const double rscale = std::max(1.0, std::abs(p.h_ineq[r]));
    res = std::max(res, std::max(-slack, 0.0) / rscale);
    if (m.ineq.size() > r) {
      res = std::max(res, std::max(-m.ineq[r], 0.0));
      res = std::max(res, comp_term(m.ineq[r], slack) / rscale);
    }
  }
  for (Eigen::Index r = 0; r < p.G_eq.rows(); ++r) {
    const double viol = std::abs(p.G_eq.row(r).dot(z) - p.h_eq[r]);
    res = std::max(res, viol / std::max(1.0, std::abs(p.h_eq[r])));
  }
  if (p.lb.size() == z.size()) {
    for (Eigen::Index s = 0; s < z.size(); ++s) {
      if (std::isfinite(p.lb[s])) {
        const double slack = z[s] - p.lb[s];
        const double bscale = std::max(1.0, std::abs(p.lb[s]));
        res = std::max(res, std::max(-slack, 0.0) / bscale);
        if (m.lower.size() == z.size()) {
          res = std::max(res, std::max(-m.lower[s], 0.0));
          res = std::max(res, comp_term(m.lower[s], slack) / bscale);
        }
      }
      if (std::isfinite(p.ub[s])) {
        const double slack = p.ub[s] - z[s];
        const double bscale = std::max(1.0, std::abs(p.ub[s]));
        res = std::max(res, std::max(-slack, 0.0) / bscale);
        if (m.upper.size() == z.size()) {
          res = std::max(res, std::max(-m.upper[s], 0.0));
          res = std::max(res, comp_term(m.upper[s], slack) / bscale);
        }
      }
    }
  }
  return res;
}

}  // namespace iscd
