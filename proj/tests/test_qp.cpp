#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <vector>

#include "iscd/qp.hpp"
#include "oracles.hpp"

using namespace iscd;

namespace {

HorizonWeights scalar_weights(double q, double q_term, double r) {
  HorizonWeights w;
  w.Q = MatrixXd::Constant(1, 1, q);
  w.Q_terminal = MatrixXd::Constant(1, 1, q_term);
  w.R = MatrixXd::Constant(1, 1, r);
  return w;
}

QpProblem unconstrained(const MatrixXd& H, const VectorXd& g) {
  QpProblem p;
  p.H = H;
  p.g = g;
  return p;
}

}  // namespace

TEST_CASE("condense: two-stage scalar chain by hand") {
  const std::vector<MatrixXd> A{MatrixXd::Identity(1, 1)};
  const std::vector<MatrixXd> B{MatrixXd::Identity(1, 1)};
  const VectorXd xi1 = VectorXd::Constant(1, 1.0);
  const QpProblem p = condense(A, B, xi1, scalar_weights(1, 1, 1), ConstraintSet{});

  // 1/2 (xi1 + mu)^2 + 1/2 xi1^2 + 1/2 mu^2 = mu^2 + mu + 1
  CHECK(p.H(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p.g[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.offset == doctest::Approx(1.0).epsilon(1e-15));
  const QpSolution sol = solve_qp(p);
  CHECK(sol.status == QpStatus::optimal);
  CHECK(sol.z[0] == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("condense: control-only cost gives block-diagonal R and zero minimizer") {
  std::mt19937 rng(3);
  const int n = 2, m = 2, lm1 = 4;
  std::vector<MatrixXd> A, B;
  for (int j = 0; j < lm1; ++j) {
    A.push_back(oracles::random_matrix(n, n, rng));
    B.push_back(oracles::random_matrix(n, m, rng));
  }
  HorizonWeights w;
  w.Q = MatrixXd::Zero(n, n);
  w.Q_terminal = MatrixXd::Zero(n, n);
  MatrixXd R(2, 2);
  R << 3.0, 0.5, 0.5, 2.0;
  w.R = R;
  const QpProblem p =
      condense(A, B, oracles::random_vector(n, rng), w, ConstraintSet{});

  MatrixXd expected = MatrixXd::Zero(m * lm1, m * lm1);
  for (int j = 0; j < lm1; ++j) {
    expected.block(j * m, j * m, m, m) = R;
  }
  CHECK((p.H - expected).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(p.g.cwiseAbs().maxCoeff() == 0.0);
  const QpSolution sol = solve_qp(p);
  CHECK(sol.z.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("condense: three-stage chain matches the Riccati recursion") {
  const std::vector<MatrixXd> A{MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1)};
  const std::vector<MatrixXd> B{MatrixXd::Identity(1, 1), MatrixXd::Identity(1, 1)};
  const VectorXd xi1 = VectorXd::Constant(1, 1.0);
  const HorizonWeights w = scalar_weights(1, 1, 1);

  const QpSolution sol = solve_qp(condense(A, B, xi1, w, ConstraintSet{}));
  const VectorXd ref = oracles::riccati_lqr_sequence(A, B, w.Q, w.Q_terminal, w.R, xi1);
  CHECK((sol.z - ref).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("solve_qp: analytic unconstrained minimizer") {
  const QpProblem p =
      unconstrained(MatrixXd::Constant(1, 1, 2.0), VectorXd::Constant(1, 1.0));
  const QpSolution sol = solve_qp(p);
  CHECK(sol.status == QpStatus::optimal);
  CHECK(sol.z[0] == doctest::Approx(-0.5).epsilon(1e-14));
  CHECK(sol.kkt_residual <= 1e-12);
}

TEST_CASE("solve_qp: active lower bound") {
  QpProblem p = unconstrained(MatrixXd::Constant(1, 1, 2.0), VectorXd::Constant(1, 1.0));
  p.lb = VectorXd::Zero(1);
  p.ub = VectorXd::Constant(1, std::numeric_limits<double>::infinity());
  const QpSolution sol = solve_qp(p);
  CHECK(sol.status == QpStatus::optimal);
  CHECK(sol.z[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(sol.active_set == std::vector<int>{0});
  CHECK(sol.multipliers.lower[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("solve_qp: contradictory equalities are infeasible") {
  QpProblem p = unconstrained(MatrixXd::Identity(1, 1), VectorXd::Zero(1));
  p.G_eq = MatrixXd::Ones(2, 1);
  p.h_eq = VectorXd(2);
  p.h_eq << 1.0, 2.0;
  CHECK(solve_qp(p).status == QpStatus::infeasible);
}

TEST_CASE("solve_qp: conflicting row and bound are infeasible") {
  QpProblem p = unconstrained(MatrixXd::Identity(1, 1), VectorXd::Zero(1));
  p.G_ineq = MatrixXd::Ones(1, 1);
  p.h_ineq = VectorXd::Constant(1, -1.0);  // z <= -1
  p.lb = VectorXd::Zero(1);                // z >= 0
  p.ub = VectorXd::Constant(1, std::numeric_limits<double>::infinity());
  CHECK(solve_qp(p).status == QpStatus::infeasible);
}

TEST_CASE("kkt_residual: zero at the optimum, |H delta| after a perturbation") {
  MatrixXd H(2, 2);
  H << 0.8, 0.1, 0.1, 0.6;
  VectorXd g(2);
  g << 0.3, -0.2;
  const QpProblem p = unconstrained(H, g);
  const QpSolution sol = solve_qp(p);
  CHECK(kkt_residual(p, sol.z, sol.multipliers) <= 1e-12);

  VectorXd delta(2);
  delta << 1e-3, -2e-3;
  const double expected = (H * delta).cwiseAbs().maxCoeff();
  CHECK(kkt_residual(p, sol.z + delta, sol.multipliers) ==
        doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("kkt_residual: positive at a feasible non-optimal point") {
  QpProblem p = unconstrained(MatrixXd::Identity(2, 2), VectorXd::Ones(2));
  p.lb = VectorXd::Constant(2, -10.0);
  p.ub = VectorXd::Constant(2, 10.0);
  QpMultipliers none;
  none.lower = VectorXd::Zero(2);
  none.upper = VectorXd::Zero(2);
  CHECK(kkt_residual(p, VectorXd::Zero(2), none) > 0.1);
}

TEST_CASE("property: unconstrained solve matches the direct linear solve") {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> dim(1, 20);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = dim(rng);
    const MatrixXd H = oracles::random_spd(d, rng);
    const VectorXd g = oracles::random_vector(d, rng);
    const QpSolution sol = solve_qp(unconstrained(H, g));
    REQUIRE(sol.status == QpStatus::optimal);
    const VectorXd ref = H.llt().solve(-g);
    CHECK((sol.z - ref).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("property: box-constrained solve matches brute-force enumeration") {
  std::mt19937 rng(23);
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_real_distribution<double> width(0.1, 1.5);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = dim(rng);
    const MatrixXd H = oracles::random_spd(d, rng);
    const VectorXd g = oracles::random_vector(d, rng, 2.0);
    VectorXd lb(d), ub(d);
    for (int i = 0; i < d; ++i) {
      const double c = oracles::random_vector(1, rng)[0] * 0.3;
      lb[i] = c - width(rng);
      ub[i] = c + width(rng);
    }
    QpProblem p = unconstrained(H, g);
    p.lb = lb;
    p.ub = ub;
    const QpSolution sol = solve_qp(p);
    REQUIRE(sol.status == QpStatus::optimal);
    const auto ref = oracles::brute_force_box_qp(H, g, lb, ub);
    REQUIRE(ref.has_value());
    CHECK((sol.z - *ref).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("property: condensed minimizer equals the sparse KKT formulation") {
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> ndist(1, 3), mdist(1, 3), ldist(2, 6);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = ndist(rng), m = mdist(rng), l = ldist(rng);
    std::vector<MatrixXd> A, B;
    for (int j = 0; j + 1 < l; ++j) {
      A.push_back(oracles::random_matrix(n, n, rng, 0.7));
      B.push_back(oracles::random_matrix(n, m, rng));
    }
    HorizonWeights w;
    w.Q = oracles::random_spd(n, rng, 0.1);
    w.Q_terminal = oracles::random_spd(n, rng, 0.1);
    w.R = oracles::random_spd(m, rng, 0.5);
    const VectorXd xi1 = oracles::random_vector(n, rng);

    const QpSolution sol = solve_qp(condense(A, B, xi1, w, ConstraintSet{}));
    REQUIRE(sol.status == QpStatus::optimal);
    const VectorXd ref = oracles::sparse_kkt_controls(A, B, w.Q, w.Q_terminal, w.R, xi1);
    CHECK((sol.z - ref).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("property: constant-A condensing agrees with the varying-A recursion") {
  // the same instance condensed twice: once as written (constant A takes the
  // telescoped path) and once with the last A entry negated twice through a
  // copy that defeats the constant detection via a state-bound constraint
  std::mt19937 rng(57);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial % 3;
    const int m = 1 + (trial / 2) % 2;
    const int lm1 = 2 + trial % 5;
    const MatrixXd A = oracles::random_matrix(n, n, rng, 0.6);
    std::vector<MatrixXd> As(lm1, A), Bs;
    for (int j = 0; j < lm1; ++j) {
      Bs.push_back(oracles::random_matrix(n, m, rng));
    }
    HorizonWeights w;
    w.Q = oracles::random_spd(n, rng, 0.2);
    w.Q_terminal = oracles::random_spd(n, rng, 0.2);
    w.R = oracles::random_spd(m, rng, 0.5);
    const VectorXd xi1 = oracles::random_vector(n, rng);

    const QpProblem fast = condense(As, Bs, xi1, w, ConstraintSet{});

    // loose box bounds force the generic path without changing the problem
    ConstraintSet c;
    const Eigen::Index vdim = (lm1 + 1) * (n + m) - m;
    c.lb = VectorXd::Constant(vdim, -1e30);
    c.ub = VectorXd::Constant(vdim, 1e30);
    const QpProblem generic = condense(As, Bs, xi1, w, c);

    const double scale = std::max(1.0, generic.H.cwiseAbs().maxCoeff());
    CHECK((fast.H - generic.H).cwiseAbs().maxCoeff() <= 1e-11 * scale);
    CHECK((fast.g - generic.g).cwiseAbs().maxCoeff() <=
          1e-11 * std::max(1.0, generic.g.cwiseAbs().maxCoeff()));
    CHECK(fast.offset == doctest::Approx(generic.offset).epsilon(1e-11));

    // control bounds must survive the telescoped path
    ConstraintSet cb;
    cb.lb = VectorXd::Constant(vdim, -std::numeric_limits<double>::infinity());
    cb.ub = VectorXd::Constant(vdim, std::numeric_limits<double>::infinity());
    const Eigen::Index ln = static_cast<Eigen::Index>(lm1 + 1) * n;
    for (Eigen::Index s = ln; s < vdim; ++s) {
      cb.lb[s] = -2.0;
      cb.ub[s] = 3.0;
    }
    const QpProblem bounded = condense(As, Bs, xi1, w, cb);
    REQUIRE(bounded.lb.size() == lm1 * m);
    CHECK(bounded.lb.minCoeff() == -2.0);
    CHECK(bounded.ub.maxCoeff() == 3.0);
    CHECK((bounded.H - fast.H).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("property: the offset does not move the minimizer") {
  std::mt19937 rng(41);
  const MatrixXd H = oracles::random_spd(4, rng);
  const VectorXd g = oracles::random_vector(4, rng);
  QpProblem p = unconstrained(H, g);
  const VectorXd base = solve_qp(p).z;
  p.offset = 123.456;
  CHECK((solve_qp(p).z - base).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.objective(base) == doctest::Approx(0.5 * base.dot(H * base) + g.dot(base) +
                                             123.456));
}

TEST_CASE("weights validation rejects indefinite and asymmetric inputs") {
  HorizonWeights w = scalar_weights(1, 1, 1);
  CHECK_NOTHROW(w.validate(1, 1));
  w.R = MatrixXd::Constant(1, 1, 0.0);
  CHECK_THROWS_AS(w.validate(1, 1), std::invalid_argument);
  w = scalar_weights(-1, 1, 1);
  CHECK_THROWS_AS(w.validate(1, 1), std::invalid_argument);

  HorizonWeights w2;
  w2.Q = MatrixXd::Zero(2, 2);
  w2.Q(0, 1) = 1.0;  // asymmetric
  w2.Q_terminal = MatrixXd::Zero(2, 2);
  w2.R = MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(w2.validate(2, 1), std::invalid_argument);
}
