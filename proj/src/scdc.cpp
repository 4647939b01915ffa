#include "iscd/scdc.hpp"

#include <cmath>
#include <utility>

namespace iscd {

namespace {
// Controls this close to zero take the limit value of the gain instead of
// dividing.
constexpr double kZeroGuard = 1e-9;
}  // namespace

double saturate(double u, const SaturationSpec& spec) {
  return std::min(std::max(u, spec.lo), spec.hi);
}

VectorXd saturate(const VectorXd& u, std::span<const SaturationSpec> specs) {
  VectorXd out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    out[i] = saturate(u[i], specs[static_cast<std::size_t>(i)]);
  }
  return out;
}

double sinc(double x) {
  if (std::abs(x) < 1e-4) {
    const double x2 = x * x;
    return 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0);
  }
  return std::sin(x) / x;
}

double saturation_gain(double u, const SaturationSpec& spec, int power) {
  if (power != 1 && power != 2) {
    throw std::invalid_argument("saturation_gain: power must be 1 or 2");
  }
  if (std::abs(u) < kZeroGuard) {
    if (spec.lo < 0.0 && 0.0 < spec.hi) {
      return power == 1 ? 1.0 : 0.0;
    }
    throw SingularityError("saturation_gain: no finite limit at u = 0 with levels [" +
                           std::to_string(spec.lo) + ", " + std::to_string(spec.hi) + "]");
  }
  const double s = saturate(u, spec);
  return power == 1 ? s / u : s * s / u;
}

MatrixXd saturation_gain_matrix(const VectorXd& u, std::span<const SaturationSpec> specs) {
  const Eigen::Index m = u.size();
  const VectorXd s = saturate(u, specs);
  if ((s.array() == u.array()).all()) {
    return MatrixXd::Identity(m, m);
  }
  const double nn = u.squaredNorm();
  if (nn == 0.0) {
    throw SingularityError(
        "saturation_gain_matrix: sigma(0) != 0, the saturation cannot be factored");
  }
  return (s * u.transpose()) / nn;
}

ScdcModel ScdcModel::pointwise(int n, int m, std::string label, CoeffFn f) {
  ScdcModel model;
  model.n = n;
  model.m = m;
  model.label = std::move(label);
  model.coeff = [f = std::move(f)](std::span<const VectorXd> xs,
                                   std::span<const VectorXd> us, MatrixXd& A,
                                   MatrixXd& B) { f(xs.back(), us.back(), A, B); };
  return model;
}

void ScdcModel::eval(std::span<const VectorXd> xs, std::span<const VectorXd> us,
                     MatrixXd& A, MatrixXd& B) const {
  coeff(xs, us, A, B);
  if (A.rows() != n || A.cols() != n) {
    throw ModelError(label + ": A(x,u) has wrong dimensions");
  }
  if (B.rows() != n || B.cols() != m) {
    throw ModelError(label + ": B(x,u) has wrong dimensions");
  }
  if (!A.allFinite()) {
    throw ModelError(label + ": A(x,u) is not finite");
  }
  if (!B.allFinite()) {
    throw ModelError(label + ": B(x,u) is not finite");
  }
}

void ScdcModel::eval(const VectorXd& x, const VectorXd& u, MatrixXd& A, MatrixXd& B) const {
  eval(std::span<const VectorXd>(&x, 1), std::span<const VectorXd>(&u, 1), A, B);
}

VectorXd step_pseudolinear(const ScdcModel& model, const VectorXd& x, const VectorXd& u) {
  MatrixXd A, B;
  model.eval(x, u, A, B);
  VectorXd next = A * x + B * u;
  if (!next.allFinite()) {
    throw ModelError(model.label + ": pseudo-linear step is not finite");
  }
  return next;
}

}  // namespace iscd
