#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>

#include "iscd/errors.hpp"

namespace iscd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Saturation levels of one scalar control channel. Requires lo < hi.
struct SaturationSpec {
  double lo = -1.0;
  double hi = 1.0;
  bool valid() const { return lo < hi; }
};

/// Clamp u to [lo, hi]. Idempotent.
double saturate(double u, const SaturationSpec& spec);

/// Component-wise saturation, one spec per channel.
VectorXd saturate(const VectorXd& u, std::span<const SaturationSpec> specs);

/// sin(x)/x with the removable singularity filled in: sinc(0) = 1.
double sinc(double x);

/// Saturation folded into a control-dependent gain: sigma(u)^power / u for
/// power in {1, 2}. At u = 0 the gain takes its limit (1 for power 1, 0 for
/// power 2), which exists only when 0 lies strictly inside the saturation
/// band; otherwise SingularityError is thrown and the caller must shift
/// coordinates first.
double saturation_gain(double u, const SaturationSpec& spec, int power = 1);

/// Matrix gain M with M u = sigma(u) exactly: the identity where
/// sigma(u) = u component-wise, otherwise the rank-one matrix
/// sigma(u) u^T / |u|^2. Throws SingularityError when u = 0 but
/// sigma(0) != 0 (no factorization exists).
MatrixXd saturation_gain_matrix(const VectorXd& u, std::span<const SaturationSpec> specs);

/// Pointwise coefficient map (x, u) -> (A, B).
using CoeffFn =
    std::function<void(const VectorXd& x, const VectorXd& u, MatrixXd& A, MatrixXd& B)>;

/// Coefficient map over a whole prediction pass. xs/us hold the samples of
/// the pass so far, stage 0 first and the current sample last. Models whose
/// coefficients read a window of past outputs and controls use the tail of
/// the pass and fall back to their captured measured history before it.
using WindowCoeffFn =
    std::function<void(std::span<const VectorXd> xs, std::span<const VectorXd> us,
                       MatrixXd& A, MatrixXd& B)>;

/// A plant in pseudo-linear form. One discrete step is
///
///   x+ = A(x, u) x + B(x, u) u,
///
/// where the coefficient maps return the full one-step matrices (identity
/// and sample-time factors already folded in). Immutable after construction
/// and safe to share across threads.
struct ScdcModel {
  int n = 0;
  int m = 0;
  std::string label;
  WindowCoeffFn coeff;

  /// Wrap a pointwise (x, u) coefficient map.
  static ScdcModel pointwise(int n, int m, std::string label, CoeffFn f);

  /// Evaluate the coefficients at the end of a prediction pass, checking
  /// dimensions and finiteness.
  void eval(std::span<const VectorXd> xs, std::span<const VectorXd> us, MatrixXd& A,
            MatrixXd& B) const;

  /// Evaluate at a single sample with no predicted past.
  void eval(const VectorXd& x, const VectorXd& u, MatrixXd& A, MatrixXd& B) const;
};

/// One pseudo-linear step A(x,u) x + B(x,u) u. For a correctly factored
/// model this equals the plant map f(x, u).
VectorXd step_pseudolinear(const ScdcModel& model, const VectorXd& x, const VectorXd& u);

}  // namespace iscd
