#pragma once

#include <stdexcept>
#include <string>

namespace iscd {

/// A removable-singularity gain was requested at a point where no finite
/// limit exists (zero control outside the open saturation band).
struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A coefficient map returned wrong dimensions or non-finite entries, or a
/// pseudo-linear step produced a non-finite state.
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A predicted or integrated trajectory left the finite domain. `stage`
/// carries the failing prediction stage, or -1 for continuous-time failures.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what, int failing_stage = -1)
      : std::runtime_error(what), stage(failing_stage) {}
  int stage;
};

/// The adaptive integrator could not meet the tolerance above the minimum
/// step size.
struct StiffnessError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace iscd
