#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "iscd/bocf.hpp"
#include "iscd/controller.hpp"
#include "iscd/scdc.hpp"

namespace iscd {

/// Kapitza pendulum with slider-crank actuation: pendulum length l, wheel
/// radius r, arm length a, gravity g, wheel-speed saturation.
struct KapitzaParams {
  double l = 0.25;
  double r = 1.0;
  double a = 2.0;
  double g = 9.81;
  SaturationSpec sat{-3.0, 3.0};
};

/// Electromagnetically controlled oscillator: mass, spring stiffness,
/// damping, relaxed magnet gap, electromagnet force constant, position
/// setpoint, and the current limits.
struct EmagParams {
  double mass = 1.0;
  double stiffness = 5.0;
  double damping = 5.0;
  double gap = 3.0;
  double force_const = 1.0;
  double setpoint = 2.0;
  SaturationSpec current{-10.0, 10.0};

  /// Current holding the mass at the setpoint.
  double equilibrium_current() const;
};

/// One benchmark system: the continuous-time truth dynamics (saturation
/// applied inside), the discrete internal model used by the controller, the
/// published parameters and controller configuration.
struct Benchmark {
  std::string name;
  int nx = 0;  // truth state dimension
  int nu = 0;
  double T_s = 0.0;
  std::function<VectorXd(const VectorXd& x, const VectorXd& u)> truth;
  ScdcModel internal;
  MpcConfig config;
  VectorXd x0;
  VectorXd u0;
  int default_steps = 0;

  // Output-feedback benchmarks carry an input-output model; the controller
  // state is then reconstructed from the measured history instead of the
  // truth state.
  bool output_feedback = false;
  std::optional<IoCoefficients> io;
  MatrixXd measurement;  // y = measurement * x_truth

  // Transforms applied when recording trajectories, mapping internal
  // coordinates to the published physical quantities.
  std::function<VectorXd(const VectorXd&)> record_state;
  std::function<VectorXd(const VectorXd&)> record_control;
  std::function<VectorXd(const VectorXd&)> record_saturated;

  std::vector<std::pair<std::string, double>> params;
};

/// Inverted pendulum on a vibrating slider-crank base; full-state feedback,
/// wheel speed saturated to +-3 rad/s by default.
Benchmark kapitza(std::optional<SaturationSpec> levels = {});

/// Nonholonomic integrator with component-wise control saturation (+-1 by
/// default); full-state feedback.
Benchmark nonholonomic(std::optional<SaturationSpec> levels = {});

/// Electromagnetically controlled oscillator tracking a 2 m position
/// setpoint; the control is the current offset from its equilibrium value
/// and the levels are current limits (+-10 A by default).
Benchmark emag(std::optional<SaturationSpec> current_levels = {});

/// Sampled triple integrator with asymmetric saturation (u in [-1, 2] by
/// default); output feedback through the observable-canonical realization of
/// its exact discretization.
Benchmark triple_integrator(std::optional<SaturationSpec> levels = {});

/// Look up a benchmark by CLI name: kapitza, nonholonomic, emag,
/// triple_integrator. Throws std::invalid_argument for unknown names.
Benchmark benchmark_by_name(const std::string& name,
                            std::optional<SaturationSpec> levels = {});

}  // namespace iscd
