/**
 * @file controller.hpp
 * @brief Threshold-driven two-actuator SOP stabilization.
 *
 * Bob's polarization controller has two fiber squeezers in series:
 * X2 (stress along 0 deg) rotates the SOP about the HV axis and X1 (stress
 * along 45 deg) then rotates it about the QR axis. Because X1 comes last it
 * leaves S2 untouched, so the loop can null S2 with X2 and then climb S1 with
 * X1.
 *
 * One control cycle:
 *   1. sample; stop once verify_samples consecutive samples have s1 > T1 and
 *      |s2| < T2.
 *   2. probe X2 by +probe_step_v to learn the local sign of dS2/dV.
 *   3. alternate X2 and X1 steps, one fresh sample each, until converged or
 *      max_iters samples have been taken.
 *
 * X2 moves proportionally to -s2. X1 moves proportionally to (1 - s1) in the
 * current search direction; the direction reverses when a step drops S1 below
 * T3. Voltages are folded back into the driver range by whole 2pi-voltages.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string_view>
#include <vector>

#include "pqkd/stokes.hpp"

namespace pqkd {

enum class Actuator : std::uint8_t { X1, X2 };

struct ActuatorConfig {
  double v_2pi_x1 = 52.2;
  double v_2pi_x2 = 49.0;
  double v_min = 0.0;
  double v_max = 150.0;
  // V per unit error. X2 goes unstable once gain_x2 * 2pi / v_2pi_x2 nears 2.
  double gain_x1 = 3.0;
  double gain_x2 = 8.0;
  double probe_step_v = 1.0;
  /// Observed |dS2| above which an X2 step re-estimates the slope sign.
  double slope_noise_floor = 0.05;
  /// Consecutive in-threshold samples required to declare convergence.
  int verify_samples = 2;
  double initial_v_x1 = 75.0;
  double initial_v_x2 = 75.0;

  [[nodiscard]] double v_2pi(Actuator a) const { return a == Actuator::X1 ? v_2pi_x1 : v_2pi_x2; }
  void validate() const;
};

struct Thresholds {
  double t1 = 0.96;
  double t2 = 0.05;
  double t3 = 0.94;

  /// Throws std::invalid_argument unless t1 > t3 and t2 > 0.
  void validate() const;
};

enum class ControlPhase : std::uint8_t { Idle, AdjustingX2, AdjustingX1, Converged };

std::string_view to_string(ControlPhase p);

struct ControllerState {
  double v_x1 = 75.0;
  double v_x2 = 75.0;
  int dir_x1 = +1;
  int sign_x2 = +1;
  Thresholds thresholds;
  ControlPhase phase = ControlPhase::Idle;

  // Memory of the previous step on each actuator.
  double last_s1 = std::numeric_limits<double>::quiet_NaN();
  double last_s2 = std::numeric_limits<double>::quiet_NaN();
  double last_dv_x2 = 0.0;

  static ControllerState initial(const ActuatorConfig& cfg, const Thresholds& th);
};

/// Rotation by 2*pi*v/v_2pi about the QR axis (X1) or HV axis (X2).
PoincareRotation voltage_to_rotation(double v, Actuator which, const ActuatorConfig& cfg);

/// Net EPC rotation: X2 first, then X1.
PoincareRotation actuator_rotation(const ControllerState& st, const ActuatorConfig& cfg);

class UnwrappableVoltageError : public std::runtime_error {
 public:
  UnwrappableVoltageError() : std::runtime_error("no 2pi-voltage shift brings the voltage into the driver range") {}
};

/// Shifts v by whole multiples of v_2pi into [v_min, v_max].
double wrap_voltage(double v, Actuator which, const ActuatorConfig& cfg);

ControllerState step_x2(ControllerState st, double s2_hat, const ActuatorConfig& cfg);
ControllerState step_x1(ControllerState st, double s1_hat, const ActuatorConfig& cfg);

[[nodiscard]] bool within_thresholds(const EstimatedSOP& e, const Thresholds& th);

/// One logged sample of a control cycle. Voltages are those applied while sampling.
struct ControlStep {
  double v_x1 = 0.0;
  double v_x2 = 0.0;
  double s1_hat = 0.0;
  double s2_hat = 0.0;
  int dir_x1 = +1;
  bool valid = true;  // false when the window had no usable clicks
};

/// Takes one measurement window with the given actuator voltages applied.
/// May throw ZeroWindowError; the sample is then skipped.
using Plant = std::function<EstimatedSOP(const ControllerState&)>;

struct CycleResult {
  ControllerState state;
  int iterations = 0;
  bool converged = false;
  std::vector<ControlStep> trace;
};

CycleResult run_feedback_cycle(const Plant& plant, ControllerState st, int max_iters, const ActuatorConfig& cfg);

}  // namespace pqkd
