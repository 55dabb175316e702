#include "pqkd/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pqkd {

void ActuatorConfig::validate() const {
  if (!(v_2pi_x1 > 0) || !(v_2pi_x2 > 0)) {
    throw std::invalid_argument("2pi-voltages must be positive");
  }
  if (!(v_min < v_max)) {
    throw std::invalid_argument("v_min must be below v_max");
  }
  if (v_max - v_min < std::max(v_2pi_x1, v_2pi_x2)) {
    throw std::invalid_argument("driver range narrower than a 2pi-voltage cannot always be wrapped");
  }
  if (verify_samples < 1) {
    throw std::invalid_argument("verify_samples must be at least 1");
  }
  if (gain_x1 < 0 || gain_x2 < 0 || probe_step_v < 0 || slope_noise_floor < 0) {
    throw std::invalid_argument("gains and probe step must be nonnegative");
  }
}

void Thresholds::validate() const {
  if (!(t1 > t3)) {
    throw std::invalid_argument("thresholds require t1 > t3");
  }
  if (!(t2 > 0)) {
    throw std::invalid_argument("thresholds require t2 > 0");
  }
}

std::string_view to_string(ControlPhase p) {
  switch (p) {
    case ControlPhase::Idle:
      return "idle";
    case ControlPhase::AdjustingX2:
      return "adjusting_x2";
    case ControlPhase::AdjustingX1:
      return "adjusting_x1";
    case ControlPhase::Converged:
      return "converged";
  }
  return "unknown";
}

ControllerState ControllerState::initial(const ActuatorConfig& cfg, const Thresholds& th) {
  ControllerState st;
  st.v_x1 = wrap_voltage(cfg.initial_v_x1, Actuator::X1, cfg);
  st.v_x2 = wrap_voltage(cfg.initial_v_x2, Actuator::X2, cfg);
  st.thresholds = th;
  return st;
}

PoincareRotation voltage_to_rotation(double v, Actuator which, const ActuatorConfig& cfg) {
  const double angle = 2.0 * std::numbers::pi * v / cfg.v_2pi(which);
  return PoincareRotation(which == Actuator::X1 ? kAxisQR : kAxisHV, angle);
}

PoincareRotation actuator_rotation(const ControllerState& st, const ActuatorConfig& cfg) {
  return compose(voltage_to_rotation(st.v_x2, Actuator::X2, cfg), voltage_to_rotation(st.v_x1, Actuator::X1, cfg));
}

double wrap_voltage(double v, Actuator which, const ActuatorConfig& cfg) {
  const double period = cfg.v_2pi(which);
  if (v > cfg.v_max) {
    v -= std::ceil((v - cfg.v_max) / period) * period;
  } else if (v < cfg.v_min) {
    v += std::ceil((cfg.v_min - v) / period) * period;
  }
  if (v < cfg.v_min || v > cfg.v_max) {
    throw UnwrappableVoltageError();
  }
  return v;
}

bool within_thresholds(const EstimatedSOP& e, const Thresholds& th) {
  return e.s1_hat > th.t1 && std::abs(e.s2_hat) < th.t2;
}

ControllerState step_x2(ControllerState st, double s2_hat, const ActuatorConfig& cfg) {
  st.phase = ControlPhase::AdjustingX2;
  if (std::abs(s2_hat) < st.thresholds.t2) {
    st.last_s2 = s2_hat;
    st.last_dv_x2 = 0.0;
    return st;
  }
  // The previous X2 move doubles as a probe of the local slope. X1 rotates
  // about the QR axis and cannot change S2, so the whole difference is ours.
  if (!std::isnan(st.last_s2) && st.last_dv_x2 != 0.0) {
    const double ds2 = s2_hat - st.last_s2;
    if (std::abs(ds2) > cfg.slope_noise_floor) {
      st.sign_x2 = (ds2 / st.last_dv_x2) > 0 ? +1 : -1;
    }
  }
  const double dv = cfg.gain_x2 * (0.0 - s2_hat) * st.sign_x2;
  st.v_x2 = wrap_voltage(st.v_x2 + dv, Actuator::X2, cfg);
  st.last_s2 = s2_hat;
  st.last_dv_x2 = dv;
  return st;
}

ControllerState step_x1(ControllerState st, double s1_hat, const ActuatorConfig& cfg) {
  st.phase = ControlPhase::AdjustingX1;
  if (s1_hat > st.thresholds.t1) {
    st.last_s1 = s1_hat;
    return st;
  }
  if (!std::isnan(st.last_s1) && s1_hat < st.thresholds.t3 && s1_hat < st.last_s1) {
    st.dir_x1 = -st.dir_x1;
  }
  st.v_x1 = wrap_voltage(st.v_x1 + st.dir_x1 * cfg.gain_x1 * (1.0 - s1_hat), Actuator::X1, cfg);
  st.last_s1 = s1_hat;
  return st;
}

CycleResult run_feedback_cycle(const Plant& plant, ControllerState st, int max_iters, const ActuatorConfig& cfg) {
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  CycleResult result;
  st.last_s1 = kNaN;
  st.last_s2 = kNaN;
  st.last_dv_x2 = 0.0;

  bool probed = false;
  double probe_reference = kNaN;  // S2 before the probe while its outcome is pending
  bool next_is_x2 = true;
  int in_threshold = 0;
  while (result.iterations < max_iters) {
    ControlStep step{st.v_x1, st.v_x2, kNaN, kNaN, st.dir_x1, true};
    ++result.iterations;
    EstimatedSOP e;
    try {
      e = plant(st);
    } catch (const ZeroWindowError&) {
      step.valid = false;
      result.trace.push_back(step);
      in_threshold = 0;
      continue;
    }
    step.s1_hat = e.s1_hat;
    step.s2_hat = e.s2_hat;
    result.trace.push_back(step);

    if (within_thresholds(e, st.thresholds)) {
      if (++in_threshold >= std::max(cfg.verify_samples, 1)) {
        st.phase = ControlPhase::Converged;
        result.converged = true;
        break;
      }
      continue;
    }
    in_threshold = 0;
    if (!probed) {
      probed = true;
      probe_reference = e.s2_hat;
      st.v_x2 = wrap_voltage(st.v_x2 + cfg.probe_step_v, Actuator::X2, cfg);
      st.phase = ControlPhase::AdjustingX2;
      continue;
    }
    if (!std::isnan(probe_reference)) {
      if (e.s2_hat != probe_reference && cfg.probe_step_v != 0.0) {
        st.sign_x2 = (e.s2_hat - probe_reference) / cfg.probe_step_v > 0 ? +1 : -1;
      }
      probe_reference = kNaN;
    }
    if (next_is_x2) {
      st = step_x2(st, e.s2_hat, cfg);
    } else {
      st = step_x1(st, e.s1_hat, cfg);
    }
    next_is_x2 = !next_is_x2;
  }
  if (!result.converged && st.phase == ControlPhase::Converged) {
    st.phase = ControlPhase::AdjustingX1;
  }
  result.state = st;
  return result;
}

}  // namespace pqkd
