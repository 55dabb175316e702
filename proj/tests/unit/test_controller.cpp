#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "pqkd/channel.hpp"
#include "pqkd/controller.hpp"

using namespace pqkd;
using std::numbers::pi;

namespace {

double t_at(double km) {
  FiberScenario sc;
  sc.length_km = km;
  return transmittance(sc);
}

Plant fifty_km_plant(const PoincareRotation& fiber, const ActuatorConfig& cfg) {
  return oracle::expected_plant(fiber, cfg, SourceConfig{0.5, 1e6}, t_at(50), DetectorConfig{});
}

/// Bob's state after the actuators, for a given incoming SOP.
StokesVector after_epc(const StokesVector& in, const ControllerState& st, const ActuatorConfig& cfg) {
  return rotate(in, actuator_rotation(st, cfg));
}

ControllerState at_voltages(double v_x1, double v_x2) {
  ControllerState st;
  st.v_x1 = v_x1;
  st.v_x2 = v_x2;
  return st;
}

}  // namespace

TEST(VoltageToRotation, TwoPiVoltageIsIdentity) {
  const ActuatorConfig cfg;
  for (const StokesVector& s : {kH, kQ, kAxisCircular, stokes_from_angles(0.4, 0.3)}) {
    EXPECT_LT(oracle::max_abs_diff(rotate(s, voltage_to_rotation(49.0, Actuator::X2, cfg)), s), 1e-12);
    EXPECT_LT(oracle::max_abs_diff(rotate(s, voltage_to_rotation(52.2, Actuator::X1, cfg)), s), 1e-12);
  }
}

TEST(VoltageToRotation, HalfWaveX2SwapsQAndR) {
  const ActuatorConfig cfg;
  EXPECT_LT(oracle::max_abs_diff(rotate(kQ, voltage_to_rotation(24.5, Actuator::X2, cfg)), kR), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(rotate(kH, voltage_to_rotation(24.5, Actuator::X2, cfg)), kH), 1e-12);
}

TEST(VoltageToRotation, HalfWaveX1SwapsHAndV) {
  const ActuatorConfig cfg;
  EXPECT_LT(oracle::max_abs_diff(rotate(kH, voltage_to_rotation(26.1, Actuator::X1, cfg)), kV), 1e-12);
  EXPECT_LT(oracle::max_abs_diff(rotate(kQ, voltage_to_rotation(26.1, Actuator::X1, cfg)), kQ), 1e-12);
}

TEST(VoltageToRotation, MatchesOracleAtArbitraryVoltages) {
  const ActuatorConfig cfg;
  for (double v : {0.0, 3.7, 40.0, 99.9, 150.0}) {
    const StokesVector s = stokes_from_angles(1.1, -0.2);
    EXPECT_LT(oracle::max_abs_diff(rotate(s, voltage_to_rotation(v, Actuator::X1, cfg)),
                                   oracle::apply(oracle::rotation_matrix(kAxisQR, 2 * pi * v / 52.2), s)),
              1e-9);
    EXPECT_LT(oracle::max_abs_diff(rotate(s, voltage_to_rotation(v, Actuator::X2, cfg)),
                                   oracle::apply(oracle::rotation_matrix(kAxisHV, 2 * pi * v / 49.0), s)),
              1e-9);
  }
}

TEST(ActuatorRotation, X2ActsBeforeX1) {
  const ActuatorConfig cfg;
  const ControllerState st = at_voltages(13.05, 12.25);  // quarter turns
  const auto m = oracle::mul(oracle::rotation_matrix(kAxisQR, pi / 2), oracle::rotation_matrix(kAxisHV, pi / 2));
  for (const StokesVector& s : {kH, kQ, kAxisCircular}) {
    EXPECT_LT(oracle::max_abs_diff(after_epc(s, st, cfg), oracle::apply(m, s)), 1e-12);
  }
}

TEST(WrapVoltage, Examples) {
  const ActuatorConfig cfg;
  EXPECT_DOUBLE_EQ(wrap_voltage(75.0, Actuator::X1, cfg), 75.0);
  EXPECT_DOUBLE_EQ(wrap_voltage(150.0, Actuator::X1, cfg), 150.0);
  EXPECT_DOUBLE_EQ(wrap_voltage(0.0, Actuator::X2, cfg), 0.0);
  EXPECT_NEAR(wrap_voltage(160.0, Actuator::X1, cfg), 107.8, 1e-12);
  EXPECT_NEAR(wrap_voltage(-10.0, Actuator::X2, cfg), 39.0, 1e-12);
  EXPECT_NEAR(wrap_voltage(300.0, Actuator::X2, cfg), 300.0 - 4 * 49.0, 1e-12);
}

TEST(WrapVoltage, LandsInRangeAndPreservesRotation) {
  const ActuatorConfig cfg;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = (uniform01(rng) - 0.5) * 2000.0;
    for (Actuator a : {Actuator::X1, Actuator::X2}) {
      const double w = wrap_voltage(v, a, cfg);
      EXPECT_GE(w, cfg.v_min);
      EXPECT_LE(w, cfg.v_max);
      const double turns = (v - w) / cfg.v_2pi(a);
      EXPECT_NEAR(turns, std::round(turns), 1e-9);
      const StokesVector s = stokes_from_angles(0.3, 0.5);
      EXPECT_LT(oracle::max_abs_diff(rotate(s, voltage_to_rotation(w, a, cfg)), rotate(s, voltage_to_rotation(v, a, cfg))),
                1e-9);
    }
  }
}

TEST(WrapVoltage, NarrowRangeIsUnwrappable) {
  ActuatorConfig cfg;
  cfg.v_max = 10.0;
  EXPECT_THROW(wrap_voltage(20.0, Actuator::X2, cfg), UnwrappableVoltageError);
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(StepX2, ProportionalMoveReducesS2) {
  ActuatorConfig cfg;
  cfg.gain_x2 = 20.0;
  ControllerState st = at_voltages(52.2, 49.0);  // identity EPC
  const StokesVector in{std::sqrt(0.75), 0.5, 0.0};
  ASSERT_NEAR(after_epc(in, st, cfg).s2, 0.5, 1e-12);
  const ControllerState next = step_x2(st, 0.5, cfg);
  EXPECT_NEAR(std::abs(next.v_x2 - st.v_x2), 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(next.v_x1, st.v_x1);
  EXPECT_LT(std::abs(after_epc(in, next, cfg).s2), 0.5);
  EXPECT_EQ(next.phase, ControlPhase::AdjustingX2);
}

TEST(StepX2, InsideBandHoldsStill) {
  const ActuatorConfig cfg;
  const ControllerState st = at_voltages(75, 75);
  const ControllerState next = step_x2(st, 0.04, cfg);
  EXPECT_DOUBLE_EQ(next.v_x2, 75.0);
}

TEST(StepX2, NullsS2FromEquatorialStarts) {
  const ActuatorConfig cfg;
  Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    const StokesVector in = stokes_from_angles(uniform01(rng) * 2 * pi, 0.0);
    ControllerState st = at_voltages(75, 75);
    int n = 0;
    while (std::abs(after_epc(in, st, cfg).s2) >= st.thresholds.t2 && n < 30) {
      st = step_x2(st, after_epc(in, st, cfg).s2, cfg);
      ++n;
    }
    EXPECT_LT(std::abs(after_epc(in, st, cfg).s2), st.thresholds.t2) << "start " << k;
  }
}

TEST(StepX1, DropBelowT3ReversesDirection) {
  const ActuatorConfig cfg;
  ControllerState st = at_voltages(75, 75);
  st.last_s1 = 0.95;
  st.dir_x1 = +1;
  const ControllerState next = step_x1(st, 0.90, cfg);
  EXPECT_EQ(next.dir_x1, -1);
  EXPECT_NEAR(next.v_x1, 75.0 - cfg.gain_x1 * 0.10, 1e-12);
  EXPECT_DOUBLE_EQ(next.last_s1, 0.90);
}

TEST(StepX1, ImprovingOrAboveT3KeepsDirection) {
  const ActuatorConfig cfg;
  ControllerState st = at_voltages(75, 75);
  st.last_s1 = 0.80;
  EXPECT_EQ(step_x1(st, 0.85, cfg).dir_x1, +1);  // improving
  st.last_s1 = 0.955;
  EXPECT_EQ(step_x1(st, 0.945, cfg).dir_x1, +1);  // worse but above T3
  EXPECT_DOUBLE_EQ(step_x1(st, 0.97, cfg).v_x1, 75.0);  // above T1
}

TEST(StepX1, ClimbsToHFromS2NulledStarts) {
  const ActuatorConfig cfg;
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const double phi = uniform01(rng) * 2 * pi;
    const StokesVector in{std::cos(phi), 0.0, std::sin(phi)};  // S2 already nulled
    ControllerState st = at_voltages(75, 49.0);
    int n = 0;
    while (after_epc(in, st, cfg).s1 <= st.thresholds.t1 && n < 60) {
      st = step_x1(st, after_epc(in, st, cfg).s1, cfg);
      ++n;
    }
    EXPECT_GT(after_epc(in, st, cfg).s1, st.thresholds.t1) << "phi " << phi;
  }
}

TEST(WithinThresholds, StrictInequalities) {
  const Thresholds th;
  EXPECT_TRUE(within_thresholds({0.97, 0.0, 0}, th));
  EXPECT_FALSE(within_thresholds({0.96, 0.0, 0}, th));
  EXPECT_FALSE(within_thresholds({0.99, 0.05, 0}, th));
  EXPECT_FALSE(within_thresholds({0.99, -0.05, 0}, th));
  EXPECT_TRUE(within_thresholds({0.99, -0.049, 0}, th));
}

TEST(Thresholds, Validate) {
  Thresholds th;
  EXPECT_NO_THROW(th.validate());
  th.t3 = 0.97;
  EXPECT_THROW(th.validate(), std::invalid_argument);
  th = Thresholds{};
  th.t2 = 0.0;
  EXPECT_THROW(th.validate(), std::invalid_argument);
}

TEST(ActuatorConfig, Validate) {
  ActuatorConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.verify_samples = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ActuatorConfig{};
  cfg.gain_x1 = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = ActuatorConfig{};
  cfg.v_2pi_x1 = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(FeedbackCycle, AlreadyAlignedStopsAfterVerification) {
  const ActuatorConfig cfg;
  const ControllerState st = ControllerState::initial(cfg, Thresholds{});
  const PoincareRotation fiber = actuator_rotation(st, cfg).inverse();
  const CycleResult r = run_feedback_cycle(fifty_km_plant(fiber, cfg), st, 120, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.iterations, 2);
  EXPECT_EQ(r.state.phase, ControlPhase::Converged);
  EXPECT_DOUBLE_EQ(r.state.v_x1, st.v_x1);
  EXPECT_DOUBLE_EQ(r.state.v_x2, st.v_x2);
}

TEST(FeedbackCycle, RecoversHalfRadianAboutQR) {
  const ActuatorConfig cfg;
  const ControllerState st0 = ControllerState::initial(cfg, Thresholds{});
  const PoincareRotation fiber = compose(PoincareRotation(kAxisQR, 0.5), actuator_rotation(st0, cfg).inverse());
  const CycleResult r = run_feedback_cycle(fifty_km_plant(fiber, cfg), st0, 120, cfg);
  ASSERT_TRUE(r.converged);
  const StokesVector out = rotate(rotate(kH, fiber), actuator_rotation(r.state, cfg));
  EXPECT_GT(out.s1, 0.96);
}

TEST(FeedbackCycle, RandomFibersConvergeQuickly) {
  const ActuatorConfig cfg;
  Rng rng(4);
  std::vector<int> iters;
  int converged = 0;
  for (int k = 0; k < 500; ++k) {
    const PoincareRotation fiber = uniform_random_rotation(rng);
    const CycleResult r =
        run_feedback_cycle(fifty_km_plant(fiber, cfg), ControllerState::initial(cfg, Thresholds{}), 120, cfg);
    converged += r.converged ? 1 : 0;
    iters.push_back(r.iterations);
  }
  EXPECT_EQ(converged, 500);
  EXPECT_LE(oracle::median(iters), 40.0);
}

TEST(FeedbackCycle, VoltagesStayInDriverRange) {
  const ActuatorConfig cfg;
  Rng rng(5);
  for (int k = 0; k < 200; ++k) {
    const CycleResult r = run_feedback_cycle(fifty_km_plant(uniform_random_rotation(rng), cfg),
                                             ControllerState::initial(cfg, Thresholds{}), 120, cfg);
    for (const ControlStep& s : r.trace) {
      EXPECT_GE(s.v_x1, cfg.v_min);
      EXPECT_LE(s.v_x1, cfg.v_max);
      EXPECT_GE(s.v_x2, cfg.v_min);
      EXPECT_LE(s.v_x2, cfg.v_max);
    }
  }
}

TEST(FeedbackCycle, EmptyWindowsAreSkipped) {
  const ActuatorConfig cfg;
  int calls = 0;
  const Plant plant = [&](const ControllerState&) -> EstimatedSOP {
    if (++calls <= 3) {
      throw ZeroWindowError();
    }
    return {0.99, 0.0, 1000000};
  };
  const CycleResult r = run_feedback_cycle(plant, ControllerState::initial(cfg, Thresholds{}), 120, cfg);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.iterations, 5);
  ASSERT_EQ(r.trace.size(), 5u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_FALSE(r.trace[i].valid);
    EXPECT_TRUE(std::isnan(r.trace[i].s1_hat));
  }
  EXPECT_TRUE(r.trace[3].valid);
}

TEST(FeedbackCycle, GivesUpAtMaxIters) {
  const ActuatorConfig cfg;
  const Plant stuck = [](const ControllerState&) { return EstimatedSOP{0.5, 0.3, 1000000}; };
  const CycleResult r = run_feedback_cycle(stuck, ControllerState::initial(cfg, Thresholds{}), 17, cfg);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 17);
  EXPECT_EQ(r.trace.size(), 17u);
  EXPECT_NE(r.state.phase, ControlPhase::Converged);
  const CycleResult none = run_feedback_cycle(stuck, ControllerState::initial(cfg, Thresholds{}), 0, cfg);
  EXPECT_EQ(none.iterations, 0);
  EXPECT_FALSE(none.converged);
}

TEST(FeedbackCycle, OneInThresholdSampleIsNotEnough) {
  const ActuatorConfig cfg;
  int calls = 0;
  // alternate in and out of the band: never two in a row
  const Plant flicker = [&](const ControllerState&) {
    return ++calls % 2 == 1 ? EstimatedSOP{0.99, 0.0, 1} : EstimatedSOP{0.9, 0.0, 1};
  };
  const CycleResult r = run_feedback_cycle(flicker, ControllerState::initial(cfg, Thresholds{}), 20, cfg);
  EXPECT_FALSE(r.converged);
}

TEST(FeedbackCycle, ProbeStepsX2First) {
  const ActuatorConfig cfg;
  const Plant off = [](const ControllerState&) { return EstimatedSOP{0.2, 0.4, 1}; };
  const CycleResult r = run_feedback_cycle(off, ControllerState::initial(cfg, Thresholds{}), 2, cfg);
  ASSERT_EQ(r.trace.size(), 2u);
  EXPECT_NEAR(r.trace[1].v_x2 - r.trace[0].v_x2, cfg.probe_step_v, 1e-12);
  EXPECT_DOUBLE_EQ(r.trace[1].v_x1, r.trace[0].v_x1);
}

TEST(ControlPhase, Names) {
  EXPECT_EQ(to_string(ControlPhase::Idle), "idle");
  EXPECT_EQ(to_string(ControlPhase::Converged), "converged");
}
