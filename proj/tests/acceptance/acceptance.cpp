// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pqkd/config.hpp"
#include "pqkd/report.hpp"
#include "pqkd/session.hpp"

using namespace pqkd;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) {
      detail += "; ";
    }
    detail += what + (ok ? "" : " [out of band]");
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const std::vector<std::string> kPresets{"fiber50", "fiber75", "fiber100"};

Verdict reference_rate() {
  Verdict v;
  for (const auto& name : kPresets) {
    const ScenarioConfig c = preset(name);
    const SourceConfig src{c.fiber.source_mean_photons_ref, c.source.rep_rate_hz};
    const double t = transmittance(c.fiber);
    const auto e = expected_counts(kH, c.source.rep_rate_hz, src, t, c.detector);
    const double expected = e[0] + e[1];
    Rng rng(derive_seed(1, name));
    double lo = 1e18, hi = 0.0;
    for (int k = 0; k < 100; ++k) {
      const ClickCounts w =
          accumulate_window(kH, static_cast<std::uint64_t>(c.source.rep_rate_hz), src, t, c.detector, rng);
      lo = std::min(lo, static_cast<double>(w.i_h + w.i_v));
      hi = std::max(hi, static_cast<double>(w.i_h + w.i_v));
    }
    const bool ok = std::abs(expected - 3200) <= 320 && lo >= 2880 && hi <= 3520;
    v.check(ok, fmt("%s expected %.0f, 100 windows in [%.0f, %.0f]", name.c_str(), expected, lo, hi));
  }
  return v;
}

Verdict arrival_rate() {
  Verdict v;
  const double quoted[] = {0.006, 0.002, 0.0006};
  const double derived[] = {0.0063, 0.0020, 0.00063};
  for (std::size_t i = 0; i < kPresets.size(); ++i) {
    const ScenarioConfig c = preset(kPresets[i]);
    const double mu_t = c.fiber.source_mean_photons_qkd * transmittance(c.fiber);
    const double scale = std::pow(10.0, std::floor(std::log10(mu_t)));
    const double one_sig = std::round(mu_t / scale) * scale;
    const double two_sig = std::round(mu_t / scale * 10.0) * scale / 10.0;
    const bool ok = std::abs(one_sig - quoted[i]) < 1e-12 && std::abs(two_sig - derived[i]) < 1e-12;
    v.check(ok, fmt("%s mu*t=%.3g", kPresets[i].c_str(), mu_t));
  }
  return v;
}

Verdict qber_bands() {
  Verdict v;
  const double centre[] = {0.031, 0.048, 0.066};
  const double half[] = {0.011, 0.015, 0.020};
  for (std::size_t i = 0; i < kPresets.size(); ++i) {
    const ScenarioConfig c = preset(kPresets[i]);
    double sum = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      sum += summarize(run_local_session(c, seed, 1800), c, seed, 1800).pooled_qber;
    }
    const double mean = sum / 10.0;
    v.check(std::abs(mean - centre[i]) <= half[i] + 1e-12,
            fmt("%s %.2f%% vs %.1f+-%.1f%%", kPresets[i].c_str(), 100 * mean, 100 * centre[i], 100 * half[i]));
  }
  return v;
}

Verdict dark_count_qber() {
  Verdict v;
  for (const std::string name : {"fiber50", "fiber100"}) {
    ScenarioConfig c = preset(name);
    c.detector.pbs_extinction = 0.0;
    c.fiber.drift_angle_std = 0.0;
    c.drift_explicit = true;
    c.initial_fiber = InitialFiber::Identity;
    c.actuator.initial_v_x1 = 0.0;
    c.actuator.initial_v_x2 = 0.0;
    const double q = summarize(run_local_session(c, 1, 1800), c, 1, 1800).pooled_qber;
    const bool ok = name == "fiber50" ? q < 0.003 : std::abs(q - 0.02) <= 0.01;
    v.check(ok, fmt("%s %.3f%% (%s)", name.c_str(), 100 * q, name == "fiber50" ? "< 0.3%" : "2+-1%"));
  }
  return v;
}

Verdict controlled_sop() {
  Verdict v;
  const ScenarioConfig c = preset("fiber50");
  const Summary s = summarize(run_local_session(c, 1, 3600), c, 1, 3600);
  v.check(s.controlled_s1.mean >= 0.95 && std::abs(s.controlled_s2.mean) <= 0.08 && s.controlled_s2.std <= 0.10,
          fmt("delivered S1 %.3f+-%.3f, S2 %.3f+-%.3f over %zu cycles", s.controlled_s1.mean, s.controlled_s1.std,
              s.controlled_s2.mean, s.controlled_s2.std, s.controlled_s1.n));
  v.detail += fmt(" (all control samples: S1 %.3f+-%.3f, S2 %.3f+-%.3f)", s.control_samples_s1.mean,
                  s.control_samples_s1.std, s.control_samples_s2.mean, s.control_samples_s2.std);
  return v;
}

Verdict duty_cycle() {
  Verdict v;
  const std::uint32_t minutes[] = {630, 587, 400};
  for (std::size_t i = 0; i < kPresets.size(); ++i) {
    const ScenarioConfig c = preset(kPresets[i]);
    const std::uint32_t d = minutes[i] * 60;
    const double duty = summarize(run_local_session(c, 1, d), c, 1, d).duty;
    v.check(duty >= 1.0 / 12.0 && duty <= 1.0 / 5.0,
            fmt("%s %u min: %.3f vs [0.083, 0.200]", kPresets[i].c_str(), minutes[i], duty));
  }
  return v;
}

Verdict convergence() {
  Verdict v;
  const ScenarioConfig c = preset("fiber50");
  const SourceConfig src{c.fiber.source_mean_photons_ref, c.source.rep_rate_hz};
  const double t = transmittance(c.fiber);
  const ControllerState start = ControllerState::initial(c.actuator, c.thresholds);

  const auto grid = oracle::ten_degree_grid();
  std::size_t ok = 0;
  std::vector<int> iters;
  for (const PoincareRotation& fiber : grid) {
    const CycleResult r =
        run_feedback_cycle(oracle::expected_plant(fiber, c.actuator, src, t, c.detector), start, c.max_iters, c.actuator);
    ok += r.converged ? 1 : 0;
    iters.push_back(r.iterations);
  }
  v.check(ok == grid.size(), fmt("noiseless grid %zu/%zu (median %g iterations)", ok, grid.size(), oracle::median(iters)));

  Rng rng(2024);
  std::size_t noisy_ok = 0;
  const int trials = 1000;
  for (int k = 0; k < trials; ++k) {
    const PoincareRotation fiber = uniform_random_rotation(rng);
    const Plant plant = [&](const ControllerState& st) {
      const StokesVector s = rotate(rotate(kH, fiber), actuator_rotation(st, c.actuator));
      ClickCounts w = accumulate_window(s, static_cast<std::uint64_t>(src.rep_rate_hz), src, t, c.detector, rng);
      w = apply_click_fluctuation(w, 0.03, rng);
      return estimate_stokes(w, static_cast<std::uint64_t>(src.rep_rate_hz));
    };
    noisy_ok += run_feedback_cycle(plant, start, c.max_iters, c.actuator).converged ? 1 : 0;
  }
  v.check(noisy_ok >= 990, fmt("3%% noise %zu/%d", noisy_ok, trials));
  return v;
}

Verdict oracle_equivalence() {
  Verdict v;
  Rng rng(8);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const StokesVector axis = uniform_random_axis(rng);
    const double angle = (uniform01(rng) * 2 - 1) * 2 * std::numbers::pi;
    const StokesVector s = uniform_random_axis(rng);
    const PoincareRotation r1(axis, angle);
    const PoincareRotation r2 = uniform_random_rotation(rng);
    worst = std::max(worst, oracle::max_abs_diff(rotate(s, r1), oracle::apply(oracle::rotation_matrix(axis, angle), s)));
    const auto m = oracle::mul(oracle::rotation_matrix(r2.axis(), r2.angle()), oracle::rotation_matrix(axis, angle));
    worst = std::max(worst, oracle::max_abs_diff(rotate(s, compose(r1, r2)), oracle::apply(m, s)));
  }
  v.check(worst < 1e-9, fmt("rotation vs matrix max diff %.1e", worst));

  const ScenarioConfig c = preset("fiber50");
  const SourceConfig src{c.fiber.source_mean_photons_ref, c.source.rep_rate_hz};
  const StokesVector s = stokes_from_angles(0.6, 0.3);
  Rng a(1), b(2);
  std::vector<double> fast, slow;
  for (int k = 0; k < 400; ++k) {
    fast.push_back(static_cast<double>(accumulate_window(s, 100000, src, transmittance(c.fiber), c.detector, a).i_h));
    slow.push_back(
        static_cast<double>(accumulate_window_per_pulse(s, 100000, src, transmittance(c.fiber), c.detector, b).i_h));
  }
  const double p = oracle::ks_two_sample_p(fast, slow);
  v.check(p > 0.01, fmt("binomial vs per-pulse KS p=%.3f", p));

  const SessionResult lo = run_local_session(c, 3, 1800, LocalTransport::Loopback);
  const SessionResult so = run_local_session(c, 3, 1800, LocalTransport::Socket);
  v.check(lo.intervals == so.intervals, fmt("loopback vs socket %zu intervals identical", lo.intervals.size()));
  return v;
}

Verdict determinism() {
  Verdict v;
  const ScenarioConfig c = preset("fiber75");
  const auto base = std::filesystem::temp_directory_path() / "pqkd_acceptance";
  std::filesystem::remove_all(base);
  for (const char* run : {"a", "b"}) {
    write_artifacts(base / run, run_local_session(c, 42, 1800), c, 42, 1800);
  }
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string ta = slurp(base / "a" / "trace.csv");
  const std::string tb = slurp(base / "b" / "trace.csv");
  v.check(!ta.empty() && ta == tb, fmt("trace.csv %zu bytes, identical=%s", ta.size(), ta == tb ? "yes" : "no"));
  std::filesystem::remove_all(base);
  return v;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Verdict()>> criteria[] = {
      {"reference-rate calibration", reference_rate}, {"arrival-rate consistency", arrival_rate},
      {"QBER bands", qber_bands},                     {"dark-count QBER", dark_count_qber},
      {"controlled SOP", controlled_sop},             {"duty cycle", duty_cycle},
      {"controller convergence", convergence},        {"oracle equivalences", oracle_equivalence},
      {"determinism", determinism},
  };
  int failed = 0;
  int index = 1;
  for (const auto& [name, run] : criteria) {
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s %d %s: %s\n", v.pass ? "PASS" : "FAIL", index++, name, v.detail.c_str());
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
