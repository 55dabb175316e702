#include "pqkd/detection.hpp"

#include <cmath>
#include <stdexcept>

namespace pqkd {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

ClickCounts to_counts(const std::array<std::uint64_t, kDetectorCount>& by_detector) {
  ClickCounts c;
  c.i_v = by_detector[index_of(Detector::D0_V)];
  c.i_h = by_detector[index_of(Detector::D1_H)];
  c.i_q = by_detector[index_of(Detector::D2_Q)];
  c.i_r = by_detector[index_of(Detector::D3_R)];
  return c;
}

}  // namespace

void DetectorConfig::validate() const {
  bool ok = is_probability(efficiency) && is_probability(pbs_extinction) && is_probability(monitor_split);
  for (double d : dark_prob_per_gate) {
    ok = ok && is_probability(d);
  }
  if (!ok) {
    throw std::invalid_argument("detector probabilities must lie in [0, 1]");
  }
}

int PulseOutcome::count() const {
  int n = 0;
  for (bool c : clicked) {
    n += c ? 1 : 0;
  }
  return n;
}

std::array<double, kDetectorCount> port_projections(const StokesVector& s, double x) {
  const double h = (1.0 + s.s1) / 2.0;
  const double q = (1.0 + s.s2) / 2.0;
  std::array<double, kDetectorCount> p{};
  p[index_of(Detector::D1_H)] = (1.0 - x) * h + x * (1.0 - h);
  p[index_of(Detector::D0_V)] = (1.0 - x) * (1.0 - h) + x * h;
  p[index_of(Detector::D2_Q)] = (1.0 - x) * q + x * (1.0 - q);
  p[index_of(Detector::D3_R)] = (1.0 - x) * (1.0 - q) + x * q;
  return p;
}

ClickProbabilities click_probabilities(const StokesVector& s, const SourceConfig& src, double t,
                                       const DetectorConfig& det) {
  const auto proj = port_projections(s, det.pbs_extinction);
  const double photons = src.mean_photons_per_pulse * t * det.efficiency;
  const double hv_arm = 1.0 - det.monitor_split;
  const double qr_arm = det.monitor_split;
  ClickProbabilities p{};
  for (std::size_t d = 0; d < kDetectorCount; ++d) {
    const bool hv = d == index_of(Detector::D0_V) || d == index_of(Detector::D1_H);
    const double arm = hv ? hv_arm : qr_arm;
    // -expm1 keeps precision for mu*t ~ 1e-5
    const double photon_click = -std::expm1(-photons * arm * proj[d]);
    const double dark = det.dark_prob_per_gate[d];
    p[d] = 1.0 - (1.0 - dark) * (1.0 - photon_click);
  }
  return p;
}

PulseOutcome sample_pulse(const ClickProbabilities& p, Rng& rng) {
  PulseOutcome o;
  for (std::size_t d = 0; d < kDetectorCount; ++d) {
    o.clicked[d] = uniform01(rng) < p[d];
  }
  return o;
}

double any_click_probability(const ClickProbabilities& p) {
  double none = 1.0;
  for (double pd : p) {
    none *= 1.0 - pd;
  }
  return 1.0 - none;
}

PulseOutcome sample_pulse_given_click(const ClickProbabilities& p, Rng& rng) {
  // Sequential conditioning: while no detector has clicked yet, detector d clicks
  // with p_d / P(at least one of d..3 clicks).
  PulseOutcome o;
  bool any = false;
  for (std::size_t d = 0; d < kDetectorCount; ++d) {
    double prob = p[d];
    if (!any) {
      double none_rest = 1.0;
      for (std::size_t j = d; j < kDetectorCount; ++j) {
        none_rest *= 1.0 - p[j];
      }
      const double some_rest = 1.0 - none_rest;
      if (some_rest <= 0.0) {
        throw std::invalid_argument("conditioning on a click with zero click probability");
      }
      prob = p[d] / some_rest;
    }
    o.clicked[d] = uniform01(rng) < prob;
    any = any || o.clicked[d];
  }
  return o;
}

ClickCounts accumulate_window(const StokesVector& s, std::uint64_t n_pulses, const SourceConfig& src, double t,
                              const DetectorConfig& det, Rng& rng) {
  if (n_pulses == 0) {
    throw std::invalid_argument("window needs at least one pulse");
  }
  const auto p = click_probabilities(s, src, t, det);
  std::array<std::uint64_t, kDetectorCount> n{};
  for (std::size_t d = 0; d < kDetectorCount; ++d) {
    n[d] = std::binomial_distribution<std::uint64_t>(n_pulses, p[d])(rng);
  }
  return to_counts(n);
}

ClickCounts accumulate_window_per_pulse(const StokesVector& s, std::uint64_t n_pulses, const SourceConfig& src,
                                        double t, const DetectorConfig& det, Rng& rng) {
  if (n_pulses == 0) {
    throw std::invalid_argument("window needs at least one pulse");
  }
  const auto p = click_probabilities(s, src, t, det);
  std::array<std::uint64_t, kDetectorCount> n{};
  for (std::uint64_t i = 0; i < n_pulses; ++i) {
    const auto o = sample_pulse(p, rng);
    for (std::size_t d = 0; d < kDetectorCount; ++d) {
      n[d] += o.clicked[d] ? 1 : 0;
    }
  }
  return to_counts(n);
}

std::array<double, kDetectorCount> expected_counts(const StokesVector& s, double n_pulses, const SourceConfig& src,
                                                   double t, const DetectorConfig& det) {
  const auto p = click_probabilities(s, src, t, det);
  return {n_pulses * p[index_of(Detector::D1_H)], n_pulses * p[index_of(Detector::D0_V)],
          n_pulses * p[index_of(Detector::D2_Q)], n_pulses * p[index_of(Detector::D3_R)]};
}

ClickCounts apply_click_fluctuation(const ClickCounts& c, double fraction, Rng& rng) {
  if (fraction <= 0.0) {
    return c;
  }
  std::normal_distribution<double> noise(0.0, fraction);
  auto jitter = [&](std::uint64_t v) {
    const double x = std::round(static_cast<double>(v) * (1.0 + noise(rng)));
    return x <= 0.0 ? std::uint64_t{0} : static_cast<std::uint64_t>(x);
  };
  ClickCounts out;
  out.i_h = jitter(c.i_h);
  out.i_v = jitter(c.i_v);
  out.i_q = jitter(c.i_q);
  out.i_r = jitter(c.i_r);
  return out;
}

}  // namespace pqkd
