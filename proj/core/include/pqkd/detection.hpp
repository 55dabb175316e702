/**
 * @file detection.hpp
 * @brief Weak coherent source, splitter tree, finite-extinction PBS and gated
 *        single-photon detectors.
 *
 * Bob's bank has four detectors behind a 50/50 splitter: D1 (H) and D0 (V)
 * on the HV arm, D2 (Q) and D3 (R) on the monitoring QR arm. A detector
 * clicks in a gate with probability
 *
 *   1 - (1 - dark) * exp(-mu * t * eta * arm * p)
 *
 * where p is the PBS projection probability of the arriving SOP onto that
 * detector's port.
 */

#pragma once

#include <array>
#include <cstdint>

#include "pqkd/rng.hpp"
#include "pqkd/stokes.hpp"

namespace pqkd {

enum class Detector : std::uint8_t { D0_V = 0, D1_H = 1, D2_Q = 2, D3_R = 3 };

inline constexpr std::size_t kDetectorCount = 4;
inline constexpr std::size_t index_of(Detector d) { return static_cast<std::size_t>(d); }

struct SourceConfig {
  double mean_photons_per_pulse = 0.1;
  double rep_rate_hz = 1e6;
};

struct DetectorConfig {
  double efficiency = 0.20;
  /// Indexed by Detector.
  std::array<double, kDetectorCount> dark_prob_per_gate{4e-7, 8e-7, 4e-7, 8e-7};
  double pbs_extinction = 0.005;
  /// Fraction of photons routed to the QR monitoring arm.
  double monitor_split = 0.5;

  /// Throws std::invalid_argument if any probability lies outside [0, 1].
  void validate() const;
};

/// Per-detector click probability for one gate, indexed by Detector.
using ClickProbabilities = std::array<double, kDetectorCount>;

struct PulseOutcome {
  std::array<bool, kDetectorCount> clicked{};

  [[nodiscard]] bool operator[](Detector d) const { return clicked[index_of(d)]; }
  [[nodiscard]] int count() const;
  bool operator==(const PulseOutcome&) const = default;
};

/// Projection probabilities of `s` on the four PBS ports, including extinction leakage.
std::array<double, kDetectorCount> port_projections(const StokesVector& s, double pbs_extinction);

ClickProbabilities click_probabilities(const StokesVector& s, const SourceConfig& src, double transmittance,
                                       const DetectorConfig& det);

PulseOutcome sample_pulse(const ClickProbabilities& p, Rng& rng);

/// Probability that at least one detector clicks.
double any_click_probability(const ClickProbabilities& p);

/// Draw an outcome conditioned on at least one click. Requires any_click_probability(p) > 0.
PulseOutcome sample_pulse_given_click(const ClickProbabilities& p, Rng& rng);

/// Window of n_pulses gates with one binomial draw per detector.
ClickCounts accumulate_window(const StokesVector& s, std::uint64_t n_pulses, const SourceConfig& src,
                              double transmittance, const DetectorConfig& det, Rng& rng);

/// Same window, one Bernoulli draw per detector per pulse. Reference path for the binomial one.
ClickCounts accumulate_window_per_pulse(const StokesVector& s, std::uint64_t n_pulses, const SourceConfig& src,
                                        double transmittance, const DetectorConfig& det, Rng& rng);

/// Expected clicks per detector over n_pulses, in ClickCounts order (H, V, Q, R).
std::array<double, kDetectorCount> expected_counts(const StokesVector& s, double n_pulses, const SourceConfig& src,
                                                   double transmittance, const DetectorConfig& det);

/// Multiplies each count by (1 + N(0, fraction)), rounding and clamping at 0.
ClickCounts apply_click_fluctuation(const ClickCounts& c, double fraction, Rng& rng);

}  // namespace pqkd
