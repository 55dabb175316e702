/**
 * @file protocol.hpp
 * @brief BB84 encoding, decoding, sifting and per-interval session records.
 *
 * Alice's qubit for pulse n is a pure function of (sequence seed, n), so two
 * processes holding the same seed agree on every pulse without exchanging it.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pqkd/detection.hpp"
#include "pqkd/rng.hpp"
#include "pqkd/stokes.hpp"

namespace pqkd {

enum class Basis : std::uint8_t { HV = 0, QR = 1 };

struct QubitRecord {
  std::uint64_t pulse_index = 0;
  Basis basis = Basis::HV;
  std::uint8_t bit = 0;  // H/Q -> 0, V/R -> 1

  bool operator==(const QubitRecord&) const = default;
};

/// H, V, Q or R for the given basis and bit.
StokesVector encoded_state(Basis basis, std::uint8_t bit);

/// Draws a uniform basis and bit from rng.
std::pair<QubitRecord, StokesVector> alice_encode(std::uint64_t pulse_index, Rng& rng);

/// Counter-based random sequence: qubit(n) depends only on (seed, n).
class AliceSequence {
 public:
  explicit AliceSequence(std::uint64_t seed) : seed_(seed) {}

  [[nodiscard]] QubitRecord qubit(std::uint64_t pulse_index) const;
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

struct DetectionRecord {
  std::uint64_t pulse_index = 0;
  Basis decoded_basis = Basis::HV;
  std::uint8_t bit = 0;
  bool double_click = false;

  bool operator==(const DetectionRecord&) const = default;
};

/// None when nothing clicked. Two or more clicks give a record flagged
/// double_click whose basis and bit come from the lowest-index detector.
std::optional<DetectionRecord> bob_decode(std::uint64_t pulse_index, const PulseOutcome& outcome);

class EmptySiftError : public std::runtime_error {
 public:
  EmptySiftError() : std::runtime_error("no sifted bits; qber is undefined") {}
};

struct SiftOutcome {
  std::vector<std::pair<QubitRecord, DetectionRecord>> pairs;
  std::uint64_t errors = 0;

  [[nodiscard]] std::uint64_t sifted_bits() const { return pairs.size(); }
  /// Throws EmptySiftError when no pair was kept.
  [[nodiscard]] double qber() const;
};

/// Keeps pulses whose bases match and that were not double clicks. Both lists
/// must be sorted by pulse_index. With key_basis set, only that basis is kept.
SiftOutcome sift(const std::vector<QubitRecord>& alice, const std::vector<DetectionRecord>& bob,
                 std::optional<Basis> key_basis = std::nullopt);

struct IntervalRecord {
  std::uint32_t interval_index = 0;
  std::uint64_t detected_pulses = 0;
  std::uint64_t sifted_bits = 0;
  std::uint64_t errors = 0;
  std::uint32_t control_seconds = 0;
  std::uint32_t qkd_seconds = 0;
  std::uint32_t control_iterations = 0;
  bool converged = false;
  /// Control-phase samples in order; invalid windows are dropped.
  std::vector<EstimatedSOP> s1_s2_trace;

  /// errors / sifted_bits, or nullopt when nothing was sifted.
  [[nodiscard]] std::optional<double> qber() const;
  bool operator==(const IntervalRecord& o) const;
};

using SessionRecord = std::vector<IntervalRecord>;

}  // namespace pqkd
