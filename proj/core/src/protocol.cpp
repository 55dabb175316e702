#include "pqkd/protocol.hpp"

namespace pqkd {

StokesVector encoded_state(Basis basis, std::uint8_t bit) {
  if (basis == Basis::HV) {
    return bit == 0 ? kH : kV;
  }
  return bit == 0 ? kQ : kR;
}

std::pair<QubitRecord, StokesVector> alice_encode(std::uint64_t pulse_index, Rng& rng) {
  const std::uint64_t r = rng();
  QubitRecord q{pulse_index, (r & 1U) != 0 ? Basis::QR : Basis::HV, static_cast<std::uint8_t>((r >> 1) & 1U)};
  return {q, encoded_state(q.basis, q.bit)};
}

QubitRecord AliceSequence::qubit(std::uint64_t pulse_index) const {
  const std::uint64_t r = mix64(seed_ ^ mix64(pulse_index));
  return {pulse_index, (r & 1U) != 0 ? Basis::QR : Basis::HV, static_cast<std::uint8_t>((r >> 1) & 1U)};
}

std::optional<DetectionRecord> bob_decode(std::uint64_t pulse_index, const PulseOutcome& outcome) {
  const int n = outcome.count();
  if (n == 0) {
    return std::nullopt;
  }
  DetectionRecord rec;
  rec.pulse_index = pulse_index;
  rec.double_click = n > 1;
  for (std::size_t d = 0; d < kDetectorCount; ++d) {
    if (!outcome.clicked[d]) {
      continue;
    }
    switch (static_cast<Detector>(d)) {
      case Detector::D0_V:
        rec.decoded_basis = Basis::HV;
        rec.bit = 1;
        break;
      case Detector::D1_H:
        rec.decoded_basis = Basis::HV;
        rec.bit = 0;
        break;
      case Detector::D2_Q:
        rec.decoded_basis = Basis::QR;
        rec.bit = 0;
        break;
      case Detector::D3_R:
        rec.decoded_basis = Basis::QR;
        rec.bit = 1;
        break;
    }
    break;
  }
  return rec;
}

double SiftOutcome::qber() const {
  if (pairs.empty()) {
    throw EmptySiftError();
  }
  return static_cast<double>(errors) / static_cast<double>(pairs.size());
}

SiftOutcome sift(const std::vector<QubitRecord>& alice, const std::vector<DetectionRecord>& bob,
                 std::optional<Basis> key_basis) {
  SiftOutcome out;
  std::size_t i = 0;
  for (const auto& d : bob) {
    while (i < alice.size() && alice[i].pulse_index < d.pulse_index) {
      ++i;
    }
    if (i == alice.size()) {
      break;
    }
    const QubitRecord& a = alice[i];
    if (a.pulse_index != d.pulse_index || d.double_click || a.basis != d.decoded_basis) {
      continue;
    }
    if (key_basis && a.basis != *key_basis) {
      continue;
    }
    out.errors += a.bit != d.bit ? 1 : 0;
    out.pairs.emplace_back(a, d);
  }
  return out;
}

std::optional<double> IntervalRecord::qber() const {
  if (sifted_bits == 0) {
    return std::nullopt;
  }
  return static_cast<double>(errors) / static_cast<double>(sifted_bits);
}

bool IntervalRecord::operator==(const IntervalRecord& o) const {
  if (s1_s2_trace.size() != o.s1_s2_trace.size()) {
    return false;
  }
  for (std::size_t k = 0; k < s1_s2_trace.size(); ++k) {
    const auto& a = s1_s2_trace[k];
    const auto& b = o.s1_s2_trace[k];
    if (a.s1_hat != b.s1_hat || a.s2_hat != b.s2_hat || a.window_pulses != b.window_pulses) {
      return false;
    }
  }
  return interval_index == o.interval_index && detected_pulses == o.detected_pulses && sifted_bits == o.sifted_bits &&
         errors == o.errors && control_seconds == o.control_seconds && qkd_seconds == o.qkd_seconds &&
         control_iterations == o.control_iterations && converged == o.converged;
}

}  // namespace pqkd
