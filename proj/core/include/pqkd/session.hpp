/**
 * @file session.hpp
 * @brief Alice and Bob agents running interleaved control and BB84 intervals.
 *
 * Each interval opens with a control cycle and spends the rest of
 * control_interval_s distributing key:
 *
 *   Bob -> ControlAsk, Alice -> RefStart, Bob runs the feedback loop on H
 *   reference pulses, Bob -> ControlDone, QKD seconds, then for each chunk of
 *   detections Bob -> BasisReveal and Alice -> SiftResult.
 *
 * The session opens with Alice's SessionStart, which commits the seed of her
 * pulse sequence, and closes with a SessionEnd exchange. The quantum channel
 * and detectors are simulated inside Bob's process; only classical messages
 * cross the endpoint.
 */

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "pqkd/channel.hpp"
#include "pqkd/config.hpp"
#include "pqkd/controller.hpp"
#include "pqkd/protocol.hpp"
#include "pqkd/transport.hpp"

namespace pqkd {

/// One simulated second.
struct TraceRow {
  std::uint32_t time_s = 0;
  bool control = false;
  double s1_hat = 0.0;  // NaN in QKD seconds and in unusable control windows
  double s2_hat = 0.0;
  double v_x1 = 0.0;
  double v_x2 = 0.0;
};

struct SessionResult {
  SessionRecord intervals;
  std::vector<TraceRow> trace;
  /// Cycles that ran the full max_iters without converging.
  std::uint32_t failed_cycles = 0;
};

struct AliceReport {
  std::uint32_t intervals = 0;
  std::uint64_t revealed = 0;
  std::uint64_t kept = 0;
};

class SessionMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bob-side physics: fiber drift, EPC and detector bank, advanced one second
/// per call.
class QuantumLink {
 public:
  QuantumLink(const ScenarioConfig& cfg, std::uint64_t seed, AliceSequence alice);

  /// One second of H reference pulses at the given voltages. Throws
  /// ZeroWindowError after advancing time when an arm saw no clicks.
  EstimatedSOP reference_window(const ControllerState& st);

  /// One second of BB84 pulses; returns detections in pulse order.
  std::vector<DetectionRecord> qkd_second(const ControllerState& st);

  [[nodiscard]] std::uint32_t now() const { return now_; }
  [[nodiscard]] const ChannelState& channel() const { return channel_; }

 private:
  void advance();

  ScenarioConfig cfg_;
  AliceSequence alice_;
  Rng rng_;
  ChannelState channel_;
  double transmittance_;
  std::uint64_t pulses_per_second_;
  std::uint32_t now_ = 0;
};

std::uint64_t alice_sequence_seed(std::uint64_t run_seed);

/// CRC32 of the canonical config text; both peers must agree on it.
std::uint32_t config_fingerprint(const ScenarioConfig& cfg);

/// Bob's side. Waits for SessionStart, then drives the intervals.
SessionResult run_bob(Endpoint& ep, const ScenarioConfig& cfg, std::uint64_t seed, std::uint32_t duration_s);

/// Alice's side. Sends SessionStart and answers Bob until SessionEnd.
AliceReport run_alice(Endpoint& ep, const ScenarioConfig& cfg, std::uint64_t seed, std::uint32_t duration_s);

enum class LocalTransport : std::uint8_t { Loopback, Socket };

/// Both agents in one process, Alice on a helper thread.
SessionResult run_local_session(const ScenarioConfig& cfg, std::uint64_t seed, std::uint32_t duration_s,
                                LocalTransport transport = LocalTransport::Loopback);

}  // namespace pqkd
