/**
 * @file transport.hpp
 * @brief Classical channel: framed messages, typed payloads and endpoints.
 *
 * Frame layout, all integers big-endian:
 *
 *   "PQKD" | version u8 | kind u8 | length u32 | payload | crc32 u32
 *
 * The CRC (IEEE polynomial) covers kind, length and payload.
 */

#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "pqkd/protocol.hpp"

namespace pqkd {

enum class MessageKind : std::uint8_t {
  ControlAsk = 1,
  RefStart = 2,
  ControlDone = 3,
  BasisReveal = 4,
  SiftResult = 5,
  SessionEnd = 6,
  SessionStart = 7,
};

std::string_view to_string(MessageKind k);

using Bytes = std::vector<std::uint8_t>;

struct ClassicalMessage {
  MessageKind kind = MessageKind::ControlAsk;
  Bytes payload;

  bool operator==(const ClassicalMessage&) const = default;
};

inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::size_t kFrameHeaderSize = 10;
inline constexpr std::size_t kFrameOverhead = kFrameHeaderSize + 4;
inline constexpr std::size_t kMaxPayload = std::size_t{1} << 24;
inline constexpr std::uint16_t kDefaultPort = 7117;

class PayloadTooLargeError : public std::length_error {
 public:
  PayloadTooLargeError() : std::length_error("payload exceeds 2^24 bytes") {}
};

/// Throws PayloadTooLargeError.
Bytes encode(const ClassicalMessage& m);

enum class DecodeStatus : std::uint8_t {
  Ok,
  Truncated,  // need more bytes; not an error
  BadMagic,
  BadVersion,
  UnknownKind,
  PayloadTooLarge,
  CrcMismatch,
};

std::string_view to_string(DecodeStatus s);

struct DecodeResult {
  DecodeStatus status = DecodeStatus::Truncated;
  ClassicalMessage message;
  std::size_t consumed = 0;  // bytes of the frame when status is Ok
};

/// Decodes the frame at the start of `bytes`.
DecodeResult decode(std::span<const std::uint8_t> bytes);

class FrameError : public std::runtime_error {
 public:
  explicit FrameError(DecodeStatus s);
  [[nodiscard]] DecodeStatus status() const { return status_; }

 private:
  DecodeStatus status_;
};

/// Reassembles frames from an arbitrarily chunked byte stream.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  /// Next complete message, or nullopt while truncated. Throws FrameError.
  std::optional<ClassicalMessage> next();
  [[nodiscard]] std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

// Typed payloads.

struct SessionStart {
  std::uint64_t run_seed = 0;
  /// Commitment to Alice's random sequence: both sides derive every pulse from it.
  std::uint64_t sequence_seed = 0;
  std::uint32_t duration_s = 0;
  std::uint32_t config_crc = 0;

  bool operator==(const SessionStart&) const = default;
};

struct IntervalTag {
  std::uint32_t interval = 0;

  bool operator==(const IntervalTag&) const = default;
};

struct ControlDone {
  std::uint32_t interval = 0;
  std::uint32_t iterations = 0;
  bool converged = false;

  bool operator==(const ControlDone&) const = default;
};

/// Bob's decoded bases for a run of detected pulses, indices ascending.
struct BasisReveal {
  std::uint32_t interval = 0;
  bool last_chunk = false;
  std::vector<std::uint64_t> pulse_indices;
  std::vector<Basis> bases;

  bool operator==(const BasisReveal&) const = default;
};

/// Alice's answer to one BasisReveal: per entry a keep flag and her bit
/// (0 where not kept) so Bob can count errors.
struct SiftResult {
  std::uint32_t interval = 0;
  std::vector<bool> keep;
  std::vector<std::uint8_t> alice_bits;

  bool operator==(const SiftResult&) const = default;
};

struct SessionEnd {
  std::uint32_t intervals = 0;

  bool operator==(const SessionEnd&) const = default;
};

class PayloadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ClassicalMessage make_message(const SessionStart& p);
ClassicalMessage make_control_ask(const IntervalTag& p);
ClassicalMessage make_ref_start(const IntervalTag& p);
ClassicalMessage make_message(const ControlDone& p);
ClassicalMessage make_message(const BasisReveal& p);
ClassicalMessage make_message(const SiftResult& p);
ClassicalMessage make_message(const SessionEnd& p);

// Parsers throw PayloadError on a wrong kind or malformed payload.
SessionStart parse_session_start(const ClassicalMessage& m);
IntervalTag parse_interval_tag(const ClassicalMessage& m);
ControlDone parse_control_done(const ClassicalMessage& m);
BasisReveal parse_basis_reveal(const ClassicalMessage& m);
SiftResult parse_sift_result(const ClassicalMessage& m);
SessionEnd parse_session_end(const ClassicalMessage& m);

class ConnectionLost : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One side of a reliable, ordered message pipe. send() is safe to call from
/// several threads; whole frames are never interleaved.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  /// Throws ConnectionLost once the pipe is closed.
  virtual void send(const ClassicalMessage& m) = 0;
  /// Blocks for the next message. Throws ConnectionLost when the peer has gone
  /// and nothing is left to read.
  virtual ClassicalMessage receive() = 0;
  virtual void close() = 0;
};

using EndpointPair = std::pair<std::unique_ptr<Endpoint>, std::unique_ptr<Endpoint>>;

/// In-process pipe. Messages go through encode/decode like on a socket.
EndpointPair loopback_pair();

}  // namespace pqkd
