#include "pqkd/transport.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <string>

namespace pqkd {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic{'P', 'Q', 'K', 'D'};

void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>(v >> shift));
  }
}

void put_varint(Bytes& out, std::uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<std::uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<std::uint8_t>(v));
}

void set_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

std::uint32_t crc_of(const std::uint8_t* p, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; frames are bounded by 2^24 + 5 bytes.
  crc = crc32(crc, p, static_cast<uInt>(n));
  return static_cast<std::uint32_t>(crc);
}

bool known_kind(std::uint8_t k) { return k >= 1 && k <= 7; }

void pack_bits(Bytes& out, const std::vector<bool>& bits) {
  std::uint8_t cur = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) {
      cur |= static_cast<std::uint8_t>(0x80U >> (i % 8));
    }
    if (i % 8 == 7) {
      out.push_back(cur);
      cur = 0;
    }
  }
  if (bits.size() % 8 != 0) {
    out.push_back(cur);
  }
}

class Reader {
 public:
  explicit Reader(const Bytes& b) : b_(b) {}

  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    const std::uint32_t v = get_u32(b_.data() + pos_);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t hi = u32();
    return (hi << 32) | u32();
  }
  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const std::uint8_t byte = u8();
      v |= std::uint64_t{byte & 0x7FU} << shift;
      if ((byte & 0x80U) == 0) {
        return v;
      }
    }
    throw PayloadError("varint longer than 64 bits");
  }
  std::vector<bool> bits(std::size_t n) {
    need((n + 7) / 8);
    std::vector<bool> out(n);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = (b_[pos_ + i / 8] & (0x80U >> (i % 8))) != 0;
    }
    pos_ += (n + 7) / 8;
    return out;
  }
  void finish() const {
    if (pos_ != b_.size()) {
      throw PayloadError("trailing bytes in payload");
    }
  }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      throw PayloadError("payload too short");
    }
  }

  const Bytes& b_;
  std::size_t pos_ = 0;
};

void expect_kind(const ClassicalMessage& m, MessageKind k) {
  if (m.kind != k) {
    throw PayloadError(std::string("expected ") + std::string(to_string(k)) + ", got " +
                       std::string(to_string(m.kind)));
  }
}

ClassicalMessage tagged(MessageKind k, std::uint32_t interval) {
  ClassicalMessage m{k, {}};
  put_u32(m.payload, interval);
  return m;
}

}  // namespace

std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::ControlAsk:
      return "ControlAsk";
    case MessageKind::RefStart:
      return "RefStart";
    case MessageKind::ControlDone:
      return "ControlDone";
    case MessageKind::BasisReveal:
      return "BasisReveal";
    case MessageKind::SiftResult:
      return "SiftResult";
    case MessageKind::SessionEnd:
      return "SessionEnd";
    case MessageKind::SessionStart:
      return "SessionStart";
  }
  return "Unknown";
}

std::string_view to_string(DecodeStatus s) {
  switch (s) {
    case DecodeStatus::Ok:
      return "ok";
    case DecodeStatus::Truncated:
      return "truncated";
    case DecodeStatus::BadMagic:
      return "bad magic";
    case DecodeStatus::BadVersion:
      return "unsupported frame version";
    case DecodeStatus::UnknownKind:
      return "unknown message kind";
    case DecodeStatus::PayloadTooLarge:
      return "payload too large";
    case DecodeStatus::CrcMismatch:
      return "crc mismatch";
  }
  return "unknown";
}

Bytes encode(const ClassicalMessage& m) {
  if (m.payload.size() > kMaxPayload) {
    throw PayloadTooLargeError();
  }
  const auto length = static_cast<std::uint32_t>(m.payload.size());
  Bytes out(kFrameOverhead + length);
  std::copy(kMagic.begin(), kMagic.end(), out.begin());
  out[4] = kFrameVersion;
  out[5] = static_cast<std::uint8_t>(m.kind);
  set_u32(out.data() + 6, length);
  std::copy(m.payload.begin(), m.payload.end(), out.begin() + kFrameHeaderSize);
  set_u32(out.data() + kFrameHeaderSize + length, crc_of(out.data() + 5, 5 + length));
  return out;
}

DecodeResult decode(std::span<const std::uint8_t> bytes) {
  DecodeResult r;
  const std::size_t magic_seen = std::min(bytes.size(), kMagic.size());
  if (!std::equal(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(magic_seen), kMagic.begin())) {
    r.status = DecodeStatus::BadMagic;
    return r;
  }
  if (bytes.size() < kFrameHeaderSize) {
    return r;
  }
  if (bytes[4] != kFrameVersion) {
    r.status = DecodeStatus::BadVersion;
    return r;
  }
  if (!known_kind(bytes[5])) {
    r.status = DecodeStatus::UnknownKind;
    return r;
  }
  const std::uint32_t length = get_u32(bytes.data() + 6);
  if (length > kMaxPayload) {
    r.status = DecodeStatus::PayloadTooLarge;
    return r;
  }
  const std::size_t total = kFrameOverhead + length;
  if (bytes.size() < total) {
    return r;
  }
  const std::uint32_t crc = get_u32(bytes.data() + kFrameHeaderSize + length);
  if (crc != crc_of(bytes.data() + 5, 5 + length)) {
    r.status = DecodeStatus::CrcMismatch;
    return r;
  }
  r.status = DecodeStatus::Ok;
  r.message.kind = static_cast<MessageKind>(bytes[5]);
  r.message.payload.assign(bytes.begin() + kFrameHeaderSize, bytes.begin() + static_cast<std::ptrdiff_t>(kFrameHeaderSize + length));
  r.consumed = total;
  return r;
}

FrameError::FrameError(DecodeStatus s) : std::runtime_error(std::string(to_string(s))), status_(s) {}

void FrameReader::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ >= buf_.size() / 2) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<ClassicalMessage> FrameReader::next() {
  auto r = decode(std::span<const std::uint8_t>(buf_).subspan(pos_));
  switch (r.status) {
    case DecodeStatus::Ok:
      pos_ += r.consumed;
      return std::move(r.message);
    case DecodeStatus::Truncated:
      return std::nullopt;
    default:
      throw FrameError(r.status);
  }
}

ClassicalMessage make_message(const SessionStart& p) {
  ClassicalMessage m{MessageKind::SessionStart, {}};
  put_u64(m.payload, p.run_seed);
  put_u64(m.payload, p.sequence_seed);
  put_u32(m.payload, p.duration_s);
  put_u32(m.payload, p.config_crc);
  return m;
}

ClassicalMessage make_control_ask(const IntervalTag& p) { return tagged(MessageKind::ControlAsk, p.interval); }

ClassicalMessage make_ref_start(const IntervalTag& p) { return tagged(MessageKind::RefStart, p.interval); }

ClassicalMessage make_message(const ControlDone& p) {
  ClassicalMessage m = tagged(MessageKind::ControlDone, p.interval);
  put_u32(m.payload, p.iterations);
  m.payload.push_back(p.converged ? 1 : 0);
  return m;
}

ClassicalMessage make_message(const BasisReveal& p) {
  if (p.pulse_indices.size() != p.bases.size()) {
    throw std::invalid_argument("BasisReveal needs one basis per pulse index");
  }
  ClassicalMessage m = tagged(MessageKind::BasisReveal, p.interval);
  m.payload.push_back(p.last_chunk ? 1 : 0);
  put_u32(m.payload, static_cast<std::uint32_t>(p.pulse_indices.size()));
  // first index as a varint, then ascending gaps
  std::uint64_t prev = 0;
  for (std::size_t i = 0; i < p.pulse_indices.size(); ++i) {
    const std::uint64_t idx = p.pulse_indices[i];
    if (i > 0 && idx <= prev) {
      throw std::invalid_argument("BasisReveal pulse indices must be strictly ascending");
    }
    put_varint(m.payload, i == 0 ? idx : idx - prev);
    prev = idx;
  }
  std::vector<bool> bits(p.bases.size());
  std::transform(p.bases.begin(), p.bases.end(), bits.begin(), [](Basis b) { return b == Basis::QR; });
  pack_bits(m.payload, bits);
  return m;
}

ClassicalMessage make_message(const SiftResult& p) {
  if (p.keep.size() != p.alice_bits.size()) {
    throw std::invalid_argument("SiftResult needs one bit per keep flag");
  }
  ClassicalMessage m = tagged(MessageKind::SiftResult, p.interval);
  put_u32(m.payload, static_cast<std::uint32_t>(p.keep.size()));
  pack_bits(m.payload, p.keep);
  std::vector<bool> bits(p.alice_bits.size());
  std::transform(p.alice_bits.begin(), p.alice_bits.end(), bits.begin(), [](std::uint8_t b) { return b != 0; });
  pack_bits(m.payload, bits);
  return m;
}

ClassicalMessage make_message(const SessionEnd& p) { return tagged(MessageKind::SessionEnd, p.intervals); }

SessionStart parse_session_start(const ClassicalMessage& m) {
  expect_kind(m, MessageKind::SessionStart);
  Reader r(m.payload);
  SessionStart p;
  p.run_seed = r.u64();
  p.sequence_seed = r.u64();
  p.duration_s = r.u32();
  p.config_crc = r.u32();
  r.finish();
  return p;
}

IntervalTag parse_interval_tag(const ClassicalMessage& m) {
  if (m.kind != MessageKind::ControlAsk && m.kind != MessageKind::RefStart) {
    throw PayloadError("expected ControlAsk or RefStart, got " + std::string(to_string(m.kind)));
  }
  Reader r(m.payload);
  IntervalTag p{r.u32()};
  r.finish();
  return p;
}

ControlDone parse_control_done(const ClassicalMessage& m) {
  expect_kind(m, MessageKind::ControlDone);
  Reader r(m.payload);
  ControlDone p;
  p.interval = r.u32();
  p.iterations = r.u32();
  p.converged = r.u8() != 0;
  r.finish();
  return p;
}

BasisReveal parse_basis_reveal(const ClassicalMessage& m) {
  expect_kind(m, MessageKind::BasisReveal);
  Reader r(m.payload);
  BasisReveal p;
  p.interval = r.u32();
  p.last_chunk = r.u8() != 0;
  const std::uint32_t n = r.u32();
  if (n > m.payload.size() * 8) {
    throw PayloadError("BasisReveal count exceeds payload");
  }
  p.pulse_indices.reserve(n);
  std::uint64_t prev = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint64_t v = r.varint();
    if (i > 0 && v == 0) {
      throw PayloadError("BasisReveal pulse indices not ascending");
    }
    prev = i == 0 ? v : prev + v;
    p.pulse_indices.push_back(prev);
  }
  for (bool qr : r.bits(n)) {
    p.bases.push_back(qr ? Basis::QR : Basis::HV);
  }
  r.finish();
  return p;
}

SiftResult parse_sift_result(const ClassicalMessage& m) {
  expect_kind(m, MessageKind::SiftResult);
  Reader r(m.payload);
  SiftResult p;
  p.interval = r.u32();
  const std::uint32_t n = r.u32();
  if (n > m.payload.size() * 8) {
    throw PayloadError("SiftResult count exceeds payload");
  }
  p.keep = r.bits(n);
  for (bool b : r.bits(n)) {
    p.alice_bits.push_back(b ? 1 : 0);
  }
  r.finish();
  return p;
}

SessionEnd parse_session_end(const ClassicalMessage& m) {
  expect_kind(m, MessageKind::SessionEnd);
  Reader r(m.payload);
  SessionEnd p{r.u32()};
  r.finish();
  return p;
}

namespace {

struct Pipe {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<Bytes> frames;
  bool closed = false;
};

class LoopbackEndpoint final : public Endpoint {
 public:
  LoopbackEndpoint(std::shared_ptr<Pipe> out, std::shared_ptr<Pipe> in) : out_(std::move(out)), in_(std::move(in)) {}
  ~LoopbackEndpoint() override { close(); }

  void send(const ClassicalMessage& m) override {
    Bytes frame = encode(m);
    {
      std::lock_guard lock(out_->mu);
      if (out_->closed) {
        throw ConnectionLost("loopback peer closed");
      }
      out_->frames.push_back(std::move(frame));
    }
    out_->cv.notify_one();
  }

  ClassicalMessage receive() override {
    std::unique_lock lock(in_->mu);
    in_->cv.wait(lock, [&] { return !in_->frames.empty() || in_->closed; });
    if (in_->frames.empty()) {
      throw ConnectionLost("loopback peer closed");
    }
    Bytes frame = std::move(in_->frames.front());
    in_->frames.pop_front();
    lock.unlock();
    auto r = decode(frame);
    if (r.status != DecodeStatus::Ok) {
      throw FrameError(r.status);
    }
    return std::move(r.message);
  }

  void close() override {
    for (auto* p : {out_.get(), in_.get()}) {
      {
        std::lock_guard lock(p->mu);
        p->closed = true;
      }
      p->cv.notify_all();
    }
  }

 private:
  std::shared_ptr<Pipe> out_;
  std::shared_ptr<Pipe> in_;
};

}  // namespace

EndpointPair loopback_pair() {
  auto a_to_b = std::make_shared<Pipe>();
  auto b_to_a = std::make_shared<Pipe>();
  return {std::make_unique<LoopbackEndpoint>(a_to_b, b_to_a), std::make_unique<LoopbackEndpoint>(b_to_a, a_to_b)};
}

}  // namespace pqkd
