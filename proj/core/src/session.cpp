#include "pqkd/session.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <string>

#include "pqkd/tcp.hpp"

namespace pqkd {

namespace {

constexpr std::size_t kRevealChunk = 65536;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::size_t state_slot(Basis b, std::uint8_t bit) { return (b == Basis::QR ? 2U : 0U) + bit; }

ClassicalMessage expect(Endpoint& ep, MessageKind kind) {
  ClassicalMessage m = ep.receive();
  if (m.kind != kind) {
    throw SessionMismatch("expected " + std::string(to_string(kind)) + ", got " + std::string(to_string(m.kind)));
  }
  return m;
}

}  // namespace

QuantumLink::QuantumLink(const ScenarioConfig& cfg, std::uint64_t seed, AliceSequence alice)
    : cfg_(cfg),
      alice_(alice),
      rng_(derive_seed(seed, "bob")),
      transmittance_(transmittance(cfg.fiber)),
      pulses_per_second_(static_cast<std::uint64_t>(cfg.source.rep_rate_hz)) {
  if (cfg_.initial_fiber == InitialFiber::Random) {
    channel_.birefringence = uniform_random_rotation(rng_);
  }
}

void QuantumLink::advance() {
  channel_ = evolve_drift(channel_, 1.0, cfg_.fiber.drift_angle_std, rng_);
  ++now_;
}

EstimatedSOP QuantumLink::reference_window(const ControllerState& st) {
  const StokesVector s = apply_channel(kH, channel_, actuator_rotation(st, cfg_.actuator));
  const SourceConfig src{cfg_.fiber.source_mean_photons_ref, cfg_.source.rep_rate_hz};
  ClickCounts c = accumulate_window(s, pulses_per_second_, src, transmittance_, cfg_.detector, rng_);
  c = apply_click_fluctuation(c, cfg_.click_fluctuation, rng_);
  advance();
  return estimate_stokes(c, pulses_per_second_);
}

std::vector<DetectionRecord> QuantumLink::qkd_second(const ControllerState& st) {
  const PoincareRotation net = compose(channel_.birefringence, actuator_rotation(st, cfg_.actuator));
  const SourceConfig src{cfg_.fiber.source_mean_photons_qkd, cfg_.source.rep_rate_hz};
  std::array<ClickProbabilities, 4> probs{};
  std::array<double, 4> p_any{};
  double p_max = 0.0;
  for (Basis b : {Basis::HV, Basis::QR}) {
    for (std::uint8_t bit : {0, 1}) {
      StokesVector sent = encoded_state(b, bit);
      if (b == Basis::HV && bit == 1 && cfg_.fiber.laser_offset_rad > 0.0) {
        // the V laser sits a few nm away from the H reference laser
        sent = rotate(sent, PoincareRotation(kAxisCircular, cfg_.fiber.laser_offset_rad));
      }
      const std::size_t k = state_slot(b, bit);
      probs[k] = click_probabilities(rotate(sent, net), src, transmittance_, cfg_.detector);
      p_any[k] = any_click_probability(probs[k]);
      p_max = std::max(p_max, p_any[k]);
    }
  }

  // Thinning: candidates at rate p_max, each kept with p_any(state) / p_max.
  std::vector<DetectionRecord> out;
  if (p_max > 0.0) {
    const std::uint64_t base = static_cast<std::uint64_t>(now_) * pulses_per_second_;
    std::geometric_distribution<std::uint64_t> gap(std::min(p_max, 1.0));
    for (std::uint64_t i = gap(rng_); i < pulses_per_second_; i += 1 + gap(rng_)) {
      const QubitRecord q = alice_.qubit(base + i);
      const std::size_t k = state_slot(q.basis, q.bit);
      if (uniform01(rng_) * p_max >= p_any[k]) {
        continue;
      }
      if (auto d = bob_decode(base + i, sample_pulse_given_click(probs[k], rng_))) {
        out.push_back(*d);
      }
    }
  }
  advance();
  return out;
}

std::uint64_t alice_sequence_seed(std::uint64_t run_seed) { return derive_seed(run_seed, "alice"); }

std::uint32_t config_fingerprint(const ScenarioConfig& cfg) {
  const std::string text = to_config_text(cfg);
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size())));
}

SessionResult run_bob(Endpoint& ep, const ScenarioConfig& cfg, std::uint64_t seed, std::uint32_t duration_s) {
  cfg.validate();
  const SessionStart start = parse_session_start(expect(ep, MessageKind::SessionStart));
  if (start.run_seed != seed || start.duration_s != duration_s) {
    throw SessionMismatch("peer runs a different seed or duration");
  }
  if (start.config_crc != config_fingerprint(cfg)) {
    throw SessionMismatch("peer runs a different configuration");
  }

  SessionResult result;
  QuantumLink link(cfg, seed, AliceSequence(start.sequence_seed));
  ControllerState st = ControllerState::initial(cfg.actuator, cfg.thresholds);
  const auto interval_s = static_cast<std::int64_t>(std::llround(cfg.fiber.control_interval_s));
  const std::uint64_t pulses = static_cast<std::uint64_t>(cfg.source.rep_rate_hz);

  std::uint32_t k = 0;
  while (link.now() < duration_s) {
    IntervalRecord rec;
    rec.interval_index = k;

    ep.send(make_control_ask({k}));
    if (parse_interval_tag(expect(ep, MessageKind::RefStart)).interval != k) {
      throw SessionMismatch("RefStart for the wrong interval");
    }
    const std::uint32_t control_start = link.now();
    const int budget = static_cast<int>(std::min<std::uint32_t>(static_cast<std::uint32_t>(cfg.max_iters),
                                                                 duration_s - control_start));
    const Plant plant = [&link](const ControllerState& s) { return link.reference_window(s); };
    const CycleResult cycle = run_feedback_cycle(plant, st, budget, cfg.actuator);
    st = cycle.state;
    for (std::size_t i = 0; i < cycle.trace.size(); ++i) {
      const ControlStep& step = cycle.trace[i];
      result.trace.push_back({control_start + static_cast<std::uint32_t>(i), true, step.valid ? step.s1_hat : kNaN,
                              step.valid ? step.s2_hat : kNaN, step.v_x1, step.v_x2});
      if (step.valid) {
        rec.s1_s2_trace.push_back({step.s1_hat, step.s2_hat, pulses});
      }
    }
    rec.control_seconds = static_cast<std::uint32_t>(cycle.iterations);
    rec.control_iterations = static_cast<std::uint32_t>(cycle.iterations);
    rec.converged = cycle.converged;
    if (!cycle.converged && cycle.iterations >= cfg.max_iters) {
      ++result.failed_cycles;
    }
    ep.send(make_message(ControlDone{k, rec.control_iterations, rec.converged}));

    const std::int64_t wanted = std::max<std::int64_t>(0, interval_s - cycle.iterations);
    const auto qkd_seconds =
        static_cast<std::uint32_t>(std::min<std::int64_t>(wanted, static_cast<std::int64_t>(duration_s) - link.now()));
    std::vector<DetectionRecord> singles;
    for (std::uint32_t s = 0; s < qkd_seconds; ++s) {
      result.trace.push_back({link.now(), false, kNaN, kNaN, st.v_x1, st.v_x2});
      for (const DetectionRecord& d : link.qkd_second(st)) {
        ++rec.detected_pulses;
        if (!d.double_click) {
          singles.push_back(d);
        }
      }
    }
    rec.qkd_seconds = qkd_seconds;

    std::size_t off = 0;
    do {
      const std::size_t n = std::min(kRevealChunk, singles.size() - off);
      BasisReveal reveal;
      reveal.interval = k;
      reveal.last_chunk = off + n == singles.size();
      for (std::size_t i = off; i < off + n; ++i) {
        reveal.pulse_indices.push_back(singles[i].pulse_index);
        reveal.bases.push_back(singles[i].decoded_basis);
      }
      ep.send(make_message(reveal));
      const SiftResult answer = parse_sift_result(expect(ep, MessageKind::SiftResult));
      if (answer.interval != k || answer.keep.size() != n) {
        throw SessionMismatch("SiftResult does not match the reveal");
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (answer.keep[i]) {
          ++rec.sifted_bits;
          rec.errors += answer.alice_bits[i] != singles[off + i].bit ? 1 : 0;
        }
      }
      off += n;
    } while (off < singles.size());

    result.intervals.push_back(std::move(rec));
    ++k;
  }

  ep.send(make_message(SessionEnd{k}));
  expect(ep, MessageKind::SessionEnd);
  ep.close();
  return result;
}

AliceReport run_alice(Endpoint& ep, const ScenarioConfig& cfg, std::uint64_t seed, std::uint32_t duration_s) {
  cfg.validate();
  const AliceSequence seq(alice_sequence_seed(seed));
  ep.send(make_message(SessionStart{seed, seq.seed(), duration_s, config_fingerprint(cfg)}));

  AliceReport report;
  bool sending_reference = false;
  while (true) {
    const ClassicalMessage m = ep.receive();
    switch (m.kind) {
      case MessageKind::ControlAsk: {
        const IntervalTag tag = parse_interval_tag(m);
        sending_reference = true;
        ep.send(make_ref_start(tag));
        break;
      }
      case MessageKind::ControlDone: {
        if (!sending_reference) {
          throw SessionMismatch("ControlDone outside a control cycle");
        }
        sending_reference = false;
        report.intervals = parse_control_done(m).interval + 1;
        break;
      }
      case MessageKind::BasisReveal: {
        if (sending_reference) {
          throw SessionMismatch("BasisReveal during a control cycle");
        }
        const BasisReveal reveal = parse_basis_reveal(m);
        SiftResult answer;
        answer.interval = reveal.interval;
        for (std::size_t i = 0; i < reveal.pulse_indices.size(); ++i) {
          const QubitRecord q = seq.qubit(reveal.pulse_indices[i]);
          const bool keep = q.basis == reveal.bases[i] && (!cfg.key_hv_only || q.basis == Basis::HV);
          answer.keep.push_back(keep);
          answer.alice_bits.push_back(keep ? q.bit : 0);
          report.kept += keep ? 1 : 0;
        }
        report.revealed += reveal.pulse_indices.size();
        ep.send(make_message(answer));
        break;
      }
      case MessageKind::SessionEnd:
        ep.send(make_message(SessionEnd{report.intervals}));
        return report;
      default:
        throw SessionMismatch("unexpected " + std::string(to_string(m.kind)) + " at Alice");
    }
  }
}

SessionResult run_local_session(const ScenarioConfig& cfg, std::uint64_t seed, std::uint32_t duration_s,
                                LocalTransport transport) {
  EndpointPair pair = transport == LocalTransport::Loopback ? loopback_pair() : socket_pair();
  Endpoint& bob_end = *pair.first;
  Endpoint& alice_end = *pair.second;
  auto alice = std::async(std::launch::async, [&] {
    try {
      return run_alice(alice_end, cfg, seed, duration_s);
    } catch (...) {
      alice_end.close();  // unblocks Bob
      throw;
    }
  });
  SessionResult result;
  try {
    result = run_bob(bob_end, cfg, seed, duration_s);
  } catch (...) {
    bob_end.close();
    try {
      alice.get();
    } catch (...) {
    }
    throw;
  }
  alice.get();
  return result;
}

}  // namespace pqkd
