#include <benchmark/benchmark.h>

#include "pqkd/config.hpp"
#include "pqkd/session.hpp"
#include "pqkd/transport.hpp"

using namespace pqkd;

namespace {

void BM_AccumulateWindow(benchmark::State& state) {
  const ScenarioConfig c = preset("fiber50");
  const SourceConfig src{c.fiber.source_mean_photons_ref, c.source.rep_rate_hz};
  const double t = transmittance(c.fiber);
  const StokesVector s = stokes_from_angles(0.4, 0.2);
  Rng rng(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(accumulate_window(s, 1000000, src, t, c.detector, rng));
  }
}
BENCHMARK(BM_AccumulateWindow);

void BM_AccumulateWindowPerPulse(benchmark::State& state) {
  const ScenarioConfig c = preset("fiber50");
  const SourceConfig src{c.fiber.source_mean_photons_ref, c.source.rep_rate_hz};
  const double t = transmittance(c.fiber);
  const StokesVector s = stokes_from_angles(0.4, 0.2);
  Rng rng(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(accumulate_window_per_pulse(s, 1000000, src, t, c.detector, rng));
  }
}
BENCHMARK(BM_AccumulateWindowPerPulse)->Unit(benchmark::kMillisecond);

BasisReveal sample_reveal(std::size_t n) {
  BasisReveal r;
  r.interval = 3;
  for (std::size_t i = 0; i < n; ++i) {
    r.pulse_indices.push_back(1000 + 37 * i);
    r.bases.push_back(i % 3 == 0 ? Basis::QR : Basis::HV);
  }
  return r;
}

void BM_EncodeBasisReveal(benchmark::State& state) {
  const BasisReveal r = sample_reveal(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(encode(make_message(r)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeBasisReveal)->Arg(1000)->Arg(10000);

void BM_DecodeBasisReveal(benchmark::State& state) {
  const Bytes frame = encode(make_message(sample_reveal(static_cast<std::size_t>(state.range(0)))));
  for (auto _ : state) {
    const DecodeResult d = decode(frame);
    benchmark::DoNotOptimize(parse_basis_reveal(d.message));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DecodeBasisReveal)->Arg(1000)->Arg(10000);

void BM_QkdSecond(benchmark::State& state) {
  const ScenarioConfig c = preset("fiber50");
  QuantumLink link(c, 1, AliceSequence(alice_sequence_seed(1)));
  const ControllerState st = ControllerState::initial(c.actuator, c.thresholds);
  for (auto _ : state) {
    benchmark::DoNotOptimize(link.qkd_second(st));
  }
}
BENCHMARK(BM_QkdSecond)->Unit(benchmark::kMillisecond);

void BM_Session(benchmark::State& state) {
  const ScenarioConfig c = preset("fiber100");
  const auto transport = state.range(0) == 0 ? LocalTransport::Loopback : LocalTransport::Socket;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_local_session(c, 1, 600, transport));
  }
}
BENCHMARK(BM_Session)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
