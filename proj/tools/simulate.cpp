// Command-line driver: single-process runs or one side of a two-process session.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pqkd/config.hpp"
#include "pqkd/report.hpp"
#include "pqkd/session.hpp"
#include "pqkd/tcp.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct RunConfig {
  std::string scenario = "fiber50";
  std::uint64_t seed = 1;
  std::uint32_t duration_s = 3600;
  std::string mode = "single";
  std::string peer;
  std::string output_dir = "out";
  std::vector<std::string> overrides;
  int timeout_s = 60;
};

pqkd::ScenarioConfig resolve(const RunConfig& run) {
  pqkd::ScenarioConfig cfg = pqkd::load_scenario(run.scenario);
  for (const std::string& kv : run.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw pqkd::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    pqkd::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

int finish_bob(const pqkd::SessionResult& result, const pqkd::ScenarioConfig& cfg, const RunConfig& run) {
  pqkd::write_artifacts(run.output_dir, result, cfg, run.seed, run.duration_s);
  const pqkd::Summary s = pqkd::summarize(result, cfg, run.seed, run.duration_s);
  std::printf("%s seed=%llu intervals=%u qber=%s duty=%s failed_cycles=%u -> %s\n", cfg.fiber.name.c_str(),
              static_cast<unsigned long long>(run.seed), s.cycles, pqkd::format_g6(s.pooled_qber).c_str(),
              pqkd::format_g6(s.duty).c_str(), s.failed_cycles, run.output_dir.c_str());
  if (static_cast<int>(result.failed_cycles) > cfg.failure_budget) {
    std::fprintf(stderr, "simulate: %u control cycles failed to converge (budget %d)\n", result.failed_cycles,
                 cfg.failure_budget);
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig run;
  CLI::App app{"Polarization-encoded fiber QKD simulator"};
  app.add_option("--scenario", run.scenario, "Preset (fiber50, fiber75, fiber100) or config file")->capture_default_str();
  app.add_option("--seed", run.seed, "Random seed")->capture_default_str();
  app.add_option("--duration", run.duration_s, "Simulated seconds")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--mode", run.mode, "single, alice or bob")
      ->check(CLI::IsMember({"single", "alice", "bob"}))
      ->capture_default_str();
  app.add_option("--peer", run.peer, "host:port; Bob listens on it, Alice connects to it");
  app.add_option("--out", run.output_dir, "Output directory")->capture_default_str();
  app.add_option("--set", run.overrides, "Override a config key (key=value); repeatable");
  app.add_option("--timeout", run.timeout_s, "Seconds to wait for the peer")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  pqkd::ScenarioConfig cfg;
  pqkd::PeerAddress peer;
  try {
    cfg = resolve(run);
    if (run.mode != "single") {
      if (run.peer.empty()) {
        throw pqkd::ConfigError("--mode " + run.mode + " requires --peer host:port");
      }
      peer = pqkd::parse_peer_address(run.peer);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "simulate: %s\n", e.what());
    return kExitConfig;
  }

  try {
    const std::chrono::milliseconds timeout{std::chrono::seconds{run.timeout_s}};
    if (run.mode == "single") {
      return finish_bob(pqkd::run_local_session(cfg, run.seed, run.duration_s), cfg, run);
    }
    if (run.mode == "bob") {
      pqkd::TcpListener listener(peer);
      auto ep = listener.accept(timeout);
      return finish_bob(pqkd::run_bob(*ep, cfg, run.seed, run.duration_s), cfg, run);
    }
    auto ep = pqkd::tcp_connect(peer, timeout);
    const pqkd::AliceReport rep = pqkd::run_alice(*ep, cfg, run.seed, run.duration_s);
    std::printf("alice intervals=%u revealed=%llu kept=%llu\n", rep.intervals,
                static_cast<unsigned long long>(rep.revealed), static_cast<unsigned long long>(rep.kept));
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "simulate: %s\n", e.what());
    return kExitRuntime;
  }
}
