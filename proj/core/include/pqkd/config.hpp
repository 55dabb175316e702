/**
 * @file config.hpp
 * @brief Scenario presets and the flat key = value configuration format.
 *
 * A config file is a list of `key = value` lines. `#` starts a comment. An
 * optional first setting `preset = fiber50` selects the base the remaining
 * keys override. Keys are the field names printed by to_config_text().
 *
 * drift_angle_std follows length_km (sqrt scaling) unless set explicitly.
 */

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pqkd/channel.hpp"
#include "pqkd/controller.hpp"
#include "pqkd/detection.hpp"

namespace pqkd {

enum class InitialFiber : std::uint8_t { Random, Identity };

struct ScenarioConfig {
  FiberScenario fiber;
  SourceConfig source;  // mean_photons_per_pulse is unused; see fiber.source_mean_photons_*
  DetectorConfig detector;
  ActuatorConfig actuator;
  Thresholds thresholds;
  int max_iters = 120;
  /// Extra multiplicative noise on reference-window counts, on top of shot noise.
  double click_fluctuation = 0.0;
  /// Intervals above this QBER are flagged in the report.
  double qber_threshold = 0.11;
  /// Non-converged control cycles tolerated before the run counts as failed.
  int failure_budget = 10;
  InitialFiber initial_fiber = InitialFiber::Random;
  /// Key bits come from the HV arm only; QR detections are still simulated and sifted out.
  bool key_hv_only = true;
  bool drift_explicit = false;

  /// Throws ConfigError.
  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownPresetError : public ConfigError {
 public:
  explicit UnknownPresetError(const std::string& name) : ConfigError("unknown preset: " + name) {}
};

class ParseError : public ConfigError {
 public:
  ParseError(std::string origin, int line, const std::string& message);
  [[nodiscard]] int line() const { return line_; }

 private:
  int line_;
};

std::vector<std::string> preset_names();

/// fiber50, fiber75 or fiber100. Throws UnknownPresetError.
ScenarioConfig preset(std::string_view name);

/// Sets one field from text. Throws ConfigError on an unknown key or bad value.
void apply_setting(ScenarioConfig& cfg, std::string_view key, std::string_view value);

/// Parses a config document. Throws ParseError naming origin and line.
/// The result is not validated, so further overrides may still be applied.
ScenarioConfig parse_config(std::string_view text, const std::string& origin = "<config>");

/// A preset name, or else a path to a config file.
ScenarioConfig load_scenario(const std::string& name_or_path);

/// Canonical `key = value` dump. parse_config(to_config_text(c)) reproduces c.
std::string to_config_text(const ScenarioConfig& cfg);

/// Key/value pairs in the same order as to_config_text.
std::vector<std::pair<std::string, std::string>> config_entries(const ScenarioConfig& cfg);

}  // namespace pqkd
