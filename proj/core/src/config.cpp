#include "pqkd/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace pqkd {

namespace {

struct Field {
  const char* key;
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, std::string_view)> set;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
  return std::string(buf, end);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

int parse_int(std::string_view key, std::string_view v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") {
    return true;
  }
  if (v == "false" || v == "0" || v == "no") {
    return false;
  }
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

template <typename Get>
Field number(const char* key, Get ref) {
  return {key, [ref](const ScenarioConfig& c) { return fmt_double(ref(c)); },
          [ref, key](ScenarioConfig& c, std::string_view v) { ref(c) = parse_double(key, v); }};
}

template <typename Get>
Field integer(const char* key, Get ref) {
  return {key, [ref](const ScenarioConfig& c) { return std::to_string(ref(c)); },
          [ref, key](ScenarioConfig& c, std::string_view v) { ref(c) = parse_int(key, v); }};
}

template <typename Get>
Field boolean(const char* key, Get ref) {
  return {key, [ref](const ScenarioConfig& c) { return std::string(ref(c) ? "true" : "false"); },
          [ref, key](ScenarioConfig& c, std::string_view v) { ref(c) = parse_bool(key, v); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"name", [](const ScenarioConfig& c) { return c.fiber.name; },
                 [](ScenarioConfig& c, std::string_view v) { c.fiber.name = std::string(v); }});
    f.push_back({"length_km", [](const ScenarioConfig& c) { return fmt_double(c.fiber.length_km); },
                 [](ScenarioConfig& c, std::string_view v) {
                   c.fiber.length_km = parse_double("length_km", v);
                   if (!c.drift_explicit) {
                     c.fiber.drift_angle_std = default_drift_angle_std(c.fiber.length_km);
                   }
                 }});
    f.push_back(number("loss_db_per_km", [](auto& c) -> auto& { return c.fiber.loss_db_per_km; }));
    f.push_back(number("element_loss_db", [](auto& c) -> auto& { return c.fiber.element_loss_db; }));
    f.push_back({"drift_angle_std", [](const ScenarioConfig& c) { return fmt_double(c.fiber.drift_angle_std); },
                 [](ScenarioConfig& c, std::string_view v) {
                   c.fiber.drift_angle_std = parse_double("drift_angle_std", v);
                   c.drift_explicit = true;
                 }});
    f.push_back(number("control_interval_s", [](auto& c) -> auto& { return c.fiber.control_interval_s; }));
    f.push_back(number("source_mean_photons_qkd",
                       [](auto& c) -> auto& { return c.fiber.source_mean_photons_qkd; }));
    f.push_back(number("source_mean_photons_ref",
                       [](auto& c) -> auto& { return c.fiber.source_mean_photons_ref; }));
    f.push_back(number("laser_offset_rad", [](auto& c) -> auto& { return c.fiber.laser_offset_rad; }));
    f.push_back({"initial_fiber",
                 [](const ScenarioConfig& c) {
                   return std::string(c.initial_fiber == InitialFiber::Random ? "random" : "identity");
                 },
                 [](ScenarioConfig& c, std::string_view v) {
                   if (v == "random") {
                     c.initial_fiber = InitialFiber::Random;
                   } else if (v == "identity") {
                     c.initial_fiber = InitialFiber::Identity;
                   } else {
                     throw ConfigError("initial_fiber: expected random or identity, got '" + std::string(v) + "'");
                   }
                 }});
    f.push_back(number("rep_rate_hz", [](auto& c) -> auto& { return c.source.rep_rate_hz; }));
    f.push_back(number("efficiency", [](auto& c) -> auto& { return c.detector.efficiency; }));
    f.push_back(number("dark_prob_d0_v",
                       [](auto& c) -> auto& { return c.detector.dark_prob_per_gate[index_of(Detector::D0_V)]; }));
    f.push_back(number("dark_prob_d1_h",
                       [](auto& c) -> auto& { return c.detector.dark_prob_per_gate[index_of(Detector::D1_H)]; }));
    f.push_back(number("dark_prob_d2_q",
                       [](auto& c) -> auto& { return c.detector.dark_prob_per_gate[index_of(Detector::D2_Q)]; }));
    f.push_back(number("dark_prob_d3_r",
                       [](auto& c) -> auto& { return c.detector.dark_prob_per_gate[index_of(Detector::D3_R)]; }));
    f.push_back(number("pbs_extinction", [](auto& c) -> auto& { return c.detector.pbs_extinction; }));
    f.push_back(number("monitor_split", [](auto& c) -> auto& { return c.detector.monitor_split; }));
    f.push_back(number("v_2pi_x1", [](auto& c) -> auto& { return c.actuator.v_2pi_x1; }));
    f.push_back(number("v_2pi_x2", [](auto& c) -> auto& { return c.actuator.v_2pi_x2; }));
    f.push_back(number("v_min", [](auto& c) -> auto& { return c.actuator.v_min; }));
    f.push_back(number("v_max", [](auto& c) -> auto& { return c.actuator.v_max; }));
    f.push_back(number("gain_x1", [](auto& c) -> auto& { return c.actuator.gain_x1; }));
    f.push_back(number("gain_x2", [](auto& c) -> auto& { return c.actuator.gain_x2; }));
    f.push_back(number("probe_step_v", [](auto& c) -> auto& { return c.actuator.probe_step_v; }));
    f.push_back(number("slope_noise_floor", [](auto& c) -> auto& { return c.actuator.slope_noise_floor; }));
    f.push_back(integer("verify_samples", [](auto& c) -> auto& { return c.actuator.verify_samples; }));
    f.push_back(number("initial_v_x1", [](auto& c) -> auto& { return c.actuator.initial_v_x1; }));
    f.push_back(number("initial_v_x2", [](auto& c) -> auto& { return c.actuator.initial_v_x2; }));
    f.push_back(number("t1", [](auto& c) -> auto& { return c.thresholds.t1; }));
    f.push_back(number("t2", [](auto& c) -> auto& { return c.thresholds.t2; }));
    f.push_back(number("t3", [](auto& c) -> auto& { return c.thresholds.t3; }));
    f.push_back(integer("max_iters", [](auto& c) -> auto& { return c.max_iters; }));
    f.push_back(number("click_fluctuation", [](auto& c) -> auto& { return c.click_fluctuation; }));
    f.push_back(number("qber_threshold", [](auto& c) -> auto& { return c.qber_threshold; }));
    f.push_back(integer("failure_budget", [](auto& c) -> auto& { return c.failure_budget; }));
    f.push_back(boolean("key_hv_only", [](auto& c) -> auto& { return c.key_hv_only; }));
    return f;
  }();
  return table;
}

ScenarioConfig make_preset(const char* name, double length_km, double interval_s, Thresholds th, double mu_ref) {
  ScenarioConfig c;
  c.fiber.name = name;
  c.fiber.length_km = length_km;
  c.fiber.drift_angle_std = default_drift_angle_std(length_km);
  c.fiber.control_interval_s = interval_s;
  c.fiber.source_mean_photons_qkd = 0.1;
  c.fiber.source_mean_photons_ref = mu_ref;
  c.thresholds = th;
  return c;
}

}  // namespace

void ScenarioConfig::validate() const {
  try {
    fiber.validate();
    detector.validate();
    actuator.validate();
    thresholds.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(source.rep_rate_hz >= 1.0) || source.rep_rate_hz != static_cast<double>(static_cast<std::uint64_t>(source.rep_rate_hz))) {
    throw ConfigError("rep_rate_hz must be a positive whole number of pulses per second");
  }
  if (max_iters < 1) {
    throw ConfigError("max_iters must be at least 1");
  }
  if (click_fluctuation < 0 || !(qber_threshold >= 0 && qber_threshold <= 1)) {
    throw ConfigError("click_fluctuation must be nonnegative and qber_threshold within [0, 1]");
  }
  if (failure_budget < 0) {
    throw ConfigError("failure_budget must be nonnegative");
  }
  const double v0x1 = actuator.initial_v_x1, v0x2 = actuator.initial_v_x2;
  if (v0x1 < actuator.v_min || v0x1 > actuator.v_max || v0x2 < actuator.v_min || v0x2 > actuator.v_max) {
    throw ConfigError("initial voltages must lie in [v_min, v_max]");
  }
}

ParseError::ParseError(std::string origin, int line, const std::string& message)
    : ConfigError(origin + ":" + std::to_string(line) + ": " + message), line_(line) {}

std::vector<std::string> preset_names() { return {"fiber50", "fiber75", "fiber100"}; }

ScenarioConfig preset(std::string_view name) {
  if (name == "fiber50") {
    return make_preset("fiber50", 50.0, 282.0, {0.96, 0.05, 0.94}, 0.5);
  }
  if (name == "fiber75") {
    return make_preset("fiber75", 75.0, 186.0, {0.95, 0.08, 0.93}, 1.6);
  }
  if (name == "fiber100") {
    return make_preset("fiber100", 100.0, 96.0, {0.95, 0.08, 0.93}, 5.1);
  }
  throw UnknownPresetError(std::string(name));
}

void apply_setting(ScenarioConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError("unknown key: " + std::string(key));
}

ScenarioConfig parse_config(std::string_view text, const std::string& origin) {
  ScenarioConfig cfg;
  bool any_setting = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(origin, line_no, "expected key = value");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError(origin, line_no, "missing key");
    }
    try {
      if (key == "preset") {
        if (any_setting) {
          throw ConfigError("preset must come before other settings");
        }
        cfg = preset(value);
      } else {
        apply_setting(cfg, key, value);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      throw ParseError(origin, line_no, e.what());
    }
    any_setting = true;
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
  for (const auto& n : preset_names()) {
    if (name_or_path == n) {
      return preset(n);
    }
  }
  std::ifstream in(name_or_path);
  if (!in) {
    if (name_or_path.find('/') == std::string::npos && name_or_path.find('.') == std::string::npos) {
      throw UnknownPresetError(name_or_path);
    }
    throw ConfigError("cannot open config file: " + name_or_path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), name_or_path);
}

std::vector<std::pair<std::string, std::string>> config_entries(const ScenarioConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) {
    out.emplace_back(f.key, f.get(cfg));
  }
  return out;
}

std::string to_config_text(const ScenarioConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) {
    out += k + " = " + v + "\n";
  }
  return out;
}

}  // namespace pqkd
