#include "pqkd/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>

#include "json.hpp"

namespace pqkd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::ordered_json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json to_json(const Stats& s) {
  return {{"mean", number_or_null(s.mean)}, {"std", number_or_null(s.std)}, {"n", s.n}};
}

std::ofstream open_for_write(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + p.string());
  }
  return out;
}

}  // namespace

Stats stats_of(std::span<const double> values) {
  Stats s;
  s.n = values.size();
  if (values.empty()) {
    s.mean = kNaN;
    s.std = kNaN;
    return s;
  }
  double sum = 0.0;
  for (double v : values) {
    sum += v;
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - s.mean) * (v - s.mean);
    }
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

double duty_from_trace(std::span<const TraceRow> rows) {
  if (rows.empty()) {
    return kNaN;
  }
  const auto control = std::count_if(rows.begin(), rows.end(), [](const TraceRow& r) { return r.control; });
  return static_cast<double>(control) / static_cast<double>(rows.size());
}

Summary summarize(const SessionResult& r, const ScenarioConfig& cfg, std::uint64_t seed, std::uint32_t duration_s) {
  Summary s;
  s.seed = seed;
  s.duration_s = duration_s;
  s.scenario = cfg.fiber.name;
  s.failed_cycles = r.failed_cycles;

  std::vector<double> d1, d2, a1, a2, q;
  std::vector<double> iterations;
  for (const IntervalRecord& rec : r.intervals) {
    ++s.cycles;
    s.converged_cycles += rec.converged ? 1 : 0;
    iterations.push_back(rec.control_iterations);
    s.detected_pulses += rec.detected_pulses;
    s.sifted_bits += rec.sifted_bits;
    s.errors += rec.errors;
    if (auto qb = rec.qber()) {
      q.push_back(*qb);
      if (*qb > cfg.qber_threshold) {
        s.intervals_above_threshold.push_back(rec.interval_index);
      }
    }
    if (rec.interval_index == 0) {
      continue;
    }
    if (rec.converged && !rec.s1_s2_trace.empty()) {
      d1.push_back(rec.s1_s2_trace.back().s1_hat);
      d2.push_back(rec.s1_s2_trace.back().s2_hat);
    }
    for (const EstimatedSOP& e : rec.s1_s2_trace) {
      a1.push_back(e.s1_hat);
      a2.push_back(e.s2_hat);
    }
  }
  s.controlled_s1 = stats_of(d1);
  s.controlled_s2 = stats_of(d2);
  s.control_samples_s1 = stats_of(a1);
  s.control_samples_s2 = stats_of(a2);
  s.interval_qber = stats_of(q);
  s.pooled_qber = s.sifted_bits > 0 ? static_cast<double>(s.errors) / static_cast<double>(s.sifted_bits) : kNaN;

  for (const TraceRow& row : r.trace) {
    (row.control ? s.control_seconds : s.qkd_seconds) += 1;
  }
  s.duty = duty_from_trace(r.trace);

  if (!iterations.empty()) {
    std::sort(iterations.begin(), iterations.end());
    const std::size_t m = iterations.size() / 2;
    s.median_iterations = iterations.size() % 2 == 1 ? iterations[m] : (iterations[m - 1] + iterations[m]) / 2.0;
  } else {
    s.median_iterations = kNaN;
  }
  return s;
}

std::string format_g6(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows) {
  out << "time_s,phase,s1_hat,s2_hat,v_x1,v_x2\n";
  for (const TraceRow& r : rows) {
    out << r.time_s << ',' << (r.control ? "control" : "qkd") << ',' << format_g6(r.s1_hat) << ','
        << format_g6(r.s2_hat) << ',' << format_g6(r.v_x1) << ',' << format_g6(r.v_x2) << '\n';
  }
}

void write_qber_csv(std::ostream& out, const SessionRecord& intervals) {
  out << "interval_index,sifted_bits,errors,qber\n";
  for (const IntervalRecord& rec : intervals) {
    out << rec.interval_index << ',' << rec.sifted_bits << ',' << rec.errors << ','
        << format_g6(rec.qber().value_or(kNaN)) << '\n';
  }
}

void write_summary_json(std::ostream& out, const Summary& s, const ScenarioConfig& cfg) {
  nlohmann::ordered_json j;
  j["scenario"] = s.scenario;
  j["seed"] = s.seed;
  j["duration_s"] = s.duration_s;
  j["controlled_sop"] = {{"s1", to_json(s.controlled_s1)}, {"s2", to_json(s.controlled_s2)}};
  j["control_samples"] = {{"s1", to_json(s.control_samples_s1)}, {"s2", to_json(s.control_samples_s2)}};
  j["qber"] = {{"pooled", number_or_null(s.pooled_qber)},
               {"interval_mean", number_or_null(s.interval_qber.mean)},
               {"interval_std", number_or_null(s.interval_qber.std)},
               {"intervals_with_bits", s.interval_qber.n},
               {"threshold", cfg.qber_threshold},
               {"intervals_above_threshold", s.intervals_above_threshold}};
  j["counts"] = {{"detected_pulses", s.detected_pulses}, {"sifted_bits", s.sifted_bits}, {"errors", s.errors}};
  j["duty"] = {{"control_seconds", s.control_seconds},
               {"qkd_seconds", s.qkd_seconds},
               {"fraction", number_or_null(s.duty)}};
  j["convergence"] = {{"cycles", s.cycles},
                      {"converged", s.converged_cycles},
                      {"failed", s.failed_cycles},
                      {"failure_budget", cfg.failure_budget},
                      {"median_iterations", number_or_null(s.median_iterations)}};
  nlohmann::ordered_json c = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_entries(cfg)) {
    c[k] = v;
  }
  j["config"] = c;
  out << j.dump(2) << '\n';
}

void write_artifacts(const std::filesystem::path& dir, const SessionResult& r, const ScenarioConfig& cfg,
                     std::uint64_t seed, std::uint32_t duration_s) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_for_write(dir / "trace.csv");
    write_trace_csv(out, r.trace);
  }
  {
    auto out = open_for_write(dir / "qber.csv");
    write_qber_csv(out, r.intervals);
  }
  {
    auto out = open_for_write(dir / "summary.json");
    write_summary_json(out, summarize(r, cfg, seed, duration_s), cfg);
  }
}

}  // namespace pqkd
