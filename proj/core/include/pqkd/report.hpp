/**
 * @file report.hpp
 * @brief Run artifacts: trace.csv, qber.csv and summary.json.
 *
 * trace.csv  time_s,phase,s1_hat,s2_hat,v_x1,v_x2   (phase: control | qkd)
 * qber.csv   interval_index,sifted_bits,errors,qber
 *
 * Floats carry 6 significant digits; missing values are written as nan in CSV
 * and null in JSON.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pqkd/config.hpp"
#include "pqkd/session.hpp"

namespace pqkd {

struct Stats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than two values
  std::size_t n = 0;
};

/// NaN mean and std when `values` is empty.
Stats stats_of(std::span<const double> values);

struct Summary {
  std::uint64_t seed = 0;
  std::uint32_t duration_s = 0;
  std::string scenario;

  /// SOP each converged cycle handed back to QKD, initial acquisition excluded.
  Stats controlled_s1;
  Stats controlled_s2;
  /// Every usable control-phase sample, initial acquisition excluded.
  Stats control_samples_s1;
  Stats control_samples_s2;

  Stats interval_qber;
  double pooled_qber = 0.0;  // NaN when nothing was sifted
  std::uint64_t detected_pulses = 0;
  std::uint64_t sifted_bits = 0;
  std::uint64_t errors = 0;
  std::vector<std::uint32_t> intervals_above_threshold;

  std::uint64_t control_seconds = 0;
  std::uint64_t qkd_seconds = 0;
  double duty = 0.0;

  std::uint32_t cycles = 0;
  std::uint32_t converged_cycles = 0;
  std::uint32_t failed_cycles = 0;
  double median_iterations = 0.0;
};

Summary summarize(const SessionResult& r, const ScenarioConfig& cfg, std::uint64_t seed, std::uint32_t duration_s);

/// control rows / all rows.
double duty_from_trace(std::span<const TraceRow> rows);

/// printf("%.6g"), with "nan" for NaN.
std::string format_g6(double v);

void write_trace_csv(std::ostream& out, std::span<const TraceRow> rows);
void write_qber_csv(std::ostream& out, const SessionRecord& intervals);
void write_summary_json(std::ostream& out, const Summary& s, const ScenarioConfig& cfg);

/// Creates `dir` and writes the three artifacts into it. Throws std::runtime_error on I/O failure.
void write_artifacts(const std::filesystem::path& dir, const SessionResult& r, const ScenarioConfig& cfg,
                     std::uint64_t seed, std::uint32_t duration_s);

}  // namespace pqkd
