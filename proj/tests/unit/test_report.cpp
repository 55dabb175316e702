#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "pqkd/report.hpp"

using namespace pqkd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SessionResult tiny_result() {
  SessionResult r;
  IntervalRecord a;
  a.interval_index = 0;
  a.sifted_bits = 100;
  a.errors = 20;  // above the 0.11 threshold
  a.control_seconds = 3;
  a.control_iterations = 3;
  a.converged = true;
  a.s1_s2_trace = {{0.1, 0.5, 1}, {0.97, 0.01, 1}};
  IntervalRecord b;
  b.interval_index = 1;
  b.sifted_bits = 300;
  b.errors = 6;
  b.control_seconds = 2;
  b.control_iterations = 2;
  b.converged = true;
  b.s1_s2_trace = {{0.90, 0.02, 1}, {0.98, -0.03, 1}};
  IntervalRecord c;
  c.interval_index = 2;
  c.control_seconds = 5;
  c.control_iterations = 5;
  c.converged = false;
  c.s1_s2_trace = {{0.5, 0.5, 1}};
  r.intervals = {a, b, c};
  for (std::uint32_t t = 0; t < 10; ++t) {
    r.trace.push_back({t, t % 3 == 0, t % 3 == 0 ? 0.5 : kNaN, kNaN, 75.0, 74.5});
  }
  return r;
}

}  // namespace

TEST(FormatG6, Examples) {
  EXPECT_EQ(format_g6(0.0), "0");
  EXPECT_EQ(format_g6(1.0), "1");
  EXPECT_EQ(format_g6(0.123456789), "0.123457");
  EXPECT_EQ(format_g6(-0.5), "-0.5");
  EXPECT_EQ(format_g6(1234567.0), "1.23457e+06");
  EXPECT_EQ(format_g6(kNaN), "nan");
}

TEST(StatsOf, SampleStd) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const Stats s = stats_of(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(s.n, 4u);
  EXPECT_TRUE(std::isnan(stats_of({}).mean));
  EXPECT_EQ(stats_of(std::vector<double>{7.0}).std, 0.0);
}

TEST(Summarize, ControlledSopSkipsInitialAcquisitionAndFailures) {
  const ScenarioConfig cfg = preset("fiber50");
  const Summary s = summarize(tiny_result(), cfg, 9, 10);
  ASSERT_EQ(s.controlled_s1.n, 1u);  // interval 1 only
  EXPECT_DOUBLE_EQ(s.controlled_s1.mean, 0.98);
  EXPECT_DOUBLE_EQ(s.controlled_s2.mean, -0.03);
  EXPECT_EQ(s.control_samples_s1.n, 3u);
  EXPECT_NEAR(s.control_samples_s1.mean, (0.90 + 0.98 + 0.5) / 3.0, 1e-15);
}

TEST(Summarize, CountsAndQber) {
  const ScenarioConfig cfg = preset("fiber50");
  const Summary s = summarize(tiny_result(), cfg, 9, 10);
  EXPECT_EQ(s.sifted_bits, 400u);
  EXPECT_EQ(s.errors, 26u);
  EXPECT_DOUBLE_EQ(s.pooled_qber, 26.0 / 400.0);
  EXPECT_EQ(s.interval_qber.n, 2u);
  EXPECT_DOUBLE_EQ(s.interval_qber.mean, (0.2 + 0.02) / 2.0);
  EXPECT_EQ(s.intervals_above_threshold, (std::vector<std::uint32_t>{0}));
  EXPECT_EQ(s.cycles, 3u);
  EXPECT_EQ(s.converged_cycles, 2u);
  EXPECT_DOUBLE_EQ(s.median_iterations, 3.0);
}

TEST(Summarize, DutyEqualsTraceFraction) {
  const SessionResult r = tiny_result();
  const Summary s = summarize(r, preset("fiber50"), 9, 10);
  EXPECT_EQ(s.control_seconds, 4u);
  EXPECT_EQ(s.qkd_seconds, 6u);
  EXPECT_DOUBLE_EQ(s.duty, 0.4);
  EXPECT_DOUBLE_EQ(duty_from_trace(r.trace), 0.4);
  EXPECT_TRUE(std::isnan(duty_from_trace({})));
}

TEST(Summarize, EmptyRun) {
  const Summary s = summarize(SessionResult{}, preset("fiber50"), 0, 0);
  EXPECT_TRUE(std::isnan(s.pooled_qber));
  EXPECT_TRUE(std::isnan(s.median_iterations));
  EXPECT_EQ(s.controlled_s1.n, 0u);
}

TEST(TraceCsv, HeaderAndRows) {
  std::ostringstream out;
  const std::vector<TraceRow> rows{{0, true, 0.5, -0.25, 75.0, 74.0}, {1, false, kNaN, kNaN, 75.0, 74.0}};
  write_trace_csv(out, rows);
  EXPECT_EQ(out.str(),
            "time_s,phase,s1_hat,s2_hat,v_x1,v_x2\n"
            "0,control,0.5,-0.25,75,74\n"
            "1,qkd,nan,nan,75,74\n");
}

TEST(QberCsv, HeaderAndRows) {
  std::ostringstream out;
  write_qber_csv(out, tiny_result().intervals);
  EXPECT_EQ(out.str(),
            "interval_index,sifted_bits,errors,qber\n"
            "0,100,20,0.2\n"
            "1,300,6,0.02\n"
            "2,0,0,nan\n");
}

TEST(SummaryJson, FieldsAndNulls) {
  const ScenarioConfig cfg = preset("fiber75");
  SessionResult r = tiny_result();
  std::ostringstream out;
  write_summary_json(out, summarize(r, cfg, 9, 10), cfg);
  const auto j = nlohmann::json::parse(out.str());
  EXPECT_EQ(j["scenario"], "fiber75");
  EXPECT_EQ(j["seed"], 9);
  EXPECT_EQ(j["duration_s"], 10);
  EXPECT_DOUBLE_EQ(j["controlled_sop"]["s1"]["mean"].get<double>(), 0.98);
  EXPECT_EQ(j["controlled_sop"]["s1"]["n"], 1);
  EXPECT_TRUE(j["control_samples"]["s2"].contains("std"));
  EXPECT_DOUBLE_EQ(j["qber"]["pooled"].get<double>(), 0.065);
  EXPECT_EQ(j["qber"]["intervals_above_threshold"], nlohmann::json::array({0}));
  EXPECT_DOUBLE_EQ(j["duty"]["fraction"].get<double>(), 0.4);
  EXPECT_EQ(j["convergence"]["failed"], 0);
  EXPECT_EQ(j["config"]["name"], "fiber75");
  EXPECT_EQ(j["config"]["t2"], "0.08");

  std::ostringstream empty;
  write_summary_json(empty, summarize(SessionResult{}, cfg, 0, 0), cfg);
  const auto e = nlohmann::json::parse(empty.str());
  EXPECT_TRUE(e["qber"]["pooled"].is_null());
  EXPECT_TRUE(e["controlled_sop"]["s1"]["mean"].is_null());
}

TEST(WriteArtifacts, CreatesThreeFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "pqkd_report_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_artifacts(dir, tiny_result(), preset("fiber50"), 9, 10);
  for (const char* f : {"trace.csv", "qber.csv", "summary.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "trace.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "time_s,phase,s1_hat,s2_hat,v_x1,v_x2");
  std::filesystem::remove_all(dir.parent_path());
}
