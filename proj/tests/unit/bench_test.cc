// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "serve_emu/bench/arrivals.h"
#include "serve_emu/bench/compare.h"
#include "serve_emu/bench/metrics.h"
#include "serve_emu/bench/report.h"
#include "serve_emu/bench/workload.h"

namespace serve_emu {
namespace {

struct GapStats {
  double mean;
  double cv;
};

GapStats gap_stats(const std::vector<double>& g) {
  double sum = 0, sq = 0;
  for (double x : g) sum += x;
  const double mean = sum / g.size();
  for (double x : g) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / (g.size() - 1)) / mean};
}

WorkloadSpec spec_of(uint32_t n, double rate, double gamma, uint64_t seed) {
  WorkloadSpec s;
  s.entries = {{10, 5}, {20, 7}};
  s.num_prompts = n;
  s.request_rate = rate;
  s.burstiness = gamma;
  s.seed = seed;
  return s;
}

RequestRecord record(double send, std::vector<double> tokens, double finish) {
  RequestRecord r;
  r.send_time = send;
  r.token_times = std::move(tokens);
  r.first_token_time = r.token_times.front();
  r.finish_time = finish;
  r.prompt_tokens = 10;
  r.output_tokens = static_cast<uint32_t>(r.token_times.size());
  return r;
}

TEST(ArrivalsTest, PoissonMeanGap) {
  std::mt19937_64 rng(1);
  const auto s = gap_stats(inter_arrival_gaps(10'000, 2.0, 1.0, rng));
  EXPECT_NEAR(s.mean, 0.5, 0.5 * 0.03);
  EXPECT_NEAR(s.cv, 1.0, 0.05);
}

TEST(ArrivalsTest, BurstyCoefficientOfVariation) {
  std::mt19937_64 rng(2);
  const auto s = gap_stats(inter_arrival_gaps(10'000, 4.0, 0.25, rng));
  EXPECT_NEAR(s.cv, 2.0, 2.0 * 0.05);
  EXPECT_NEAR(s.mean, 0.25, 0.25 * 0.05);
}

TEST(ArrivalsTest, OffsetsAreCumulativeAndOpenLoop) {
  const auto spec = spec_of(50, 8.0, 1.0, 9);
  std::mt19937_64 a(spec.seed), b(spec.seed);
  const auto x = generate_arrivals(spec, a);
  ASSERT_EQ(x.size(), 50u);
  EXPECT_EQ(x[0], 0.0);
  for (size_t i = 1; i < x.size(); ++i) EXPECT_GE(x[i], x[i - 1]);
  EXPECT_EQ(x, generate_arrivals(spec, b));
}

TEST(ArrivalsTest, InvalidSpec) {
  auto spec = spec_of(5, 0.0, 1.0, 1);
  std::mt19937_64 rng(1);
  EXPECT_THROW(generate_arrivals(spec, rng), std::invalid_argument);
  spec = spec_of(5, 1.0, 1.0, 1);
  spec.entries.clear();
  EXPECT_THROW(generate_arrivals(spec, rng), std::invalid_argument);
}

TEST(MetricsTest, HandComputedRequest) {
  const std::vector<RequestRecord> recs{record(0.0, {1.0, 1.5, 2.0}, 2.0)};
  const auto m = compute_metrics(recs);
  ASSERT_EQ(m.per_request.size(), 1u);
  EXPECT_DOUBLE_EQ(m.per_request[0].ttft, 1.0);
  EXPECT_DOUBLE_EQ(m.per_request[0].e2e, 2.0);
  EXPECT_DOUBLE_EQ(*m.per_request[0].tpot, 0.5);
  EXPECT_EQ(m.per_request[0].itl, (std::vector<double>{0.5, 0.5}));
}

TEST(MetricsTest, SingleTokenRequestSkipsTpotAndItl) {
  const std::vector<RequestRecord> recs{record(0.0, {0.4}, 0.4),
                                        record(1.0, {1.5, 2.0}, 2.0)};
  const auto m = compute_metrics(recs);
  EXPECT_FALSE(m.per_request[0].tpot.has_value());
  EXPECT_TRUE(m.per_request[0].itl.empty());
  EXPECT_EQ(m.ttft.count, 2u);
  EXPECT_EQ(m.e2e.count, 2u);
  EXPECT_EQ(m.tpot.count, 1u);
  EXPECT_EQ(m.itl.count, 1u);
  EXPECT_EQ(m.total_output_tokens, 3u);
}

TEST(MetricsTest, ThroughputOverWindow) {
  std::vector<RequestRecord> recs;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> t(100);
    for (int k = 0; k < 100; ++k) t[k] = 1.0 + i + k * 0.05;
    recs.push_back(record(i, t, i == 2 ? 10.0 : t.back()));
  }
  EXPECT_DOUBLE_EQ(compute_metrics(recs).tps, 30.0);
}

TEST(MetricsTest, ValidationErrors) {
  auto r = record(1.0, {0.5, 2.0}, 2.0);  // first token before send
  EXPECT_THROW(compute_metrics(std::vector{r}), MetricsError);
  r = record(0.0, {1.0, 0.5}, 2.0);  // decreasing
  EXPECT_THROW(compute_metrics(std::vector{r}), MetricsError);
  r = record(0.0, {1.0, 1.5}, 2.0);
  r.output_tokens = 3;
  EXPECT_THROW(compute_metrics(std::vector{r}), MetricsError);
  r = record(0.0, {1.0, 1.5}, 1.2);  // finish before last token
  EXPECT_THROW(compute_metrics(std::vector{r}), MetricsError);
}

TEST(MetricsTest, PercentilesInterpolateLinearly) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
  EXPECT_DOUBLE_EQ(percentile({5}, 99), 5.0);
  EXPECT_DOUBLE_EQ(percentile({0, 10}, 99), 9.9);
}

std::vector<RequestRecord> random_records(std::mt19937_64& rng, size_t n) {
  std::uniform_real_distribution<double> u(0.001, 0.05);
  std::uniform_int_distribution<int> len(1, 40);
  std::vector<RequestRecord> out;
  double send = 0;
  for (size_t i = 0; i < n; ++i) {
    send += u(rng) * 10;
    std::vector<double> t{send + u(rng) * 5};
    const int k = len(rng);
    for (int j = 1; j < k; ++j) t.push_back(t.back() + u(rng));
    out.push_back(record(send, t, t.back()));
  }
  return out;
}

TEST(MetricsPropertyTest, RecomputableAndTpotMatchesItl) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto recs = random_records(rng, 1 + trial * 3);
    const auto m = compute_metrics(recs);
    std::vector<double> ttft, e2e, tpot, itl;
    for (const auto& r : m.per_request) {
      ttft.push_back(r.ttft);
      e2e.push_back(r.e2e);
      if (r.tpot) {
        tpot.push_back(*r.tpot);
        double s = 0;
        for (double g : r.itl) s += g;
        const double mean_itl = s / r.itl.size();
        EXPECT_NEAR(*r.tpot, mean_itl, std::abs(mean_itl) * 1e-12);
      }
      itl.insert(itl.end(), r.itl.begin(), r.itl.end());
    }
    const auto a = aggregate(ttft);
    EXPECT_EQ(a.mean, m.ttft.mean);
    EXPECT_EQ(a.median, m.ttft.median);
    EXPECT_EQ(a.p99, m.ttft.p99);
    EXPECT_EQ(aggregate(e2e).mean, m.e2e.mean);
    if (!tpot.empty()) {
      EXPECT_EQ(aggregate(tpot).p99, m.tpot.p99);
    }
    if (!itl.empty()) {
      EXPECT_EQ(aggregate(itl).median, m.itl.median);
    }
  }
}

TEST(CompareTest, RelativeError) {
  EXPECT_NEAR(*relative_error(2.0, 2.1), 0.05, 1e-12);
  EXPECT_EQ(*relative_error(3.0, 3.0), 0.0);
  EXPECT_FALSE(relative_error(0.0, 1.0).has_value());
}

TEST(CompareTest, IdentityAndUndefinedMarker) {
  std::mt19937_64 rng(3);
  const auto m = compute_metrics(random_records(rng, 40));
  const auto c = compare_runs(m, m);
  for (const auto& row : c.rows) {
    ASSERT_TRUE(row.error.has_value()) << row.metric;
    EXPECT_EQ(*row.error, 0.0);
  }
  RunMetrics zero = m;
  zero.ttft.mean = 0.0;
  const std::vector<RunComparison> cmp{compare_runs(zero, m)};
  EXPECT_FALSE(cmp[0].at("ttft").error.has_value());
  EXPECT_NE(format_table(cmp).find("undefined"), std::string::npos);
  EXPECT_NE(comparisons_to_json(cmp).find("\"undefined\""), std::string::npos);
}

TEST(CompareTest, TableFormatsSignedPercent) {
  RunMetrics real, emu;
  real.ttft.mean = 2.0;
  emu.ttft.mean = 2.1;
  real.tpot.mean = emu.tpot.mean = 1.0;
  real.itl.mean = emu.itl.mean = 1.0;
  real.e2e.mean = emu.e2e.mean = 1.0;
  real.tps = 100;
  emu.tps = 99;
  auto c = compare_runs(real, emu);
  c.request_rate = 4;
  const std::string t = format_table({c});
  EXPECT_NE(t.find("+5.00%"), std::string::npos) << t;
  EXPECT_NE(t.find("-1.00%"), std::string::npos) << t;
  EXPECT_NE(t.find("r=4"), std::string::npos) << t;
}

TEST(CompareTest, Antisymmetry) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = compute_metrics(random_records(rng, 30));
    const auto b = compute_metrics(random_records(rng, 30));
    const auto ab = compare_runs(a, b), ba = compare_runs(b, a);
    for (size_t i = 0; i < ab.rows.size(); ++i) {
      const double e = *ab.rows[i].error;
      EXPECT_NEAR(*ba.rows[i].error, -e / (1 + e), 1e-9);
    }
  }
}

BenchReport report_for(const WorkloadSpec& spec, std::vector<RequestRecord> recs,
                       uint32_t blocks) {
  BenchReport r;
  r.workload_hash = workload_hash(spec);
  r.request_rate = spec.request_rate;
  r.seed = spec.seed;
  r.num_prompts = spec.num_prompts;
  r.num_gpu_blocks = blocks;
  r.records = std::move(recs);
  return r;
}

TEST(CompareTest, RefusesMismatchedReports) {
  std::mt19937_64 rng(5);
  const auto recs = random_records(rng, 10);
  const auto s2 = spec_of(10, 2.0, 1.0, 1);
  const auto s2b = spec_of(10, 2.0, 1.0, 2);
  EXPECT_NO_THROW(compare_reports({report_for(s2, recs, 64)}, {report_for(s2, recs, 64)}));
  EXPECT_THROW(compare_reports({report_for(s2, recs, 64)}, {report_for(s2b, recs, 64)}),
               ComparisonMismatch);
  EXPECT_THROW(compare_reports({report_for(s2, recs, 64)}, {report_for(s2, recs, 32)}),
               ComparisonMismatch);
  auto invalid = report_for(s2, recs, 64);
  invalid.valid = false;
  EXPECT_THROW(compare_reports({report_for(s2, recs, 64)}, {invalid}), ComparisonMismatch);
}

TEST(ReportTest, JsonRoundTrip) {
  std::mt19937_64 rng(6);
  const auto spec = spec_of(20, 4.0, 0.5, 3);
  auto r = report_for(spec, random_records(rng, 20), 128);
  r.backend = "oracle";
  const auto back = report_from_json(report_to_json(r));
  EXPECT_EQ(back.workload_hash, r.workload_hash);
  EXPECT_EQ(back.backend, "oracle");
  EXPECT_EQ(back.num_gpu_blocks, 128u);
  ASSERT_EQ(back.records.size(), r.records.size());
  for (size_t i = 0; i < r.records.size(); ++i) {
    EXPECT_EQ(back.records[i].token_times, r.records[i].token_times);
    EXPECT_EQ(back.records[i].send_time, r.records[i].send_time);
  }
}

TEST(WorkloadTest, JsonLinesRoundTrip) {
  const std::vector<WorkloadEntry> e{{10, 5}, {300, 1}};
  std::stringstream ss;
  write_workload(ss, e);
  EXPECT_EQ(read_workload(ss), e);
  std::stringstream bad("{\"prompt_tokens\": 3}\n");
  EXPECT_THROW(read_workload(bad), std::invalid_argument);
}

TEST(WorkloadTest, GeneratorRespectsCapsAndSeed) {
  LengthDistribution d;
  d.max_prompt = 512;
  d.max_output = 256;
  d.max_model_len = 600;
  const auto a = generate_sharegpt_like(2000, d, 7);
  EXPECT_EQ(a, generate_sharegpt_like(2000, d, 7));
  std::vector<uint32_t> prompts;
  for (const auto& e : a) {
    EXPECT_GE(e.prompt_tokens, 1u);
    EXPECT_LE(e.prompt_tokens, 512u);
    EXPECT_LE(e.output_tokens, 256u);
    EXPECT_LE(e.prompt_tokens + e.output_tokens, 600u);
    prompts.push_back(e.prompt_tokens);
  }
  std::sort(prompts.begin(), prompts.end());
  // The median lands near the requested one.
  EXPECT_NEAR(prompts[prompts.size() / 2], 128.0, 15.0);
}

TEST(WorkloadTest, SelectionWrapsAndHashIsSensitive) {
  auto s = spec_of(5, 2.0, 1.0, 1);
  const auto sel = s.selected();
  ASSERT_EQ(sel.size(), 5u);
  EXPECT_EQ(sel[2], s.entries[0]);
  const auto h = workload_hash(s);
  EXPECT_EQ(h.size(), 16u);
  EXPECT_EQ(h, workload_hash(s));
  s.num_prompts = 6;
  EXPECT_NE(h, workload_hash(s));
}

}  // namespace
}  // namespace serve_emu
