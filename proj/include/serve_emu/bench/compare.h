// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "serve_emu/bench/metrics.h"
#include "serve_emu/bench/report.h"

namespace serve_emu {

// (emu - real) / real; nullopt when real is 0 or either side is not finite.
std::optional<double> relative_error(double real, double emu);

struct MetricComparison {
  std::string metric;  // "ttft", "tpot", "itl", "e2e", "tps"
  std::string aggregate;  // "mean", "median", "p99"; "total" for tps
  double real = 0.0;
  double emu = 0.0;
  std::optional<double> error;
};

struct RunComparison {
  double request_rate = 0.0;
  // Headline rows first (mean TTFT, TPOT, ITL, E2E, then TPS), followed by
  // median and p99 rows for the four latency metrics.
  std::vector<MetricComparison> rows;

  // Looks up a row; throws std::out_of_range.
  const MetricComparison& at(const std::string& metric,
                             const std::string& aggregate = "mean") const;
};

RunComparison compare_runs(const RunMetrics& real, const RunMetrics& emu);

class ComparisonMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Pairs reports by request rate. Throws ComparisonMismatch when a rate is
// missing on one side, a report is invalid, or the workload hashes or
// num_gpu_blocks of a pair differ.
std::vector<RunComparison> compare_reports(const std::vector<BenchReport>& real,
                                           const std::vector<BenchReport>& emu);

// One column per rate, one row per headline metric, signed percentages.
std::string format_table(const std::vector<RunComparison>& comparisons);
std::string comparisons_to_json(const std::vector<RunComparison>& comparisons);

}  // namespace serve_emu
