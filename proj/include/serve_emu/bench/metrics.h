// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace serve_emu {

// Client-side timestamps of one request, seconds since benchmark start.
struct RequestRecord {
  double send_time = 0.0;
  double first_token_time = 0.0;
  std::vector<double> token_times;
  double finish_time = 0.0;
  uint32_t prompt_tokens = 0;
  uint32_t output_tokens = 0;

  // Throws MetricsError when timestamps are out of order or counts disagree.
  void validate() const;
};

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  double p99 = 0.0;
  size_t count = 0;
};

// Linear-interpolation percentile (q in [0, 100]) of unsorted values.
double percentile(std::vector<double> values, double q);
Aggregate aggregate(std::span<const double> values);

struct RequestMetrics {
  double ttft = 0.0;
  double e2e = 0.0;
  std::optional<double> tpot;  // absent for single-token requests
  std::vector<double> itl;
};

struct RunMetrics {
  std::vector<RequestMetrics> per_request;
  Aggregate ttft;
  Aggregate tpot;
  Aggregate itl;  // over every inter-token gap of every request
  Aggregate e2e;
  double tps = 0.0;
  double duration_s = 0.0;  // last finish - first send
  uint64_t total_output_tokens = 0;
};

// TTFT = first token - send; E2E = finish - send; ITL = consecutive token
// gaps; TPOT = (E2E - TTFT) / (output_tokens - 1) when output_tokens >= 2;
// TPS = total output tokens / duration.
RunMetrics compute_metrics(std::span<const RequestRecord> records);

}  // namespace serve_emu
