// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "serve_emu/bench/metrics.h"
#include "serve_emu/bench/workload.h"
#include "serve_emu/profile/step_trace.h"

namespace serve_emu {

struct BenchResult {
  std::vector<RequestRecord> records;  // in workload order when valid
  bool valid = true;
  std::string error;
};

// Open-loop replay of spec against a serving endpoint. Requests are sent at
// generate_arrivals(spec, Rng(spec.seed)) offsets regardless of earlier
// responses, one stream per in-flight request. A connection failure or an
// HTTP error stops further sends and returns the partial result with
// valid = false.
BenchResult run_benchmark(const std::string& url, const WorkloadSpec& spec);

struct ServerStats {
  uint64_t finished = 0;
  uint64_t steps_executed = 0;
  uint32_t num_gpu_blocks = 0;
  std::string backend;
  bool failed = false;
  bool tracing = false;
};

// Throws std::runtime_error when the server is unreachable or answers badly.
ServerStats fetch_stats(const std::string& url);
std::vector<StepTraceRecord> drain_trace(const std::string& url);

}  // namespace serve_emu
