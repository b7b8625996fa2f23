// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "serve_emu/bench/workload.h"
#include "serve_emu/profile/step_trace.h"

namespace serve_emu {

struct CaptureOptions {
  std::vector<double> rates;
  // One value for every rate, or one per rate (more prompts at higher rates).
  std::vector<uint32_t> prompts_per_rate;
  uint64_t seed = 0;
  uint32_t rounds = 1;  // round k uses seed + k
  double burstiness = 1.0;
  std::vector<WorkloadEntry> entries;
  std::filesystem::path trace_dir;

  void validate() const;
  uint32_t prompts_for(size_t rate_index) const;
};

struct CaptureRun {
  double rate = 0.0;
  uint32_t round = 0;
  uint64_t seed = 0;
  std::filesystem::path trace_file;
  size_t num_steps = 0;
};

// Runs every (round, rate) benchmark against a tracing server in order and
// writes the steps each run executed to trace_dir. Throws std::runtime_error
// when a run is invalid or the server is not tracing.
std::vector<CaptureRun> capture_profile(const std::string& url,
                                        const CaptureOptions& options);

std::string trace_file_name(double rate, uint32_t round, uint64_t seed);

// All *.jsonl traces in dir, concatenated in file-name order.
std::vector<StepTraceRecord> load_trace_dir(const std::filesystem::path& dir);

}  // namespace serve_emu
