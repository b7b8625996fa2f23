// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "serve_emu/bench/metrics.h"

namespace serve_emu {

// Output of one benchmark run as written by `serve-emu bench --out`.
struct BenchReport {
  std::string workload_hash;
  double request_rate = 0.0;
  double burstiness = 1.0;
  uint64_t seed = 0;
  uint32_t num_prompts = 0;
  std::string target;
  std::string backend;  // as reported by the server's /stats, may be empty
  uint32_t num_gpu_blocks = 0;
  bool valid = true;
  std::string error;
  std::vector<RequestRecord> records;
};

std::string report_to_json(const BenchReport& report);
BenchReport report_from_json(const std::string& text);
void save_report_file(const BenchReport& report,
                      const std::filesystem::path& path);
BenchReport load_report_file(const std::filesystem::path& path);

}  // namespace serve_emu
