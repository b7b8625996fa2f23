// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace serve_emu {

struct WorkloadEntry {
  uint32_t prompt_tokens = 0;
  uint32_t output_tokens = 0;

  bool operator==(const WorkloadEntry&) const = default;
};

struct WorkloadSpec {
  std::vector<WorkloadEntry> entries;
  double request_rate = 1.0;  // requests per second
  double burstiness = 1.0;    // gamma shape; 1.0 is Poisson
  uint64_t seed = 0;
  uint32_t num_prompts = 1;

  // Throws std::invalid_argument.
  void validate() const;

  // The requests actually sent: entries in file order, wrapping around when
  // num_prompts exceeds the file.
  std::vector<WorkloadEntry> selected() const;
};

// JSON-lines: {"prompt_tokens": int, "output_tokens": int}
std::vector<WorkloadEntry> read_workload(std::istream& is);
std::vector<WorkloadEntry> read_workload_file(const std::filesystem::path& path);
void write_workload(std::ostream& os, const std::vector<WorkloadEntry>& entries);

// Log-normal prompt and output lengths around the given medians, clamped to
// the caps; a dataset-free stand-in for ShareGPT conversation lengths.
struct LengthDistribution {
  uint32_t prompt_median = 128;
  uint32_t output_median = 96;
  double prompt_sigma = 0.9;
  double output_sigma = 0.7;
  uint32_t max_prompt = 1024;
  uint32_t max_output = 512;
  uint32_t max_model_len = 4096;
};

std::vector<WorkloadEntry> generate_sharegpt_like(size_t n,
                                                  const LengthDistribution& dist,
                                                  uint64_t seed);

// Stable 64-bit FNV-1a over the selected entries, rate, burstiness, seed and
// prompt count, as 16 hex digits. Runs are only comparable when it matches.
std::string workload_hash(const WorkloadSpec& spec);

}  // namespace serve_emu
