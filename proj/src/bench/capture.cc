// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/bench/capture.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "serve_emu/bench/client.h"

namespace serve_emu {

void CaptureOptions::validate() const {
  if (rates.empty()) throw std::invalid_argument("capture needs rates");
  if (prompts_per_rate.size() != 1 && prompts_per_rate.size() != rates.size()) {
    throw std::invalid_argument(
        "prompts_per_rate needs one value or one per rate");
  }
  if (rounds < 1) throw std::invalid_argument("rounds must be >= 1");
  if (entries.empty()) throw std::invalid_argument("capture needs a workload");
  if (trace_dir.empty()) throw std::invalid_argument("capture needs trace_dir");
}

uint32_t CaptureOptions::prompts_for(size_t rate_index) const {
  return prompts_per_rate.size() == 1 ? prompts_per_rate[0]
                                      : prompts_per_rate.at(rate_index);
}

std::string trace_file_name(double rate, uint32_t round, uint64_t seed) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "trace_r%g_round%u_s%llu.jsonl", rate, round,
                static_cast<unsigned long long>(seed));
  return buf;
}

std::vector<CaptureRun> capture_profile(const std::string& url,
                                        const CaptureOptions& options) {
  options.validate();
  if (!fetch_stats(url).tracing) {
    throw std::runtime_error("server at " + url + " is not tracing");
  }
  std::filesystem::create_directories(options.trace_dir);
  std::vector<CaptureRun> runs;
  for (uint32_t round = 0; round < options.rounds; ++round) {
    for (size_t i = 0; i < options.rates.size(); ++i) {
      WorkloadSpec spec;
      spec.entries = options.entries;
      spec.request_rate = options.rates[i];
      spec.burstiness = options.burstiness;
      spec.seed = options.seed + round;
      spec.num_prompts = options.prompts_for(i);

      drain_trace(url);  // discard steps from before this run
      const uint64_t finished_before = fetch_stats(url).finished;
      spdlog::info("capture: rate {} round {} ({} prompts)", spec.request_rate,
                   round, spec.num_prompts);
      const auto result = run_benchmark(url, spec);
      if (!result.valid) {
        throw std::runtime_error("capture run failed: " + result.error);
      }
      // Every request has been answered; wait for the engine to account them.
      while (fetch_stats(url).finished < finished_before + spec.num_prompts) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      const auto steps = drain_trace(url);

      CaptureRun run{spec.request_rate, round, spec.seed,
                     options.trace_dir /
                         trace_file_name(spec.request_rate, round, spec.seed),
                     steps.size()};
      std::ofstream out(run.trace_file);
      if (!out) {
        throw std::runtime_error("cannot write " + run.trace_file.string());
      }
      write_trace(out, steps);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

std::vector<StepTraceRecord> load_trace_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".jsonl") {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw std::invalid_argument("no .jsonl traces in " + dir.string());
  }
  std::vector<StepTraceRecord> all;
  for (const auto& f : files) {
    auto recs = read_trace_file(f);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return all;
}

}  // namespace serve_emu
