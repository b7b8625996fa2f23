// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/bench/workload.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace serve_emu {

void WorkloadSpec::validate() const {
  if (entries.empty()) throw std::invalid_argument("workload has no entries");
  if (!(request_rate > 0.0)) throw std::invalid_argument("rate must be > 0");
  if (!(burstiness > 0.0)) throw std::invalid_argument("burstiness must be > 0");
  if (num_prompts < 1) throw std::invalid_argument("num_prompts must be >= 1");
  for (const auto& e : entries) {
    if (e.prompt_tokens < 1 || e.output_tokens < 1) {
      throw std::invalid_argument("workload entries need positive lengths");
    }
  }
}

std::vector<WorkloadEntry> WorkloadSpec::selected() const {
  std::vector<WorkloadEntry> out;
  out.reserve(num_prompts);
  for (uint32_t i = 0; i < num_prompts; ++i) {
    out.push_back(entries[i % entries.size()]);
  }
  return out;
}

std::vector<WorkloadEntry> read_workload(std::istream& is) {
  std::vector<WorkloadEntry> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("prompt_tokens").get<uint32_t>(),
                     j.at("output_tokens").get<uint32_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("workload line " + std::to_string(line_no) +
                                  ": " + e.what());
    }
  }
  return out;
}

std::vector<WorkloadEntry> read_workload_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open workload " + path.string());
  return read_workload(in);
}

void write_workload(std::ostream& os, const std::vector<WorkloadEntry>& entries) {
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["prompt_tokens"] = e.prompt_tokens;
    j["output_tokens"] = e.output_tokens;
    os << j.dump() << '\n';
  }
}

std::vector<WorkloadEntry> generate_sharegpt_like(size_t n,
                                                  const LengthDistribution& dist,
                                                  uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> prompt(std::log(dist.prompt_median),
                                             dist.prompt_sigma);
  std::lognormal_distribution<double> output(std::log(dist.output_median),
                                             dist.output_sigma);
  auto clamp_len = [](double v, uint32_t cap) {
    return static_cast<uint32_t>(
        std::clamp<double>(std::round(v), 1.0, static_cast<double>(cap)));
  };
  std::vector<WorkloadEntry> out;
  out.reserve(n);
  while (out.size() < n) {
    WorkloadEntry e{clamp_len(prompt(rng), dist.max_prompt),
                    clamp_len(output(rng), dist.max_output)};
    if (uint64_t{e.prompt_tokens} + e.output_tokens > dist.max_model_len) {
      continue;
    }
    out.push_back(e);
  }
  return out;
}

std::string workload_hash(const WorkloadSpec& spec) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& e : spec.selected()) {
    mix(&e.prompt_tokens, sizeof e.prompt_tokens);
    mix(&e.output_tokens, sizeof e.output_tokens);
  }
  mix(&spec.request_rate, sizeof spec.request_rate);
  mix(&spec.burstiness, sizeof spec.burstiness);
  mix(&spec.seed, sizeof spec.seed);
  mix(&spec.num_prompts, sizeof spec.num_prompts);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace serve_emu
