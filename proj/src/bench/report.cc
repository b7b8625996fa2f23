// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/bench/report.h"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace serve_emu {
namespace {

using ojson = nlohmann::ordered_json;

ojson aggregate_json(const Aggregate& a) {
  return {{"mean", a.mean}, {"median", a.median}, {"p99", a.p99},
          {"count", a.count}};
}

}  // namespace

std::string report_to_json(const BenchReport& report) {
  ojson j;
  j["workload_hash"] = report.workload_hash;
  j["request_rate"] = report.request_rate;
  j["burstiness"] = report.burstiness;
  j["seed"] = report.seed;
  j["num_prompts"] = report.num_prompts;
  j["target"] = report.target;
  j["backend"] = report.backend;
  j["num_gpu_blocks"] = report.num_gpu_blocks;
  j["valid"] = report.valid;
  if (!report.error.empty()) j["error"] = report.error;
  if (report.valid && !report.records.empty()) {
    // Aggregates are informational; loaders recompute from the records.
    const auto m = compute_metrics(report.records);
    j["aggregates"] = {{"ttft", aggregate_json(m.ttft)},
                       {"tpot", aggregate_json(m.tpot)},
                       {"itl", aggregate_json(m.itl)},
                       {"e2e", aggregate_json(m.e2e)},
                       {"tps", m.tps},
                       {"duration_s", m.duration_s},
                       {"total_output_tokens", m.total_output_tokens}};
  }
  auto& recs = j["records"] = ojson::array();
  for (const auto& r : report.records) {
    recs.push_back({{"send_time", r.send_time},
                    {"first_token_time", r.first_token_time},
                    {"finish_time", r.finish_time},
                    {"prompt_tokens", r.prompt_tokens},
                    {"output_tokens", r.output_tokens},
                    {"token_times", r.token_times}});
  }
  return j.dump(1);
}

BenchReport report_from_json(const std::string& text) {
  BenchReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.workload_hash = j.at("workload_hash").get<std::string>();
    r.request_rate = j.at("request_rate").get<double>();
    r.burstiness = j.value("burstiness", 1.0);
    r.seed = j.value("seed", uint64_t{0});
    r.num_prompts = j.at("num_prompts").get<uint32_t>();
    r.target = j.value("target", std::string{});
    r.backend = j.value("backend", std::string{});
    r.num_gpu_blocks = j.value("num_gpu_blocks", 0u);
    r.valid = j.value("valid", true);
    r.error = j.value("error", std::string{});
    for (const auto& rec : j.at("records")) {
      RequestRecord out;
      out.send_time = rec.at("send_time").get<double>();
      out.first_token_time = rec.at("first_token_time").get<double>();
      out.finish_time = rec.at("finish_time").get<double>();
      out.prompt_tokens = rec.at("prompt_tokens").get<uint32_t>();
      out.output_tokens = rec.at("output_tokens").get<uint32_t>();
      out.token_times = rec.at("token_times").get<std::vector<double>>();
      r.records.push_back(std::move(out));
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("bad report: ") + e.what());
  }
  return r;
}

void save_report_file(const BenchReport& report,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << report_to_json(report) << '\n';
}

BenchReport load_report_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open report " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return report_from_json(ss.str());
}

}  // namespace serve_emu
