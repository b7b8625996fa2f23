// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/bench/compare.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace serve_emu {
namespace {

constexpr const char* kLatencyMetrics[] = {"ttft", "tpot", "itl", "e2e"};

const Aggregate& pick(const RunMetrics& m, const std::string& metric) {
  if (metric == "ttft") return m.ttft;
  if (metric == "tpot") return m.tpot;
  if (metric == "itl") return m.itl;
  return m.e2e;
}

double pick_agg(const Aggregate& a, const std::string& which) {
  if (which == "mean") return a.mean;
  if (which == "median") return a.median;
  return a.p99;
}

std::string format_rate(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

std::string format_error(const std::optional<double>& e) {
  if (!e) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f%%", *e * 100.0);
  return buf;
}

}  // namespace

std::optional<double> relative_error(double real, double emu) {
  if (real == 0.0 || !std::isfinite(real) || !std::isfinite(emu)) {
    return std::nullopt;
  }
  return (emu - real) / real;
}

const MetricComparison& RunComparison::at(const std::string& metric,
                                          const std::string& aggregate) const {
  for (const auto& r : rows) {
    if (r.metric == metric && r.aggregate == aggregate) return r;
  }
  throw std::out_of_range("no comparison row " + metric + "/" + aggregate);
}

RunComparison compare_runs(const RunMetrics& real, const RunMetrics& emu) {
  RunComparison out;
  auto add = [&](const std::string& metric, const std::string& agg, double a,
                 double b) {
    out.rows.push_back({metric, agg, a, b, relative_error(a, b)});
  };
  for (const char* m : kLatencyMetrics) {
    add(m, "mean", pick(real, m).mean, pick(emu, m).mean);
  }
  add("tps", "total", real.tps, emu.tps);
  for (const char* agg : {"median", "p99"}) {
    for (const char* m : kLatencyMetrics) {
      add(m, agg, pick_agg(pick(real, m), agg), pick_agg(pick(emu, m), agg));
    }
  }
  return out;
}

std::vector<RunComparison> compare_reports(const std::vector<BenchReport>& real,
                                           const std::vector<BenchReport>& emu) {
  if (real.size() != emu.size()) {
    throw ComparisonMismatch("real and emu report counts differ");
  }
  std::vector<RunComparison> out;
  for (const auto& r : real) {
    auto it = std::find_if(emu.begin(), emu.end(), [&](const BenchReport& e) {
      return e.request_rate == r.request_rate;
    });
    if (it == emu.end()) {
      throw ComparisonMismatch("no emu report at rate " +
                               format_rate(r.request_rate));
    }
    if (!r.valid || !it->valid) {
      throw ComparisonMismatch("invalid report at rate " +
                               format_rate(r.request_rate));
    }
    if (r.workload_hash != it->workload_hash) {
      throw ComparisonMismatch("workload hash mismatch at rate " +
                               format_rate(r.request_rate) + ": " +
                               r.workload_hash + " vs " + it->workload_hash);
    }
    if (r.num_gpu_blocks != it->num_gpu_blocks) {
      throw ComparisonMismatch("num_gpu_blocks mismatch at rate " +
                               format_rate(r.request_rate));
    }
    auto cmp = compare_runs(compute_metrics(r.records),
                            compute_metrics(it->records));
    cmp.request_rate = r.request_rate;
    out.push_back(std::move(cmp));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.request_rate < b.request_rate;
  });
  return out;
}

std::string format_table(const std::vector<RunComparison>& comparisons) {
  static const std::pair<const char*, const char*> kRows[] = {
      {"TTFT", "ttft"}, {"TPOT", "tpot"}, {"ITL", "itl"},
      {"E2E", "e2e"},   {"TPS", "tps"}};
  std::ostringstream os;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-8s", "Metric");
  os << buf;
  for (const auto& c : comparisons) {
    std::snprintf(buf, sizeof buf, "%12s", ("r=" + format_rate(c.request_rate)).c_str());
    os << buf;
  }
  os << '\n';
  for (const auto& [label, key] : kRows) {
    std::snprintf(buf, sizeof buf, "%-8s", label);
    os << buf;
    for (const auto& c : comparisons) {
      const auto& row = c.at(key, std::string(key) == "tps" ? "total" : "mean");
      std::snprintf(buf, sizeof buf, "%12s", format_error(row.error).c_str());
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::string comparisons_to_json(const std::vector<RunComparison>& comparisons) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& c : comparisons) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : c.rows) {
      nlohmann::ordered_json row;
      row["metric"] = r.metric;
      row["aggregate"] = r.aggregate;
      row["real"] = r.real;
      row["emu"] = r.emu;
      if (r.error) {
        row["error"] = *r.error;
      } else {
        row["error"] = "undefined";
      }
      rows.push_back(std::move(row));
    }
    j.push_back({{"request_rate", c.request_rate}, {"rows", std::move(rows)}});
  }
  return j.dump(2);
}

}  // namespace serve_emu
