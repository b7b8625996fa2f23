// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/bench/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace serve_emu {

void RequestRecord::validate() const {
  if (output_tokens < 1) throw MetricsError("record has no output tokens");
  if (token_times.size() != output_tokens) {
    throw MetricsError("token_times has " + std::to_string(token_times.size()) +
                       " entries, expected " + std::to_string(output_tokens));
  }
  if (first_token_time != token_times.front()) {
    throw MetricsError("first_token_time differs from token_times[0]");
  }
  if (first_token_time < send_time) {
    throw MetricsError("first token precedes send");
  }
  for (size_t i = 1; i < token_times.size(); ++i) {
    if (token_times[i] < token_times[i - 1]) {
      throw MetricsError("token_times not nondecreasing at index " +
                         std::to_string(i));
    }
  }
  if (finish_time < token_times.back()) {
    throw MetricsError("finish precedes last token");
  }
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + (values[hi] - values[lo]) * frac;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) {
    a.mean = a.median = a.p99 = std::numeric_limits<double>::quiet_NaN();
    return a;
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  std::vector<double> copy(values.begin(), values.end());
  a.median = percentile(copy, 50.0);
  a.p99 = percentile(std::move(copy), 99.0);
  return a;
}

RunMetrics compute_metrics(std::span<const RequestRecord> records) {
  RunMetrics m;
  if (records.empty()) throw MetricsError("no records");
  std::vector<double> ttft, tpot, itl, e2e;
  double first_send = std::numeric_limits<double>::infinity();
  double last_finish = -std::numeric_limits<double>::infinity();
  for (const auto& r : records) {
    r.validate();
    RequestMetrics rm;
    rm.ttft = r.first_token_time - r.send_time;
    rm.e2e = r.finish_time - r.send_time;
    for (size_t i = 1; i < r.token_times.size(); ++i) {
      rm.itl.push_back(r.token_times[i] - r.token_times[i - 1]);
    }
    if (r.output_tokens >= 2) {
      rm.tpot = (rm.e2e - rm.ttft) / static_cast<double>(r.output_tokens - 1);
      tpot.push_back(*rm.tpot);
    }
    ttft.push_back(rm.ttft);
    e2e.push_back(rm.e2e);
    itl.insert(itl.end(), rm.itl.begin(), rm.itl.end());
    first_send = std::min(first_send, r.send_time);
    last_finish = std::max(last_finish, r.finish_time);
    m.total_output_tokens += r.output_tokens;
    m.per_request.push_back(std::move(rm));
  }
  m.ttft = aggregate(ttft);
  m.tpot = aggregate(tpot);
  m.itl = aggregate(itl);
  m.e2e = aggregate(e2e);
  m.duration_s = last_finish - first_send;
  m.tps = m.duration_s > 0.0
              ? static_cast<double>(m.total_output_tokens) / m.duration_s
              : std::numeric_limits<double>::quiet_NaN();
  return m;
}

}  // namespace serve_emu
