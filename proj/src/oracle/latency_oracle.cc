// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/oracle/latency_oracle.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace serve_emu {

std::string describe(const OracleQuery& query) {
  return "(tt=" + std::to_string(query.total_tokens) +
         ", conc=" + std::to_string(query.concurrency) +
         ", phase=" + std::string(to_string(query.phase)) + ")";
}

void OracleConfig::validate() const {
  if (reliability_floor < 1) {
    throw std::invalid_argument("reliability_floor must be >= 1");
  }
  if (!(shepard_power > 0.0)) {
    throw std::invalid_argument("shepard_power must be > 0");
  }
  if (!(epsilon_distance > 0.0)) {
    throw std::invalid_argument("epsilon_distance must be > 0");
  }
}

double normalized_distance(uint32_t t, uint32_t c, uint32_t tt, uint32_t conc,
                           AxisRange tt_range, AxisRange conc_range) {
  auto axis = [](uint32_t q, uint32_t b, AxisRange range) {
    if (range.max <= range.min) return 0.0;
    return (static_cast<double>(q) - static_cast<double>(b)) /
           static_cast<double>(range.max - range.min);
  };
  const double dt = axis(t, tt, tt_range);
  const double dc = axis(c, conc, conc_range);
  return std::sqrt(dt * dt + dc * dc);
}

std::vector<PooledBucket> pool_neighbors(const PhaseTable& table, uint32_t t,
                                         uint32_t c, uint32_t floor) {
  if (table.empty()) {
    throw NoDataError("no data: " + std::string(to_string(table.kind())) +
                      " table is empty");
  }
  const auto& buckets = table.buckets();
  const AxisRange tt_range = table.tt_range();
  const AxisRange conc_range = table.conc_range();

  std::vector<PooledBucket> ranked;
  ranked.reserve(buckets.size());
  for (const auto& b : buckets) {
    ranked.push_back(
        {&b, normalized_distance(t, c, b.tt, b.conc, tt_range, conc_range)});
  }
  // Grow a sorted prefix in doubling chunks; usually only a few buckets are
  // needed to reach the floor.
  size_t sorted = 0;
  size_t pooled = 0;
  uint64_t n = 0;
  size_t chunk = 16;
  while (pooled < ranked.size()) {
    if (pooled == sorted) {
      const size_t end = std::min(ranked.size(), sorted + chunk);
      std::partial_sort(
          ranked.begin() + static_cast<std::ptrdiff_t>(sorted),
          ranked.begin() + static_cast<std::ptrdiff_t>(end), ranked.end(),
          [&](const PooledBucket& a, const PooledBucket& b) {
            if (a.distance != b.distance) return a.distance < b.distance;
            return a.bucket->key() < b.bucket->key();
          });
      sorted = end;
      chunk *= 2;
    }
    n += ranked[pooled].bucket->samples.size();
    ++pooled;
    if (n >= floor) break;
  }
  ranked.resize(pooled);
  return ranked;
}

PoolDraw draw_from_pool(std::span<const PooledBucket> pool,
                        const OracleConfig& config, Rng& rng) {
  if (pool.empty()) throw NoDataError("no data: empty neighbor pool");
  // Weights are scaled by d_min^p so the largest is 1; ratios are unchanged
  // and large powers cannot overflow.
  double d_min = std::numeric_limits<double>::infinity();
  for (const auto& p : pool) {
    d_min = std::min(d_min, std::max(p.distance, config.epsilon_distance));
  }
  std::vector<double> mass(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) {
    const double d = std::max(pool[i].distance, config.epsilon_distance);
    const double w = std::pow(d_min / d, config.shepard_power);
    mass[i] = w * static_cast<double>(pool[i].bucket->samples.size());
  }
  const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  std::uniform_real_distribution<double> unit(0.0, total);
  const double u = unit(rng);
  size_t chosen = pool.size() - 1;
  double acc = 0.0;
  for (size_t i = 0; i < pool.size(); ++i) {
    acc += mass[i];
    if (u < acc) {
      chosen = i;
      break;
    }
  }
  const auto& samples = pool[chosen].bucket->samples;
  std::uniform_int_distribution<size_t> pick(0, samples.size() - 1);
  return {chosen, samples[pick(rng)]};
}

double sample_latency(const ProfilePack& pack, const OracleQuery& query,
                      const OracleConfig& config, Rng& rng) {
  const PhaseTable* table = &pack.table_for(query.phase);
  const bool use_combined =
      table->empty() ||
      (config.fallback == CombinedFallback::kPhaseTableBelowFloor &&
       table->total_samples() < config.reliability_floor);
  if (use_combined) table = &pack.combined;
  if (table->empty()) {
    throw NoDataError("no data for query " + describe(query) +
                      ": profile pack has no samples");
  }
  const auto pool = pool_neighbors(*table, query.total_tokens,
                                   query.concurrency, config.reliability_floor);
  return draw_from_pool(pool, config, rng).latency_s;
}

LatencyOracle::LatencyOracle(std::shared_ptr<const ProfilePack> pack,
                             OracleConfig config)
    : pack_(std::move(pack)), config_(config) {
  if (!pack_) throw std::invalid_argument("LatencyOracle requires a pack");
  config_.validate();
}

}  // namespace serve_emu
