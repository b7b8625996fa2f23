// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "serve_emu/profile/profile_pack.h"

namespace serve_emu {

using Rng = std::mt19937_64;

struct OracleQuery {
  uint32_t total_tokens = 1;
  uint32_t concurrency = 1;
  StepPhase phase = StepPhase::kDecodeOnly;
};

std::string describe(const OracleQuery& query);

// When the combined table replaces the phase table for a query.
enum class CombinedFallback {
  kPhaseTableEmpty,       // only when the phase table has no buckets
  kPhaseTableBelowFloor,  // also when the phase table holds < M samples
};

struct OracleConfig {
  uint32_t reliability_floor = 32;  // M
  double shepard_power = 2.0;
  double epsilon_distance = 1e-9;
  CombinedFallback fallback = CombinedFallback::kPhaseTableEmpty;

  // Throws std::invalid_argument.
  void validate() const;
};

class NoDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Euclidean distance on axis-wise range-normalized deltas. An axis whose range
// is degenerate (max == min) contributes nothing.
double normalized_distance(uint32_t t, uint32_t c, uint32_t tt, uint32_t conc,
                           AxisRange tt_range, AxisRange conc_range);

struct PooledBucket {
  const Bucket* bucket = nullptr;
  double distance = 0.0;
};

// Shortest prefix of the buckets sorted by (distance, tt, conc) whose
// cumulative sample count reaches `floor`; the whole table if it never does.
// Throws NoDataError on an empty table.
std::vector<PooledBucket> pool_neighbors(const PhaseTable& table, uint32_t t,
                                         uint32_t c, uint32_t floor);

struct PoolDraw {
  size_t pool_index = 0;
  double latency_s = 0.0;
};

// Picks bucket i with probability w_i * n_i / sum_j(w_j * n_j), where
// w_i = 1 / max(d_i, eps)^p, then one of its samples uniformly. This is
// per-sample Shepard weighting over the pooled samples.
PoolDraw draw_from_pool(std::span<const PooledBucket> pool,
                        const OracleConfig& config, Rng& rng);

// Runs neighbor pooling on the table for query.phase (or the combined table
// per config.fallback) and draws one observed latency.
double sample_latency(const ProfilePack& pack, const OracleQuery& query,
                      const OracleConfig& config, Rng& rng);

// Convenience holder sharing one immutable pack among samplers.
class LatencyOracle {
 public:
  LatencyOracle(std::shared_ptr<const ProfilePack> pack, OracleConfig config);

  double sample(const OracleQuery& query, Rng& rng) const {
    return sample_latency(*pack_, query, config_, rng);
  }

  const ProfilePack& pack() const { return *pack_; }
  const OracleConfig& config() const { return config_; }

 private:
  std::shared_ptr<const ProfilePack> pack_;
  OracleConfig config_;
};

}  // namespace serve_emu
