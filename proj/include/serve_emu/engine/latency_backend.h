// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "serve_emu/oracle/latency_oracle.h"

namespace serve_emu {

// Synthetic stand-in for GPU step time:
//   m * (base + per_token * tt + per_seq * conc) * (1 + g)
// with m = mixed_multiplier for steps containing prefill (1 otherwise) and
// g ~ N(0, noise_cv) truncated to keep the result positive.
struct GroundTruthParams {
  double base_s = 0.012;
  double per_token_s = 4e-5;
  double per_seq_s = 1.5e-4;
  double mixed_multiplier = 1.15;
  double noise_cv = 0.05;

  void validate() const;
};

double ground_truth_latency(uint32_t tt, uint32_t conc, StepPhase phase,
                            const GroundTruthParams& params, Rng& rng);

// Where a step's execution time comes from.
class LatencyBackend {
 public:
  virtual ~LatencyBackend() = default;
  // May throw NoDataError.
  virtual double latency(const OracleQuery& step, Rng& rng) = 0;
  virtual std::string name() const = 0;
};

class GroundTruthBackend final : public LatencyBackend {
 public:
  explicit GroundTruthBackend(GroundTruthParams params);
  double latency(const OracleQuery& step, Rng& rng) override;
  std::string name() const override { return "groundtruth"; }
  const GroundTruthParams& params() const { return params_; }

 private:
  GroundTruthParams params_;
};

class OracleBackend final : public LatencyBackend {
 public:
  explicit OracleBackend(LatencyOracle oracle) : oracle_(std::move(oracle)) {}
  double latency(const OracleQuery& step, Rng& rng) override {
    return oracle_.sample(step, rng);
  }
  std::string name() const override { return "oracle"; }
  const LatencyOracle& oracle() const { return oracle_; }

 private:
  LatencyOracle oracle_;
};

}  // namespace serve_emu
