// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/engine/latency_backend.h"

#include <stdexcept>

namespace serve_emu {

void GroundTruthParams::validate() const {
  if (base_s < 0 || per_token_s < 0 || per_seq_s < 0) {
    throw std::invalid_argument("ground-truth coefficients must be >= 0");
  }
  if (base_s + per_token_s + per_seq_s <= 0) {
    throw std::invalid_argument("ground-truth latency would be zero");
  }
  if (mixed_multiplier < 1.0) {
    throw std::invalid_argument("mixed_multiplier must be >= 1");
  }
  if (noise_cv < 0) throw std::invalid_argument("noise_cv must be >= 0");
}

double ground_truth_latency(uint32_t tt, uint32_t conc, StepPhase phase,
                            const GroundTruthParams& params, Rng& rng) {
  const double m =
      phase == StepPhase::kPrefillOrMixed ? params.mixed_multiplier : 1.0;
  const double mean = m * (params.base_s + params.per_token_s * tt +
                           params.per_seq_s * conc);
  if (params.noise_cv == 0.0) return mean;
  std::normal_distribution<double> noise(0.0, params.noise_cv);
  double g = noise(rng);
  while (1.0 + g <= 0.0) g = noise(rng);
  return mean * (1.0 + g);
}

GroundTruthBackend::GroundTruthBackend(GroundTruthParams params)
    : params_(params) {
  params_.validate();
}

double GroundTruthBackend::latency(const OracleQuery& step, Rng& rng) {
  return ground_truth_latency(step.total_tokens, step.concurrency, step.phase,
                              params_, rng);
}

}  // namespace serve_emu
