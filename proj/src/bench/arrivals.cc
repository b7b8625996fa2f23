// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/bench/arrivals.h"

#include <stdexcept>

namespace serve_emu {

std::vector<double> inter_arrival_gaps(size_t n, double rate, double burstiness,
                                       std::mt19937_64& rng) {
  if (!(rate > 0.0) || !(burstiness > 0.0)) {
    throw std::invalid_argument("rate and burstiness must be positive");
  }
  std::gamma_distribution<double> gap(burstiness, 1.0 / (rate * burstiness));
  std::vector<double> out(n);
  for (auto& g : out) g = gap(rng);
  return out;
}

std::vector<double> generate_arrivals(const WorkloadSpec& spec,
                                      std::mt19937_64& rng) {
  spec.validate();
  const auto gaps = inter_arrival_gaps(spec.num_prompts - 1, spec.request_rate,
                                       spec.burstiness, rng);
  std::vector<double> offsets(spec.num_prompts, 0.0);
  for (size_t i = 1; i < offsets.size(); ++i) {
    offsets[i] = offsets[i - 1] + gaps[i - 1];
  }
  return offsets;
}

}  // namespace serve_emu
