// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <vector>

#include "serve_emu/bench/workload.h"

namespace serve_emu {

// i.i.d. Gamma(shape = burstiness, scale = 1 / (rate * burstiness)) gaps: the
// mean gap is 1/rate for every shape, the CV is 1/sqrt(shape), and shape 1 is
// Exponential(rate), i.e. Poisson arrivals.
std::vector<double> inter_arrival_gaps(size_t n, double rate, double burstiness,
                                       std::mt19937_64& rng);

// Send offsets in seconds for spec.num_prompts requests. The first request is
// sent at 0; each later one follows the previous by one gap. Depends only on
// (spec, rng), never on server responses.
std::vector<double> generate_arrivals(const WorkloadSpec& spec,
                                      std::mt19937_64& rng);

}  // namespace serve_emu
