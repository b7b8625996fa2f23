// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/engine/engine_config.h"

#include <stdexcept>

namespace serve_emu {

void EngineConfig::validate() const {
  if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
  if (num_gpu_blocks < 1) {
    throw std::invalid_argument("num_gpu_blocks must be >= 1");
  }
  if (max_model_len < 2) {
    throw std::invalid_argument("max_model_len must be >= 2");
  }
  if (max_num_batched_tokens < block_size) {
    throw std::invalid_argument("max_num_batched_tokens must be >= block_size");
  }
  if (max_num_seqs < 1) throw std::invalid_argument("max_num_seqs must be >= 1");
}

}  // namespace serve_emu
