// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace serve_emu {

struct EngineConfig {
  uint32_t block_size = 16;             // tokens per KV block
  uint64_t num_gpu_blocks = 2048;       // --num-gpu-blocks-override analogue
  uint32_t max_model_len = 4096;        // prompt + output cap, tokens
  uint32_t max_num_batched_tokens = 1024;  // per-step token budget
  uint32_t max_num_seqs = 256;
  bool async_scheduling = true;

  // Throws std::invalid_argument.
  void validate() const;

  uint64_t blocks_for(uint64_t tokens) const {
    return (tokens + block_size - 1) / block_size;
  }
};

}  // namespace serve_emu
