// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/engine/kv_block_manager.h"

#include <string>

namespace serve_emu {

KvBlockManager::KvBlockManager(uint64_t num_blocks)
    : num_blocks_(num_blocks), free_(num_blocks) {}

void KvBlockManager::allocate(RequestId id, uint64_t n) {
  if (n > free_) {
    throw InvariantViolation("allocating " + std::to_string(n) +
                             " blocks with only " + std::to_string(free_) +
                             " free");
  }
  if (n == 0) return;
  free_ -= n;
  table_[id] += n;
}

uint64_t KvBlockManager::allocated(RequestId id) const {
  auto it = table_.find(id);
  return it == table_.end() ? 0 : it->second;
}

uint64_t KvBlockManager::release(RequestId id) {
  auto it = table_.find(id);
  if (it == table_.end()) {
    throw InvariantViolation("double free of request " +
                             std::to_string(id.value));
  }
  const uint64_t n = it->second;
  free_ += n;
  table_.erase(it);
  return n;
}

}  // namespace serve_emu
