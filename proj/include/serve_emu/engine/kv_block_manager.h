// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <unordered_map>

namespace serve_emu {

struct RequestId {
  uint64_t value = 0;

  auto operator<=>(const RequestId&) const = default;
};

// Raised when engine bookkeeping is about to become inconsistent (double free,
// freeing a live request, over-allocation). Always a bug in the caller.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace serve_emu

template <>
struct std::hash<serve_emu::RequestId> {
  size_t operator()(const serve_emu::RequestId& id) const noexcept {
    return std::hash<uint64_t>{}(id.value);
  }
};

namespace serve_emu {

// Counts KV blocks per request. Block identities are irrelevant to timing, so
// only counts are tracked.
class KvBlockManager {
 public:
  explicit KvBlockManager(uint64_t num_blocks);

  uint64_t num_blocks() const { return num_blocks_; }
  uint64_t free_blocks() const { return free_; }
  uint64_t used_blocks() const { return num_blocks_ - free_; }

  bool can_allocate(uint64_t n) const { return n <= free_; }

  // Adds n blocks to the request's allocation.
  void allocate(RequestId id, uint64_t n);

  // 0 when the request holds nothing.
  uint64_t allocated(RequestId id) const;
  bool holds(RequestId id) const { return table_.contains(id); }

  // Returns every block held by the request. Throws if it holds none.
  uint64_t release(RequestId id);

 private:
  uint64_t num_blocks_;
  uint64_t free_;
  std::unordered_map<RequestId, uint64_t> table_;
};

}  // namespace serve_emu
