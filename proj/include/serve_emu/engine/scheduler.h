// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "serve_emu/engine/engine_config.h"
#include "serve_emu/engine/kv_block_manager.h"
#include "serve_emu/profile/step_trace.h"

namespace serve_emu {

using Clock = std::chrono::steady_clock;

enum class RequestPhase { kWaiting, kPrefilling, kDecoding, kPreempted, kFinished };

std::string_view to_string(RequestPhase phase);

struct RequestState {
  RequestId id;
  uint64_t arrival_seq = 0;
  uint32_t prompt_len = 0;
  // Generation always runs to this cap (ignore-EOS semantics).
  uint32_t target_output_len = 0;
  uint32_t prefill_progress = 0;
  uint32_t generated = 0;
  uint64_t allocated_blocks = 0;
  uint32_t num_preemptions = 0;
  RequestPhase phase = RequestPhase::kWaiting;

  Clock::time_point arrival{};
  std::optional<Clock::time_point> first_scheduled;
  std::vector<Clock::time_point> token_times;
  std::optional<Clock::time_point> finish;

  bool running() const {
    return phase == RequestPhase::kPrefilling || phase == RequestPhase::kDecoding;
  }
};

// Rejection at admission; the server maps it to HTTP 400.
class LengthError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class EntryKind { kDecode, kPrefill };

struct StepEntry {
  RequestId id;
  uint32_t chunk_tokens = 0;
  EntryKind kind = EntryKind::kDecode;

  bool operator==(const StepEntry&) const = default;
};

struct StepBatch {
  uint64_t step_index = 0;
  std::vector<StepEntry> entries;
  uint32_t total_tokens = 0;  // tt
  StepPhase phase = StepPhase::kDecodeOnly;

  bool empty() const { return entries.empty(); }
  uint32_t concurrency() const { return static_cast<uint32_t>(entries.size()); }

  bool operator==(const StepBatch&) const = default;
};

struct TokenEmission {
  RequestId id;
  uint32_t token_index = 0;  // also the synthetic token id
  bool finished = false;
};

struct StepOutcome {
  uint64_t step_index = 0;
  std::vector<TokenEmission> emissions;
  std::vector<RequestId> finished;
};

// Continuous-batching scheduler with chunked prefill and block accounting.
// Purely logical: it never reads the clock; callers pass timestamps in.
//
// Each step is schedule() followed by commit() on the returned batch. Blocks
// for the step's growth are reserved by schedule(); commit() advances request
// progress, finishes requests and frees their blocks.
class Scheduler {
 public:
  explicit Scheduler(EngineConfig config);

  const EngineConfig& config() const { return config_; }

  // Throws LengthError when the request can never be served.
  void check_admissible(uint32_t prompt_len, uint32_t output_len) const;

  // Appends to the waiting queue in arrival order. Ids must be unique.
  void admit(RequestId id, uint32_t prompt_len, uint32_t output_len,
             Clock::time_point now = {});

  // Decodes first (one token each, oldest first), then running prefills, then
  // waiting requests in FIFO order. Preempts the most recently arrived running
  // request when a decode cannot get a block. Empty when nothing can run.
  StepBatch schedule(Clock::time_point now = {});

  StepOutcome commit(const StepBatch& batch);

  // Returns the blocks of a finished or preempted request to the pool.
  // Throws InvariantViolation on a live request or a double free.
  uint64_t free_blocks_on_finish(RequestId id);

  void record_token_time(RequestId id, Clock::time_point t);
  void record_finish_time(RequestId id, Clock::time_point t);

  // Drops bookkeeping for a finished request.
  void release(RequestId id);

  const RequestState& request(RequestId id) const;
  const RequestState* find(RequestId id) const;

  bool has_work() const { return !waiting_.empty() || !running_.empty(); }
  size_t num_waiting() const { return waiting_.size(); }
  size_t num_running() const { return running_.size(); }
  uint64_t num_finished() const { return finished_; }
  uint64_t num_preemptions() const { return preemptions_; }
  uint64_t steps_scheduled() const { return next_step_; }
  uint64_t free_blocks() const { return blocks_.free_blocks(); }
  const KvBlockManager& blocks() const { return blocks_; }

  // Running requests, oldest arrival first.
  std::vector<RequestId> running_ids() const;
  // Waiting and preempted requests in the order they will be admitted.
  std::vector<RequestId> waiting_ids() const;

 private:
  RequestState& mutable_request(RequestId id);
  void preempt(RequestId id);
  void finish(RequestState& r);
  void allocate_to(RequestState& r, uint64_t tokens_held_after_step);
  uint32_t fit_prefill_chunk(const RequestState& r, uint32_t chunk) const;
  StepBatch try_schedule(Clock::time_point now);

  EngineConfig config_;
  KvBlockManager blocks_;
  std::unordered_map<RequestId, RequestState> requests_;
  std::map<uint64_t, RequestId> waiting_;  // keyed by arrival_seq
  std::map<uint64_t, RequestId> running_;  // keyed by arrival_seq
  uint64_t next_arrival_ = 0;
  uint64_t next_step_ = 0;
  uint64_t finished_ = 0;
  uint64_t preemptions_ = 0;
  bool pending_commit_ = false;
};

}  // namespace serve_emu
