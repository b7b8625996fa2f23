// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/engine/scheduler.h"

#include <algorithm>
#include <string>

namespace serve_emu {

std::string_view to_string(RequestPhase phase) {
  switch (phase) {
    case RequestPhase::kWaiting:
      return "waiting";
    case RequestPhase::kPrefilling:
      return "prefilling";
    case RequestPhase::kDecoding:
      return "decoding";
    case RequestPhase::kPreempted:
      return "preempted";
    case RequestPhase::kFinished:
      return "finished";
  }
  return "unknown";
}

Scheduler::Scheduler(EngineConfig config)
    : config_(config), blocks_(config.num_gpu_blocks) {
  config_.validate();
}

void Scheduler::check_admissible(uint32_t prompt_len,
                                 uint32_t output_len) const {
  if (prompt_len < 1) throw LengthError("prompt must contain at least 1 token");
  if (output_len < 1) throw LengthError("max_tokens must be at least 1");
  const uint64_t total = uint64_t{prompt_len} + output_len;
  if (total > config_.max_model_len) {
    throw LengthError("prompt_tokens + max_tokens = " + std::to_string(total) +
                      " exceeds max_model_len " +
                      std::to_string(config_.max_model_len));
  }
  if (config_.blocks_for(total) > config_.num_gpu_blocks) {
    throw LengthError("request needs " +
                      std::to_string(config_.blocks_for(total)) +
                      " KV blocks but only " +
                      std::to_string(config_.num_gpu_blocks) + " exist");
  }
}

void Scheduler::admit(RequestId id, uint32_t prompt_len, uint32_t output_len,
                      Clock::time_point now) {
  check_admissible(prompt_len, output_len);
  if (requests_.contains(id)) {
    throw InvariantViolation("duplicate request id " + std::to_string(id.value));
  }
  RequestState r;
  r.id = id;
  r.arrival_seq = next_arrival_++;
  r.prompt_len = prompt_len;
  r.target_output_len = output_len;
  r.arrival = now;
  waiting_.emplace(r.arrival_seq, id);
  requests_.emplace(id, std::move(r));
}

RequestState& Scheduler::mutable_request(RequestId id) {
  auto it = requests_.find(id);
  if (it == requests_.end()) {
    throw InvariantViolation("unknown request " + std::to_string(id.value));
  }
  return it->second;
}

const RequestState& Scheduler::request(RequestId id) const {
  const RequestState* r = find(id);
  if (!r) throw InvariantViolation("unknown request " + std::to_string(id.value));
  return *r;
}

const RequestState* Scheduler::find(RequestId id) const {
  auto it = requests_.find(id);
  return it == requests_.end() ? nullptr : &it->second;
}

std::vector<RequestId> Scheduler::running_ids() const {
  std::vector<RequestId> out;
  for (const auto& [_, id] : running_) out.push_back(id);
  return out;
}

std::vector<RequestId> Scheduler::waiting_ids() const {
  std::vector<RequestId> out;
  for (const auto& [_, id] : waiting_) out.push_back(id);
  return out;
}

void Scheduler::allocate_to(RequestState& r, uint64_t tokens_held_after_step) {
  const uint64_t target = config_.blocks_for(tokens_held_after_step);
  if (target > r.allocated_blocks) {
    blocks_.allocate(r.id, target - r.allocated_blocks);
    r.allocated_blocks = target;
  }
}

uint64_t Scheduler::free_blocks_on_finish(RequestId id) {
  RequestState& r = mutable_request(id);
  if (r.phase != RequestPhase::kFinished && r.phase != RequestPhase::kPreempted) {
    throw InvariantViolation("freeing blocks of request " +
                             std::to_string(id.value) + " in phase " +
                             std::string(to_string(r.phase)));
  }
  const uint64_t freed = blocks_.release(id);
  if (freed != r.allocated_blocks) {
    throw InvariantViolation("block table disagrees with request state");
  }
  r.allocated_blocks = 0;
  return blocks_.free_blocks();
}

void Scheduler::preempt(RequestId id) {
  RequestState& r = mutable_request(id);
  running_.erase(r.arrival_seq);
  r.phase = RequestPhase::kPreempted;
  if (r.allocated_blocks > 0) free_blocks_on_finish(id);
  // Recomputation: the prompt is prefilled again from the start.
  r.prefill_progress = 0;
  ++r.num_preemptions;
  ++preemptions_;
  waiting_.emplace(r.arrival_seq, id);
}

void Scheduler::finish(RequestState& r) {
  running_.erase(r.arrival_seq);
  r.phase = RequestPhase::kFinished;
  free_blocks_on_finish(r.id);
  ++finished_;
}

uint32_t Scheduler::fit_prefill_chunk(const RequestState& r,
                                      uint32_t chunk) const {
  const uint64_t held = uint64_t{r.prefill_progress} + r.generated;
  const uint64_t capacity =
      (r.allocated_blocks + blocks_.free_blocks()) * config_.block_size;
  if (capacity <= held) return 0;
  uint64_t k = std::min<uint64_t>(chunk, capacity - held);
  const uint32_t remaining = r.prompt_len - r.prefill_progress;
  // Completing the prompt also stores the first generated token.
  if (k == remaining && held + k + 1 > capacity) --k;
  return static_cast<uint32_t>(k);
}

StepBatch Scheduler::try_schedule(Clock::time_point now) {
  StepBatch batch;
  uint32_t budget = config_.max_num_batched_tokens;
  const size_t max_seqs = config_.max_num_seqs;

  // 1. One token for every decoding request, oldest first.
  for (auto it = running_.begin(); it != running_.end();) {
    if (budget == 0 || batch.entries.size() >= max_seqs) break;
    RequestState& r = mutable_request(it->second);
    if (r.phase != RequestPhase::kDecoding) {
      ++it;
      continue;
    }
    const uint64_t held_after = uint64_t{r.prefill_progress} + r.generated + 1;
    const uint64_t need = config_.blocks_for(held_after) - r.allocated_blocks;
    bool self_preempted = false;
    while (!blocks_.can_allocate(need)) {
      // The newest running request is never one already in this batch: all
      // scheduled decodes are older than r.
      const RequestId victim = running_.rbegin()->second;
      if (victim == r.id) {
        self_preempted = true;
        break;
      }
      preempt(victim);
    }
    if (self_preempted) {
      // r is the newest running request; nothing after it remains.
      preempt(r.id);
      break;
    }
    allocate_to(r, held_after);
    batch.entries.push_back({r.id, 1, EntryKind::kDecode});
    --budget;
    ++it;
  }

  // 2. Partially prefilled running requests, FIFO.
  for (const auto& [_, id] : running_) {
    if (budget == 0 || batch.entries.size() >= max_seqs) break;
    RequestState& r = mutable_request(id);
    if (r.phase != RequestPhase::kPrefilling) continue;
    const uint32_t remaining = r.prompt_len - r.prefill_progress;
    const uint32_t chunk = fit_prefill_chunk(r, std::min(remaining, budget));
    if (chunk == 0) break;
    const bool completes = chunk == remaining;
    allocate_to(r, uint64_t{r.prefill_progress} + chunk + r.generated +
                       (completes ? 1 : 0));
    batch.entries.push_back({r.id, chunk, EntryKind::kPrefill});
    budget -= chunk;
  }

  // 3. Waiting and preempted requests, FIFO; stop at the first that does not
  // fit so admission order is preserved.
  while (!waiting_.empty() && budget > 0 && batch.entries.size() < max_seqs &&
         running_.size() < max_seqs) {
    RequestState& r = mutable_request(waiting_.begin()->second);
    const uint32_t chunk = std::min(r.prompt_len, budget);
    const bool completes = chunk == r.prompt_len;
    const uint64_t held_after =
        uint64_t{chunk} + r.generated + (completes ? 1 : 0);
    if (!blocks_.can_allocate(config_.blocks_for(held_after))) break;
    waiting_.erase(waiting_.begin());
    running_.emplace(r.arrival_seq, r.id);
    r.phase = RequestPhase::kPrefilling;
    r.prefill_progress = 0;
    if (!r.first_scheduled) r.first_scheduled = now;
    allocate_to(r, held_after);
    batch.entries.push_back({r.id, chunk, EntryKind::kPrefill});
    budget -= chunk;
  }

  for (const auto& e : batch.entries) {
    batch.total_tokens += e.chunk_tokens;
    if (e.kind == EntryKind::kPrefill) batch.phase = StepPhase::kPrefillOrMixed;
  }
  return batch;
}

StepBatch Scheduler::schedule(Clock::time_point now) {
  if (pending_commit_) {
    throw InvariantViolation("schedule() called before commit()");
  }
  StepBatch batch = try_schedule(now);
  // Running prefills can deadlock on blocks when no decode is making progress;
  // give their memory back newest first until the oldest can proceed.
  while (batch.empty() && !running_.empty()) {
    preempt(running_.rbegin()->second);
    batch = try_schedule(now);
  }
  if (!batch.empty()) {
    batch.step_index = next_step_++;
    pending_commit_ = true;
  }
  return batch;
}

StepOutcome Scheduler::commit(const StepBatch& batch) {
  if (!pending_commit_ || batch.step_index + 1 != next_step_) {
    throw InvariantViolation("commit() of a batch that is not pending");
  }
  pending_commit_ = false;
  StepOutcome out;
  out.step_index = batch.step_index;
  for (const auto& e : batch.entries) {
    RequestState& r = mutable_request(e.id);
    bool emits = false;
    if (e.kind == EntryKind::kDecode) {
      emits = true;
    } else {
      r.prefill_progress += e.chunk_tokens;
      if (r.prefill_progress == r.prompt_len) {
        r.phase = RequestPhase::kDecoding;
        emits = true;
      }
    }
    if (!emits) continue;
    const uint32_t index = r.generated++;
    const bool done = r.generated == r.target_output_len;
    out.emissions.push_back({r.id, index, done});
    if (done) {
      finish(r);
      out.finished.push_back(r.id);
    }
  }
  return out;
}

void Scheduler::record_token_time(RequestId id, Clock::time_point t) {
  mutable_request(id).token_times.push_back(t);
}

void Scheduler::record_finish_time(RequestId id, Clock::time_point t) {
  mutable_request(id).finish = t;
}

void Scheduler::release(RequestId id) {
  const RequestState& r = request(id);
  if (r.phase != RequestPhase::kFinished) {
    throw InvariantViolation("releasing unfinished request " +
                             std::to_string(id.value));
  }
  requests_.erase(id);
}

}  // namespace serve_emu
