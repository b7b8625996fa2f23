// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

// Drives a Scheduler through randomized arrivals on a logical clock and checks
// the scheduling invariants after every step.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "serve_emu/engine/scheduler.h"

namespace serve_emu::testing {

struct HarnessRequest {
  uint64_t arrive_at_step = 0;
  uint32_t prompt = 0;
  uint32_t output = 0;
};

struct HarnessReport {
  std::vector<std::string> violations;
  uint64_t steps = 0;
  uint64_t preemptions = 0;
  uint64_t finished = 0;
  uint64_t tokens = 0;
  bool ok() const { return violations.empty(); }
};

inline std::vector<HarnessRequest> random_requests(std::mt19937_64& rng,
                                                   const EngineConfig& cfg,
                                                   size_t n,
                                                   uint64_t spread_steps) {
  std::uniform_int_distribution<uint64_t> at(0, spread_steps);
  std::uniform_int_distribution<uint32_t> prompt(1, cfg.max_model_len / 2);
  std::vector<HarnessRequest> out;
  const uint64_t cap_tokens = cfg.num_gpu_blocks * cfg.block_size;
  while (out.size() < n) {
    HarnessRequest r{at(rng), prompt(rng), 0};
    std::uniform_int_distribution<uint32_t> output(1, cfg.max_model_len - r.prompt);
    r.output = output(rng);
    if (r.prompt + r.output > cap_tokens) continue;
    out.push_back(r);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.arrive_at_step < b.arrive_at_step;
  });
  return out;
}

inline HarnessReport run_scheduler_harness(const EngineConfig& cfg,
                                           const std::vector<HarnessRequest>& reqs,
                                           uint64_t max_steps = 1'000'000) {
  HarnessReport rep;
  auto fail = [&](const std::string& what) {
    if (rep.violations.size() < 20) {
      rep.violations.push_back("step " + std::to_string(rep.steps) + ": " + what);
    }
  };
  Scheduler sched(cfg);
  const Clock::time_point t0{};
  std::vector<RequestId> ids;  // arrival order
  std::set<uint64_t> ever_scheduled;
  size_t next = 0;
  uint64_t tick = 0;

  while (next < reqs.size() || sched.has_work()) {
    if (tick > max_steps) {
      fail("no progress");
      break;
    }
    const auto now = t0 + std::chrono::microseconds(tick);
    while (next < reqs.size() && reqs[next].arrive_at_step <= tick) {
      const RequestId id{next + 1};
      sched.admit(id, reqs[next].prompt, reqs[next].output, now);
      ids.push_back(id);
      ++next;
    }
    ++tick;
    const StepBatch batch = sched.schedule(now);
    if (batch.empty()) {
      if (sched.num_running() > 0) fail("empty batch with running requests");
      continue;
    }
    ++rep.steps;

    // Budget respect.
    if (batch.total_tokens > cfg.max_num_batched_tokens) fail("token budget");
    if (batch.concurrency() > cfg.max_num_seqs) fail("sequence budget");
    uint32_t tt = 0;
    bool has_prefill = false;
    for (const auto& e : batch.entries) {
      tt += e.chunk_tokens;
      has_prefill |= e.kind == EntryKind::kPrefill;
      if (e.kind == EntryKind::kDecode && e.chunk_tokens != 1) {
        fail("decode entry with chunk != 1");
      }
    }
    if (tt != batch.total_tokens) fail("total_tokens != sum of chunks");
    // Phase labeling.
    if ((batch.phase == StepPhase::kDecodeOnly) == has_prefill) {
      fail("phase label disagrees with batch contents");
    }
    // FIFO admission: a request is first scheduled only after every earlier
    // arrival has been scheduled at least once.
    for (const auto& e : batch.entries) {
      if (ever_scheduled.insert(e.id.value).second) {
        for (uint64_t earlier = 1; earlier < e.id.value; ++earlier) {
          if (!ever_scheduled.contains(earlier)) {
            fail("request " + std::to_string(e.id.value) +
                 " scheduled before earlier arrival " + std::to_string(earlier));
            break;
          }
        }
      }
    }

    const StepOutcome out = sched.commit(batch);
    for (const auto& em : out.emissions) {
      sched.record_token_time(em.id, now);
      ++rep.tokens;
    }
    for (const auto& id : out.finished) {
      const RequestState& r = sched.request(id);
      if (r.generated != r.target_output_len ||
          r.token_times.size() != r.target_output_len) {
        fail("request " + std::to_string(id.value) + " token count");
      }
      for (size_t i = 1; i < r.token_times.size(); ++i) {
        if (!(r.token_times[i] > r.token_times[i - 1])) {
          fail("token times not strictly increasing");
          break;
        }
      }
      sched.release(id);
      ++rep.finished;
    }

    // Block conservation over live requests.
    uint64_t held = 0;
    for (const auto& id : sched.running_ids()) {
      held += sched.request(id).allocated_blocks;
    }
    for (const auto& id : sched.waiting_ids()) {
      held += sched.request(id).allocated_blocks;
    }
    if (held + sched.free_blocks() != cfg.num_gpu_blocks) {
      fail("block conservation: held " + std::to_string(held) + " + free " +
           std::to_string(sched.free_blocks()));
    }
    if (held != sched.blocks().used_blocks()) fail("block table drift");
  }
  rep.preemptions = sched.num_preemptions();
  if (rep.finished != reqs.size()) fail("not every request finished");
  if (sched.free_blocks() != cfg.num_gpu_blocks) fail("blocks leaked at end");
  return rep;
}

// Two long requests that cannot both hold their full KV footprint.
inline EngineConfig forced_preemption_config() {
  EngineConfig cfg;
  cfg.block_size = 16;
  cfg.num_gpu_blocks = 24;  // 384 tokens
  cfg.max_model_len = 512;
  cfg.max_num_batched_tokens = 128;
  cfg.max_num_seqs = 8;
  return cfg;
}

inline std::vector<HarnessRequest> forced_preemption_requests() {
  // Each needs ceil(300 / 16) = 19 blocks at completion; 2 x 19 > 24.
  return {{0, 100, 200}, {0, 100, 200}};
}

}  // namespace serve_emu::testing
