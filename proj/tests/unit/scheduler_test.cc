// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "../support/scheduler_harness.h"
#include "serve_emu/engine/kv_block_manager.h"
#include "serve_emu/engine/latency_backend.h"
#include "serve_emu/engine/scheduler.h"

namespace serve_emu {
namespace {

EngineConfig small_config(uint32_t budget = 64) {
  EngineConfig c;
  c.block_size = 16;
  c.num_gpu_blocks = 256;
  c.max_model_len = 4096;
  c.max_num_batched_tokens = budget;
  c.max_num_seqs = 16;
  return c;
}

// Runs steps until every listed request is decoding.
void run_until_decoding(Scheduler& s, std::initializer_list<uint64_t> ids) {
  for (int i = 0; i < 1000; ++i) {
    bool all = true;
    for (uint64_t id : ids) {
      all &= s.request(RequestId{id}).phase == RequestPhase::kDecoding;
    }
    if (all) return;
    s.commit(s.schedule());
  }
  FAIL() << "requests never reached decoding";
}

TEST(GroundTruthTest, NoiselessArithmetic) {
  GroundTruthParams p{0.002, 0.00005, 0.0001, 1.2, 0.0};
  Rng rng(1);
  // 0.002 + 3 * 0.00005 + 3 * 0.0001
  EXPECT_NEAR(ground_truth_latency(3, 3, StepPhase::kDecodeOnly, p, rng), 0.00245,
              1e-15);
  EXPECT_NEAR(ground_truth_latency(3, 3, StepPhase::kPrefillOrMixed, p, rng),
              0.00245 * 1.2, 1e-15);
}

TEST(GroundTruthTest, NoiselessIsDeterministic) {
  GroundTruthParams p;
  p.noise_cv = 0.0;
  Rng a(1), b(2);
  EXPECT_EQ(ground_truth_latency(100, 7, StepPhase::kDecodeOnly, p, a),
            ground_truth_latency(100, 7, StepPhase::kDecodeOnly, p, b));
}

TEST(GroundTruthTest, NoiseCoefficientOfVariation) {
  GroundTruthParams p;
  p.noise_cv = 0.05;
  Rng rng(3);
  double sum = 0, sq = 0;
  const int n = 10'000;
  for (int i = 0; i < n; ++i) {
    const double x = ground_truth_latency(64, 8, StepPhase::kDecodeOnly, p, rng);
    ASSERT_GT(x, 0.0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
  EXPECT_NEAR(sd / mean, 0.05, 0.01);
}

TEST(GroundTruthTest, Validation) {
  GroundTruthParams p;
  p.mixed_multiplier = 0.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {};
  p.noise_cv = -0.1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(KvBlockManagerTest, AllocateReleaseAndDoubleFree) {
  KvBlockManager m(10);
  m.allocate(RequestId{1}, 3);
  m.allocate(RequestId{1}, 2);
  EXPECT_EQ(m.allocated(RequestId{1}), 5u);
  EXPECT_EQ(m.free_blocks(), 5u);
  EXPECT_THROW(m.allocate(RequestId{2}, 6), InvariantViolation);
  EXPECT_EQ(m.release(RequestId{1}), 5u);
  EXPECT_EQ(m.free_blocks(), 10u);
  EXPECT_THROW(m.release(RequestId{1}), InvariantViolation);
}

TEST(AdmissionTest, LengthLimits) {
  Scheduler s(small_config());
  s.admit(RequestId{1}, 100, 50);
  EXPECT_EQ(s.request(RequestId{1}).phase, RequestPhase::kWaiting);
  EXPECT_THROW(s.admit(RequestId{2}, 4090, 10), LengthError);
  EXPECT_THROW(s.admit(RequestId{3}, 0, 10), LengthError);
  EXPECT_THROW(s.admit(RequestId{4}, 10, 0), LengthError);
}

TEST(AdmissionTest, RejectsRequestsLargerThanTheCache) {
  EngineConfig c = small_config();
  c.num_gpu_blocks = 4;  // 64 tokens
  Scheduler s(c);
  EXPECT_THROW(s.admit(RequestId{1}, 60, 10), LengthError);
  EXPECT_NO_THROW(s.admit(RequestId{2}, 50, 14));
}

TEST(AdmissionTest, FifoQueueOrder) {
  Scheduler s(small_config());
  s.admit(RequestId{7}, 10, 5);
  s.admit(RequestId{3}, 10, 5);
  EXPECT_EQ(s.waiting_ids(), (std::vector<RequestId>{RequestId{7}, RequestId{3}}));
}

TEST(ScheduleTest, EmptyWhenIdle) {
  Scheduler s(small_config());
  EXPECT_TRUE(s.schedule().empty());
}

TEST(ScheduleTest, ChunkedPrefillUsesBudget) {
  Scheduler s(small_config(64));
  s.admit(RequestId{1}, 100, 5);
  const auto b = s.schedule();
  ASSERT_EQ(b.entries.size(), 1u);
  EXPECT_EQ(b.entries[0].kind, EntryKind::kPrefill);
  EXPECT_EQ(b.total_tokens, 64u);
  EXPECT_EQ(b.concurrency(), 1u);
  EXPECT_EQ(b.phase, StepPhase::kPrefillOrMixed);
  const auto out = s.commit(b);
  EXPECT_TRUE(out.emissions.empty());
  // The remaining 36 prompt tokens complete prefill and emit token 0.
  const auto b2 = s.schedule();
  EXPECT_EQ(b2.total_tokens, 36u);
  const auto out2 = s.commit(b2);
  ASSERT_EQ(out2.emissions.size(), 1u);
  EXPECT_EQ(out2.emissions[0].token_index, 0u);
}

TEST(ScheduleTest, DecodeOnlyBatch) {
  Scheduler s(small_config(64));
  for (uint64_t i = 1; i <= 3; ++i) s.admit(RequestId{i}, 8, 10);
  run_until_decoding(s, {1, 2, 3});
  const auto b = s.schedule();
  EXPECT_EQ(b.total_tokens, 3u);
  EXPECT_EQ(b.concurrency(), 3u);
  EXPECT_EQ(b.phase, StepPhase::kDecodeOnly);
  s.commit(b);
}

TEST(ScheduleTest, MixedBatch) {
  Scheduler s(small_config(64));
  for (uint64_t i = 1; i <= 3; ++i) s.admit(RequestId{i}, 8, 10);
  run_until_decoding(s, {1, 2, 3});
  s.admit(RequestId{4}, 10, 10);
  const auto b = s.schedule();
  EXPECT_EQ(b.total_tokens, 13u);
  EXPECT_EQ(b.concurrency(), 4u);
  EXPECT_EQ(b.phase, StepPhase::kPrefillOrMixed);
  // Decodes come first, then the new prefill.
  EXPECT_EQ(b.entries.back().id, RequestId{4});
  s.commit(b);
}

TEST(ScheduleTest, CommitMustFollowSchedule) {
  Scheduler s(small_config());
  s.admit(RequestId{1}, 8, 2);
  const auto b = s.schedule();
  s.commit(b);
  EXPECT_THROW(s.commit(b), InvariantViolation);
}

TEST(FreeBlocksTest, SeventeenTokensReturnTwoBlocks) {
  EngineConfig c = small_config();
  Scheduler s(c);
  s.admit(RequestId{1}, 16, 1);  // 16 prompt + 1 generated = 17 tokens
  const auto b = s.schedule();
  EXPECT_EQ(s.free_blocks(), c.num_gpu_blocks - 2);  // ceil(17 / 16)
  const auto out = s.commit(b);
  ASSERT_EQ(out.finished.size(), 1u);
  EXPECT_EQ(s.free_blocks(), c.num_gpu_blocks);
}

TEST(FreeBlocksTest, WaitingRequestAndDoubleFreeAreViolations) {
  Scheduler s(small_config());
  s.admit(RequestId{1}, 16, 1);
  EXPECT_THROW(s.free_blocks_on_finish(RequestId{1}), InvariantViolation);
  s.commit(s.schedule());
  // Finishing already returned the blocks.
  EXPECT_THROW(s.free_blocks_on_finish(RequestId{1}), InvariantViolation);
}

TEST(SchedulerPropertyTest, RandomizedWorkloads) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    EngineConfig c;
    c.block_size = std::uniform_int_distribution<uint32_t>(1, 32)(rng);
    c.max_model_len = std::uniform_int_distribution<uint32_t>(16, 512)(rng);
    c.num_gpu_blocks = std::uniform_int_distribution<uint64_t>(
        (c.max_model_len + c.block_size - 1) / c.block_size, 200)(rng);
    c.max_num_batched_tokens =
        std::uniform_int_distribution<uint32_t>(c.block_size, 256)(rng);
    c.max_num_seqs = std::uniform_int_distribution<uint32_t>(1, 32)(rng);
    const auto reqs = testing::random_requests(rng, c, 60, 400);
    const auto rep = testing::run_scheduler_harness(c, reqs);
    for (const auto& v : rep.violations) ADD_FAILURE() << "trial " << trial << ": " << v;
  }
}

TEST(SchedulerPropertyTest, ForcedPreemption) {
  const auto rep = testing::run_scheduler_harness(testing::forced_preemption_config(),
                                                  testing::forced_preemption_requests());
  for (const auto& v : rep.violations) ADD_FAILURE() << v;
  EXPECT_GE(rep.preemptions, 1u);
  EXPECT_EQ(rep.finished, 2u);
}

TEST(SchedulerPropertyTest, IdenticalAdmissionSequenceGivesIdenticalBatches) {
  std::mt19937_64 rng(5);
  const EngineConfig c = small_config(128);
  const auto reqs = testing::random_requests(rng, c, 80, 300);
  auto run = [&] {
    Scheduler s(c);
    std::vector<StepBatch> batches;
    size_t next = 0;
    for (uint64_t tick = 0; next < reqs.size() || s.has_work(); ++tick) {
      while (next < reqs.size() && reqs[next].arrive_at_step <= tick) {
        s.admit(RequestId{next + 1}, reqs[next].prompt, reqs[next].output);
        ++next;
      }
      auto b = s.schedule();
      if (b.empty()) continue;
      s.commit(b);
      batches.push_back(std::move(b));
    }
    return batches;
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace serve_emu
