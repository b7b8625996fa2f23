// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "serve_emu/engine/latency_backend.h"
#include "serve_emu/engine/scheduler.h"

namespace serve_emu {

struct TokenEvent {
  RequestId id;
  uint32_t token_index = 0;
  int64_t emitted_at_ns = 0;  // steady clock, assigned when the step applies
};

struct FinishEvent {
  RequestId id;
  uint32_t prompt_tokens = 0;
  uint32_t completion_tokens = 0;
  int64_t finished_at_ns = 0;
};

// Receives one request's events on the engine thread. Implementations must
// not block.
class RequestObserver {
 public:
  virtual ~RequestObserver() = default;
  virtual void on_token(const TokenEvent& event) = 0;
  virtual void on_finish(const FinishEvent& event) = 0;
  virtual void on_abort(const std::string& reason) = 0;
};

struct Submission {
  uint32_t prompt_tokens = 0;
  uint32_t max_tokens = 0;
  // Replay mode: hold the request until this many steps have been scheduled,
  // giving a wall-clock independent admission sequence.
  std::optional<uint64_t> admit_at_step;
  std::shared_ptr<RequestObserver> observer;
};

// In-memory view of one executed step.
struct StepRecord {
  StepTraceRecord trace;  // latency_s is the realized wall-clock duration
  double sampled_latency_s = 0.0;
  Clock::time_point prepared_at{};
  Clock::time_point started_at{};
  Clock::time_point applied_at{};
  std::vector<StepEntry> entries;
};

struct EngineStats {
  uint64_t running = 0;
  uint64_t waiting = 0;
  uint64_t finished = 0;
  uint64_t free_blocks = 0;
  uint64_t num_gpu_blocks = 0;
  uint64_t steps_executed = 0;
  uint64_t preemptions = 0;
  uint64_t tokens_emitted = 0;
  double uptime_s = 0.0;
  bool failed = false;
  std::string failure;
};

class EngineFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Owns the scheduler on a dedicated thread. Each step's latency comes from the
// backend and the step's result is applied only once that much wall-clock time
// has passed since the step started.
//
// With async scheduling the next step is scheduled while the current one is
// still executing; outputs are synthetic, so its composition is exact. At most
// one step is in flight and one prepared. In blocking mode the next step is
// scheduled only after the current one is applied.
class Engine {
 public:
  struct Options {
    EngineConfig config;
    uint64_t seed = 0;
    std::optional<std::filesystem::path> trace_path;
    bool record_steps = false;  // keep StepRecords for drain_steps()
  };

  Engine(Options options, std::unique_ptr<LatencyBackend> backend);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void start();
  void stop();

  // Thread-safe. Throws LengthError for requests that can never be served and
  // EngineFailure after the engine aborted.
  RequestId submit(Submission submission);

  EngineStats stats() const;
  bool live() const;
  const EngineConfig& config() const { return options_.config; }
  const std::string& backend_name() const { return backend_name_; }

  // Returns and clears the recorded steps (requires Options::record_steps).
  std::vector<StepRecord> drain_steps();

  // Blocks until every submitted request has finished, the engine failed, or
  // the timeout passed. Returns true when idle.
  bool wait_idle(std::chrono::milliseconds timeout);

 private:
  struct Pending {
    RequestId id;
    Submission submission;
  };
  struct Prepared {
    StepBatch batch;
    StepOutcome outcome;
    double latency_s = 0.0;
    Clock::time_point prepared_at{};
    Clock::time_point started_at{};
  };

  void run();
  void admit_pending();
  std::optional<Prepared> prepare();
  void apply(Prepared& step);
  void fail(const std::string& reason);
  void publish_stats();

  Options options_;
  std::unique_ptr<LatencyBackend> backend_;
  std::string backend_name_;
  Rng rng_;
  Clock::time_point started_at_{};

  // Engine-thread state.
  Scheduler scheduler_;
  std::unordered_map<RequestId, std::shared_ptr<RequestObserver>> observers_;
  std::vector<Pending> held_;  // replay-mode submissions, by admit_at_step
  std::ofstream trace_file_;
  uint64_t tokens_emitted_ = 0;

  // Cross-thread state.
  mutable std::mutex mu_;
  std::condition_variable inbox_cv_;
  std::condition_variable idle_cv_;
  std::deque<Pending> inbox_;
  std::vector<StepRecord> step_records_;
  EngineStats stats_;
  uint64_t outstanding_ = 0;  // submitted and not yet finished
  bool stop_requested_ = false;
  std::atomic<uint64_t> next_id_{1};
  std::atomic<bool> running_{false};
  std::thread thread_;
};

}  // namespace serve_emu
