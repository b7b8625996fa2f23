// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/engine/engine.h"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

namespace serve_emu {

namespace {

int64_t to_ns(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             t.time_since_epoch())
      .count();
}

Clock::duration to_duration(double seconds) {
  return std::chrono::ceil<Clock::duration>(
      std::chrono::duration<double>(seconds));
}

}  // namespace

Engine::Engine(Options options, std::unique_ptr<LatencyBackend> backend)
    : options_(std::move(options)),
      backend_(std::move(backend)),
      rng_(options_.seed),
      scheduler_(options_.config) {
  if (!backend_) throw std::invalid_argument("engine requires a backend");
  backend_name_ = backend_->name();
  stats_.num_gpu_blocks = options_.config.num_gpu_blocks;
  stats_.free_blocks = options_.config.num_gpu_blocks;
  if (options_.trace_path) {
    trace_file_.open(*options_.trace_path, std::ios::out | std::ios::trunc);
    if (!trace_file_) {
      throw std::runtime_error("cannot open trace file " +
                               options_.trace_path->string());
    }
  }
}

Engine::~Engine() { stop(); }

void Engine::start() {
  if (running_.exchange(true)) return;
  started_at_ = Clock::now();
  thread_ = std::thread([this] { run(); });
}

void Engine::stop() {
  {
    std::lock_guard lk(mu_);
    stop_requested_ = true;
  }
  inbox_cv_.notify_all();
  if (thread_.joinable()) thread_.join();
  running_ = false;
}

RequestId Engine::submit(Submission submission) {
  scheduler_.check_admissible(submission.prompt_tokens, submission.max_tokens);
  const RequestId id{next_id_.fetch_add(1)};
  {
    std::lock_guard lk(mu_);
    if (stats_.failed) throw EngineFailure("engine aborted: " + stats_.failure);
    if (stop_requested_) throw EngineFailure("engine stopped");
    inbox_.push_back({id, std::move(submission)});
    ++outstanding_;
  }
  inbox_cv_.notify_one();
  return id;
}

EngineStats Engine::stats() const {
  std::lock_guard lk(mu_);
  EngineStats s = stats_;
  s.waiting += inbox_.size();
  if (running_) {
    s.uptime_s =
        std::chrono::duration<double>(Clock::now() - started_at_).count();
  }
  return s;
}

bool Engine::live() const {
  std::lock_guard lk(mu_);
  return running_ && !stats_.failed && !stop_requested_;
}

std::vector<StepRecord> Engine::drain_steps() {
  std::lock_guard lk(mu_);
  std::vector<StepRecord> out;
  out.swap(step_records_);
  return out;
}

bool Engine::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lk(mu_);
  return idle_cv_.wait_for(lk, timeout,
                           [&] { return outstanding_ == 0 || stats_.failed; }) &&
         !stats_.failed;
}

void Engine::admit_pending() {
  std::deque<Pending> incoming;
  {
    std::lock_guard lk(mu_);
    incoming.swap(inbox_);
  }
  const auto now = Clock::now();
  const uint64_t step = scheduler_.steps_scheduled();
  for (auto& p : incoming) {
    observers_[p.id] = p.submission.observer;
    if (p.submission.admit_at_step && *p.submission.admit_at_step > step) {
      auto pos = std::upper_bound(
          held_.begin(), held_.end(), *p.submission.admit_at_step,
          [](uint64_t s, const Pending& h) { return s < *h.submission.admit_at_step; });
      held_.insert(pos, std::move(p));
    } else {
      scheduler_.admit(p.id, p.submission.prompt_tokens,
                       p.submission.max_tokens, now);
    }
  }
  // With nothing runnable, logical time jumps to the next held arrival.
  if (!scheduler_.has_work() && !held_.empty()) {
    const uint64_t next = *held_.front().submission.admit_at_step;
    while (!held_.empty() && *held_.front().submission.admit_at_step == next) {
      auto& h = held_.front();
      scheduler_.admit(h.id, h.submission.prompt_tokens, h.submission.max_tokens,
                       now);
      held_.erase(held_.begin());
    }
  }
  while (!held_.empty() && *held_.front().submission.admit_at_step <= step) {
    auto& h = held_.front();
    scheduler_.admit(h.id, h.submission.prompt_tokens, h.submission.max_tokens,
                     now);
    held_.erase(held_.begin());
  }
}

std::optional<Engine::Prepared> Engine::prepare() {
  admit_pending();
  const auto now = Clock::now();
  StepBatch batch = scheduler_.schedule(now);
  if (batch.empty()) return std::nullopt;
  Prepared p;
  p.outcome = scheduler_.commit(batch);
  const OracleQuery query{batch.total_tokens, batch.concurrency(), batch.phase};
  try {
    p.latency_s = backend_->latency(query, rng_);
  } catch (const NoDataError& e) {
    fail(std::string("latency backend has no data for step ") +
         std::to_string(batch.step_index) + " " + describe(query) + ": " +
         e.what());
    return std::nullopt;
  }
  if (!(p.latency_s > 0.0) || !std::isfinite(p.latency_s)) {
    fail("latency backend returned a nonpositive latency for " +
         describe(query));
    return std::nullopt;
  }
  p.batch = std::move(batch);
  p.prepared_at = Clock::now();
  return p;
}

void Engine::apply(Prepared& step) {
  const auto now = Clock::now();
  const int64_t now_ns = to_ns(now);
  uint64_t finished = 0;
  for (const auto& e : step.outcome.emissions) {
    scheduler_.record_token_time(e.id, now);
    ++tokens_emitted_;
    auto obs = observers_.find(e.id);
    if (obs != observers_.end() && obs->second) {
      obs->second->on_token({e.id, e.token_index, now_ns});
    }
    if (!e.finished) continue;
    scheduler_.record_finish_time(e.id, now);
    const RequestState& r = scheduler_.request(e.id);
    if (obs != observers_.end()) {
      if (obs->second) {
        obs->second->on_finish({e.id, r.prompt_len, r.generated, now_ns});
      }
      observers_.erase(obs);
    }
    scheduler_.release(e.id);
    ++finished;
  }

  StepRecord record;
  record.trace.step_index = step.batch.step_index;
  record.trace.total_tokens = step.batch.total_tokens;
  record.trace.concurrency = step.batch.concurrency();
  record.trace.phase = step.batch.phase;
  record.trace.latency_s =
      std::chrono::duration<double>(now - step.started_at).count();
  record.sampled_latency_s = step.latency_s;
  record.prepared_at = step.prepared_at;
  record.started_at = step.started_at;
  record.applied_at = now;

  if (trace_file_.is_open()) {
    trace_file_ << to_json_line(record.trace) << '\n';
    if (step.batch.step_index % 64 == 0) trace_file_.flush();
  }

  {
    std::lock_guard lk(mu_);
    if (options_.record_steps) {
      record.entries = step.batch.entries;
      step_records_.push_back(std::move(record));
    }
    stats_.steps_executed += 1;
    stats_.finished += finished;
    outstanding_ -= std::min(outstanding_, finished);
  }
  publish_stats();
}

void Engine::publish_stats() {
  {
    std::lock_guard lk(mu_);
    stats_.running = scheduler_.num_running();
    stats_.waiting = scheduler_.num_waiting() + held_.size();
    stats_.free_blocks = scheduler_.free_blocks();
    stats_.preemptions = scheduler_.num_preemptions();
    stats_.tokens_emitted = tokens_emitted_;
  }
  idle_cv_.notify_all();
}

void Engine::fail(const std::string& reason) {
  spdlog::error("engine abort: {}", reason);
  std::deque<Pending> incoming;
  {
    std::lock_guard lk(mu_);
    stats_.failed = true;
    stats_.failure = reason;
    incoming.swap(inbox_);
    outstanding_ = 0;
  }
  for (auto& p : incoming) observers_[p.id] = p.submission.observer;
  for (auto& [_, obs] : observers_) {
    if (obs) obs->on_abort(reason);
  }
  observers_.clear();
  held_.clear();
  idle_cv_.notify_all();
}

void Engine::run() {
  std::optional<Prepared> in_flight;
  std::optional<Prepared> next;
  auto failed = [&] {
    std::lock_guard lk(mu_);
    return stats_.failed;
  };
  auto stopping = [&] {
    std::lock_guard lk(mu_);
    return stop_requested_;
  };

  while (!stopping()) {
    if (!in_flight) {
      in_flight = prepare();
      if (!in_flight) {
        if (failed()) break;
        publish_stats();
        std::unique_lock lk(mu_);
        inbox_cv_.wait(lk, [&] { return stop_requested_ || !inbox_.empty(); });
        continue;
      }
      in_flight->started_at = Clock::now();
    }
    if (options_.config.async_scheduling && !next) {
      next = prepare();
      if (failed()) break;
    }
    const auto deadline =
        in_flight->started_at + to_duration(in_flight->latency_s);
    // The result must never be delivered early.
    while (Clock::now() < deadline) std::this_thread::sleep_until(deadline);
    apply(*in_flight);
    in_flight = std::move(next);
    next.reset();
    if (in_flight) in_flight->started_at = Clock::now();
  }

  if (trace_file_.is_open()) trace_file_.flush();
  if (!failed()) {
    std::deque<Pending> incoming;
    {
      std::lock_guard lk(mu_);
      incoming.swap(inbox_);
      outstanding_ = 0;
    }
    for (auto& p : incoming) observers_[p.id] = p.submission.observer;
    for (auto& [_, obs] : observers_) {
      if (obs) obs->on_abort("engine stopped");
    }
    observers_.clear();
    idle_cv_.notify_all();
  }
}

}  // namespace serve_emu
