// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <string>
#include <vector>

#include "serve_emu/engine/engine.h"

namespace serve_emu::testing {

class FixedBackend final : public LatencyBackend {
 public:
  explicit FixedBackend(double latency_s) : latency_s_(latency_s) {}
  double latency(const OracleQuery&, Rng&) override { return latency_s_; }
  std::string name() const override { return "fixed"; }

 private:
  double latency_s_;
};

// Fails on the n-th call (0-based).
class FailingBackend final : public LatencyBackend {
 public:
  explicit FailingBackend(int fail_at) : fail_at_(fail_at) {}
  double latency(const OracleQuery& q, Rng&) override {
    if (calls_++ == fail_at_) throw NoDataError("no samples for " + describe(q));
    return 0.002;
  }
  std::string name() const override { return "failing"; }

 private:
  int fail_at_;
  int calls_ = 0;
};

class RecordingObserver final : public RequestObserver {
 public:
  void on_token(const TokenEvent& e) override {
    std::lock_guard lk(mu_);
    tokens_.push_back(e);
  }
  void on_finish(const FinishEvent& e) override {
    {
      std::lock_guard lk(mu_);
      finish_ = e;
      done_ = true;
    }
    cv_.notify_all();
  }
  void on_abort(const std::string& reason) override {
    {
      std::lock_guard lk(mu_);
      abort_reason_ = reason;
      done_ = true;
    }
    cv_.notify_all();
  }

  bool wait(std::chrono::milliseconds timeout) {
    std::unique_lock lk(mu_);
    return cv_.wait_for(lk, timeout, [&] { return done_; });
  }
  std::vector<TokenEvent> tokens() const {
    std::lock_guard lk(mu_);
    return tokens_;
  }
  FinishEvent finish() const {
    std::lock_guard lk(mu_);
    return finish_;
  }
  std::string abort_reason() const {
    std::lock_guard lk(mu_);
    return abort_reason_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<TokenEvent> tokens_;
  FinishEvent finish_;
  std::string abort_reason_;
  bool done_ = false;
};

}  // namespace serve_emu::testing
