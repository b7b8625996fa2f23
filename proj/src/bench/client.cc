// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/bench/client.h"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"
#include "serve_emu/bench/arrivals.h"

namespace serve_emu {
namespace {

using json = nlohmann::json;
using BenchClock = std::chrono::steady_clock;

void configure(httplib::Client& cli) {
  cli.set_tcp_nodelay(true);
  cli.set_connection_timeout(5, 0);
  // Streams may sit in a queue for a long time under load.
  cli.set_read_timeout(600, 0);
  cli.set_write_timeout(30, 0);
}

// Completed or failed request, handed from a stream thread to the coordinator.
struct Outcome {
  size_t index = 0;
  std::optional<RequestRecord> record;
  std::string error;
};

class Mailbox {
 public:
  void post(Outcome o) {
    {
      std::lock_guard lk(mu_);
      items_.push_back(std::move(o));
    }
    cv_.notify_one();
  }
  std::optional<Outcome> take_until(BenchClock::time_point deadline) {
    std::unique_lock lk(mu_);
    if (!cv_.wait_until(lk, deadline, [&] { return !items_.empty(); })) {
      return std::nullopt;
    }
    Outcome o = std::move(items_.front());
    items_.erase(items_.begin());
    return o;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Outcome> items_;
};

// Incremental SSE parser over "data: <payload>\n\n" frames.
class SseParser {
 public:
  template <typename F>
  bool feed(const char* data, size_t n, F&& on_event) {
    buf_.append(data, n);
    size_t pos;
    while ((pos = buf_.find("\n\n")) != std::string::npos) {
      std::string frame = buf_.substr(0, pos);
      buf_.erase(0, pos + 2);
      std::istringstream lines(frame);
      std::string line;
      while (std::getline(lines, line)) {
        if (line.rfind("data:", 0) != 0) continue;
        std::string payload = line.substr(5);
        if (!payload.empty() && payload.front() == ' ') payload.erase(0, 1);
        if (!on_event(payload)) return false;
      }
    }
    return true;
  }
  const std::string& remainder() const { return buf_; }

 private:
  std::string buf_;
};

Outcome run_one(const std::string& url, size_t index, const WorkloadEntry& entry,
                BenchClock::time_point t0) {
  Outcome out;
  out.index = index;
  auto since = [&] {
    return std::chrono::duration<double>(BenchClock::now() - t0).count();
  };

  httplib::Client cli(url);
  configure(cli);
  json body = {{"prompt_tokens", entry.prompt_tokens},
               {"max_tokens", entry.output_tokens},
               {"stream", true},
               {"ignore_eos", true}};

  RequestRecord rec;
  rec.prompt_tokens = entry.prompt_tokens;
  bool finished = false;
  std::string stream_error;
  SseParser parser;

  httplib::Request req;
  req.method = "POST";
  req.path = "/v1/completions";
  req.body = body.dump();
  req.set_header("Content-Type", "application/json");
  req.content_receiver = [&](const char* data, size_t n, uint64_t, uint64_t) {
    const double now = since();
    return parser.feed(data, n, [&](const std::string& payload) {
      if (payload == "[DONE]") return true;
      json ev;
      try {
        ev = json::parse(payload);
      } catch (const json::exception&) {
        return true;  // error bodies on non-200 are handled after send()
      }
      if (ev.contains("error")) {
        stream_error = ev["error"].value("message", std::string("stream error"));
        return false;
      }
      if (ev.contains("token_index")) {
        rec.token_times.push_back(now);
      } else if (ev.contains("finish_reason")) {
        rec.finish_time = now;
        rec.output_tokens = ev.value("completion_tokens", 0u);
        finished = true;
      }
      return true;
    });
  };

  rec.send_time = since();
  httplib::Response res;
  httplib::Error err = httplib::Error::Success;
  const bool ok = cli.send(req, res, err);
  if (!ok && err != httplib::Error::Canceled) {
    out.error = "request " + std::to_string(index) +
                ": connection failure: " + httplib::to_string(err);
    return out;
  }
  if (res.status != 200) {
    out.error = "request " + std::to_string(index) + ": HTTP " +
                std::to_string(res.status) + " " + parser.remainder();
    return out;
  }
  if (!stream_error.empty()) {
    out.error = "request " + std::to_string(index) + ": " + stream_error;
    return out;
  }
  if (!finished || rec.token_times.empty()) {
    out.error = "request " + std::to_string(index) + ": stream ended early";
    return out;
  }
  rec.first_token_time = rec.token_times.front();
  out.record = std::move(rec);
  return out;
}

json get_json(const std::string& url, const std::string& path, bool post) {
  httplib::Client cli(url);
  configure(cli);
  auto res = post ? cli.Post(path) : cli.Get(path);
  if (!res) {
    throw std::runtime_error(path + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw std::runtime_error(path + ": HTTP " + std::to_string(res->status) +
                             " " + res->body);
  }
  return post ? json(res->body) : json::parse(res->body);
}

}  // namespace

BenchResult run_benchmark(const std::string& url, const WorkloadSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto offsets = generate_arrivals(spec, rng);
  const auto entries = spec.selected();

  BenchResult result;
  std::vector<std::optional<RequestRecord>> slots(entries.size());
  Mailbox mailbox;
  std::atomic<bool> abort{false};
  std::vector<std::thread> streams;
  streams.reserve(entries.size());
  size_t pending = 0;

  auto collect = [&](Outcome o) {
    --pending;
    if (o.record) {
      slots[o.index] = std::move(o.record);
    } else if (result.valid) {
      result.valid = false;
      result.error = o.error;
      abort = true;
    }
  };

  const auto t0 = BenchClock::now();
  for (size_t i = 0; i < entries.size() && !abort; ++i) {
    const auto due =
        t0 + std::chrono::duration_cast<BenchClock::duration>(
                 std::chrono::duration<double>(offsets[i]));
    // Collect finished streams while waiting for the next send time.
    while (!abort && BenchClock::now() < due) {
      if (auto o = mailbox.take_until(due)) collect(std::move(*o));
    }
    if (abort) break;
    ++pending;
    streams.emplace_back([&, i] { mailbox.post(run_one(url, i, entries[i], t0)); });
  }
  while (pending > 0) {
    if (auto o = mailbox.take_until(BenchClock::now() + std::chrono::seconds(1))) {
      collect(std::move(*o));
    }
  }
  for (auto& t : streams) t.join();

  for (auto& s : slots) {
    if (s) result.records.push_back(std::move(*s));
  }
  if (result.valid && result.records.size() != entries.size()) {
    result.valid = false;
    result.error = "missing records";
  }
  if (!result.valid) spdlog::warn("benchmark aborted: {}", result.error);
  return result;
}

ServerStats fetch_stats(const std::string& url) {
  const json j = get_json(url, "/stats", false);
  ServerStats s;
  s.finished = j.at("finished").get<uint64_t>();
  s.steps_executed = j.at("steps_executed").get<uint64_t>();
  s.num_gpu_blocks = j.at("num_gpu_blocks").get<uint32_t>();
  s.backend = j.value("backend", std::string{});
  s.failed = j.value("failed", false);
  if (j.contains("config")) s.tracing = j["config"].value("tracing", false);
  return s;
}

std::vector<StepTraceRecord> drain_trace(const std::string& url) {
  const std::string body = get_json(url, "/trace/drain", true).get<std::string>();
  std::istringstream in(body);
  return read_trace(in);
}

}  // namespace serve_emu
