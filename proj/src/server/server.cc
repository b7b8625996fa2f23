// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/server/server.h"

#include <condition_variable>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"

namespace serve_emu {

namespace {

using nlohmann::json;

std::string request_id_string(RequestId id) {
  return "cmpl-" + std::to_string(id.value);
}

std::string sse_frame(const json& j) { return "data: " + j.dump() + "\n\n"; }

// Streaming requests hold their connection for the whole generation, so a
// fixed-size pool would cap concurrency. One thread per connection instead.
class ThreadPerConnection final : public httplib::TaskQueue {
 public:
  bool enqueue(std::function<void()> fn) override {
    {
      std::lock_guard lk(mu_);
      ++active_;
    }
    std::thread([this, fn = std::move(fn)] {
      fn();
      std::lock_guard lk(mu_);
      if (--active_ == 0) cv_.notify_all();
    }).detach();
    return true;
  }

  void shutdown() override {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return active_ == 0; });
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  size_t active_ = 0;
};

// Buffers one request's engine events as ready-to-send SSE frames.
class StreamChannel final : public RequestObserver {
 public:
  void on_token(const TokenEvent& e) override {
    json j;
    j["request_id"] = request_id_string(e.id);
    j["token_index"] = e.token_index;
    j["emitted_at_ns"] = e.emitted_at_ns;
    {
      std::lock_guard lk(mu_);
      frames_.push_back(sse_frame(j));
      token_times_ns_.push_back(e.emitted_at_ns);
    }
    cv_.notify_all();
  }

  void on_finish(const FinishEvent& e) override {
    json j;
    j["request_id"] = request_id_string(e.id);
    j["finish_reason"] = "length";
    j["prompt_tokens"] = e.prompt_tokens;
    j["completion_tokens"] = e.completion_tokens;
    {
      std::lock_guard lk(mu_);
      frames_.push_back(sse_frame(j));
      frames_.push_back("data: [DONE]\n\n");
      finish_ = e;
      done_ = true;
    }
    cv_.notify_all();
  }

  void on_abort(const std::string& reason) override {
    {
      std::lock_guard lk(mu_);
      abort_reason_ = reason;
      aborted_ = true;
      done_ = true;
    }
    cv_.notify_all();
  }

  // Waits until a frame is queued or the request ended. False when the request
  // aborted before producing anything.
  bool wait_first() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !frames_.empty() || done_; });
    return !(aborted_ && frames_.empty());
  }

  void wait_done() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return done_; });
  }

  enum class Poll { kMore, kEnd, kAborted };

  Poll next(std::vector<std::string>& out, std::chrono::milliseconds timeout) {
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, timeout, [&] { return !frames_.empty() || done_; });
    while (!frames_.empty()) {
      out.push_back(std::move(frames_.front()));
      frames_.pop_front();
    }
    if (!done_) return Poll::kMore;
    return aborted_ ? Poll::kAborted : Poll::kEnd;
  }

  bool aborted() const {
    std::lock_guard lk(mu_);
    return aborted_;
  }
  std::string abort_reason() const {
    std::lock_guard lk(mu_);
    return abort_reason_;
  }
  FinishEvent finish() const {
    std::lock_guard lk(mu_);
    return finish_;
  }
  std::vector<int64_t> token_times_ns() const {
    std::lock_guard lk(mu_);
    return token_times_ns_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> frames_;
  std::vector<int64_t> token_times_ns_;
  FinishEvent finish_;
  std::string abort_reason_;
  bool done_ = false;
  bool aborted_ = false;
};

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
  json j;
  j["error"]["code"] = code;
  j["error"]["message"] = message;
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

}  // namespace

struct Server::Impl {
  ServerConfig config;
  std::unique_ptr<Engine> engine;
  httplib::Server http;
  std::thread listener;
  int bound_port = -1;
  std::mutex mu;
  std::condition_variable stopped_cv;
  bool stopped = false;

  void install_routes();
  void handle_completion(const httplib::Request& req, httplib::Response& res);
  json stats_json() const;
};

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>()) {
  config.validate();
  impl_->config = std::move(config);
  auto backend = make_backend(impl_->config);
  impl_->engine = std::make_unique<Engine>(
      Engine::Options{impl_->config.engine, impl_->config.seed,
                      impl_->config.trace_path,
                      impl_->config.trace_path.has_value()},
      std::move(backend));
}

Server::Server(ServerConfig config, std::unique_ptr<LatencyBackend> backend)
    : impl_(std::make_unique<Impl>()) {
  config.engine.validate();
  impl_->config = std::move(config);
  impl_->engine = std::make_unique<Engine>(
      Engine::Options{impl_->config.engine, impl_->config.seed,
                      impl_->config.trace_path,
                      impl_->config.trace_path.has_value()},
      std::move(backend));
}

Server::~Server() { stop(); }

int Server::port() const { return impl_->bound_port; }

std::string Server::url() const {
  return "http://" + impl_->config.host + ":" + std::to_string(port());
}

Engine& Server::engine() { return *impl_->engine; }

const ServerConfig& Server::config() const { return impl_->config; }

void Server::start() {
  impl_->http.new_task_queue = [] { return new ThreadPerConnection(); };
  impl_->http.set_tcp_nodelay(true);
  impl_->http.set_read_timeout(std::chrono::seconds(30));
  impl_->http.set_write_timeout(std::chrono::seconds(30));
  impl_->install_routes();
  if (impl_->config.port == 0) {
    impl_->bound_port = impl_->http.bind_to_any_port(impl_->config.host);
  } else {
    impl_->bound_port =
        impl_->http.bind_to_port(impl_->config.host, impl_->config.port)
            ? impl_->config.port
            : -1;
  }
  if (impl_->bound_port < 0) {
    throw std::runtime_error("cannot bind " + impl_->config.host + ":" +
                             std::to_string(impl_->config.port));
  }
  impl_->engine->start();
  impl_->listener = std::thread([this] { impl_->http.listen_after_bind(); });
  impl_->http.wait_until_ready();
  spdlog::info("serving on {} with {} backend", url(),
               impl_->engine->backend_name());
}

void Server::stop() {
  if (!impl_) return;
  impl_->engine->stop();
  impl_->http.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  {
    std::lock_guard lk(impl_->mu);
    impl_->stopped = true;
  }
  impl_->stopped_cv.notify_all();
}

void Server::wait() {
  std::unique_lock lk(impl_->mu);
  impl_->stopped_cv.wait(lk, [&] { return impl_->stopped; });
}

json Server::Impl::stats_json() const {
  const EngineStats s = engine->stats();
  json j;
  j["running"] = s.running;
  j["waiting"] = s.waiting;
  j["finished"] = s.finished;
  j["free_blocks"] = s.free_blocks;
  j["num_gpu_blocks"] = s.num_gpu_blocks;
  j["steps_executed"] = s.steps_executed;
  j["preemptions"] = s.preemptions;
  j["tokens_emitted"] = s.tokens_emitted;
  j["uptime_s"] = s.uptime_s;
  j["backend"] = engine->backend_name();
  j["failed"] = s.failed;
  if (s.failed) j["failure"] = s.failure;
  const EngineConfig& c = engine->config();
  j["config"] = {{"block_size", c.block_size},
                 {"max_model_len", c.max_model_len},
                 {"max_num_batched_tokens", c.max_num_batched_tokens},
                 {"max_num_seqs", c.max_num_seqs},
                 {"async_scheduling", c.async_scheduling},
                 {"tracing", config.trace_path.has_value()}};
  return j;
}

void Server::Impl::handle_completion(const httplib::Request& req,
                                     httplib::Response& res) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error& e) {
    send_error(res, 400, "invalid_json", e.what());
    return;
  }
  int64_t prompt_tokens = 0;
  int64_t max_tokens = 0;
  bool stream = true;
  try {
    prompt_tokens = body.at("prompt_tokens").get<int64_t>();
    max_tokens = body.at("max_tokens").get<int64_t>();
    if (body.contains("stream")) stream = body.at("stream").get<bool>();
    // ignore_eos is accepted for client parity; there is no EOS here, so
    // generation always runs to max_tokens.
    if (body.contains("ignore_eos")) (void)body.at("ignore_eos").get<bool>();
  } catch (const json::exception& e) {
    send_error(res, 400, "invalid_request", e.what());
    return;
  }
  if (prompt_tokens < 1 || max_tokens < 1 || prompt_tokens > UINT32_MAX ||
      max_tokens > UINT32_MAX) {
    send_error(res, 400, "invalid_request",
               "prompt_tokens and max_tokens must be positive");
    return;
  }

  auto channel = std::make_shared<StreamChannel>();
  RequestId id;
  try {
    id = engine->submit({static_cast<uint32_t>(prompt_tokens),
                         static_cast<uint32_t>(max_tokens), std::nullopt,
                         channel});
  } catch (const LengthError& e) {
    send_error(res, 400, "length_exceeded", e.what());
    return;
  } catch (const EngineFailure& e) {
    send_error(res, 500, "engine_failure", e.what());
    return;
  }

  if (!stream) {
    channel->wait_done();
    if (channel->aborted()) {
      send_error(res, 500, "engine_failure", channel->abort_reason());
      return;
    }
    const FinishEvent f = channel->finish();
    json j;
    j["request_id"] = request_id_string(id);
    j["finish_reason"] = "length";
    j["prompt_tokens"] = f.prompt_tokens;
    j["completion_tokens"] = f.completion_tokens;
    j["token_emitted_at_ns"] = channel->token_times_ns();
    res.set_content(j.dump(), "application/json");
    return;
  }

  // Headers go out with the first token so an abort before any output can
  // still be reported as a 500.
  if (!channel->wait_first()) {
    send_error(res, 500, "engine_failure", channel->abort_reason());
    return;
  }
  res.set_header("Cache-Control", "no-cache");
  res.set_header("X-Request-Id", request_id_string(id));
  res.set_chunked_content_provider(
      "text/event-stream", [channel](size_t, httplib::DataSink& sink) {
        std::vector<std::string> frames;
        const auto poll = channel->next(frames, std::chrono::milliseconds(200));
        for (const auto& f : frames) {
          // A closed client only stops delivery; the request still runs.
          if (!sink.write(f.data(), f.size())) return false;
        }
        if (poll == StreamChannel::Poll::kAborted) {
          const std::string f = sse_frame(
              json{{"error", {{"code", "engine_failure"},
                              {"message", channel->abort_reason()}}}});
          sink.write(f.data(), f.size());
          sink.done();  // no [DONE] marker after an error
          return true;
        }
        if (poll == StreamChannel::Poll::kEnd) sink.done();
        return true;
      });
}

void Server::Impl::install_routes() {
  http.Post("/v1/completions",
            [this](const httplib::Request& req, httplib::Response& res) {
              handle_completion(req, res);
            });
  http.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(stats_json().dump(), "application/json");
  });
  http.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
    if (engine->live()) {
      res.set_content(R"({"status":"ok"})", "application/json");
    } else {
      send_error(res, 503, "engine_down", engine->stats().failure);
    }
  });
  http.Post("/trace/drain",
            [this](const httplib::Request&, httplib::Response& res) {
              if (!config.trace_path) {
                send_error(res, 409, "tracing_disabled",
                           "start the server with --trace to record steps");
                return;
              }
              std::string out;
              for (const auto& r : engine->drain_steps()) {
                out += to_json_line(r.trace);
                out += '\n';
              }
              res.set_content(out, "application/x-ndjson");
            });
}

}  // namespace serve_emu
