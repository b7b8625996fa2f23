// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "serve_emu/engine/engine.h"
#include "serve_emu/server/server_config.h"

namespace serve_emu {

// HTTP front end over one Engine.
//
//   POST /v1/completions  {"prompt_tokens", "max_tokens", "stream", "ignore_eos"}
//                         -> SSE: one event per token, then a usage event
//   GET  /stats           -> engine counters
//   GET  /health          -> 200 while the engine loop is live
//   POST /trace/drain     -> JSON-lines of steps executed since the last drain
//                            (tracing must be enabled)
class Server {
 public:
  explicit Server(ServerConfig config);
  // For callers that build the backend themselves.
  Server(ServerConfig config, std::unique_ptr<LatencyBackend> backend);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Starts the engine and begins listening; returns once the port is bound.
  void start();
  void stop();
  // Blocks until stop() is called from another thread.
  void wait();

  int port() const;
  std::string url() const;
  Engine& engine();
  const ServerConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace serve_emu
