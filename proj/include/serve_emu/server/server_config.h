// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "serve_emu/engine/engine_config.h"
#include "serve_emu/engine/latency_backend.h"

namespace serve_emu {

enum class BackendKind { kGroundTruth, kOracle };

std::string_view to_string(BackendKind kind);
BackendKind backend_kind_from_string(std::string_view name);

inline constexpr const char* kEnvEnableOracle = "EMU_ENABLE_ORACLE";
inline constexpr const char* kEnvProfilePack = "EMU_PROFILE_PACK";

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8100;  // 0 picks a free port
  EngineConfig engine;
  BackendKind backend = BackendKind::kGroundTruth;
  GroundTruthParams ground_truth;
  std::optional<std::filesystem::path> profile_pack;
  OracleConfig oracle;
  std::optional<std::filesystem::path> trace_path;
  uint64_t seed = 0;

  // Throws std::invalid_argument.
  void validate() const;
};

// Backend choices given explicitly on the command line.
struct BackendOverrides {
  std::optional<BackendKind> backend;
  std::optional<std::filesystem::path> profile_pack;
};

using EnvLookup = std::function<std::optional<std::string>(const char*)>;

std::optional<std::string> process_env(const char* name);

// EMU_ENABLE_ORACLE=1 selects the oracle backend and EMU_PROFILE_PACK names
// its pack; explicit command-line values win over both.
void resolve_backend(ServerConfig& config, const BackendOverrides& cli,
                     const EnvLookup& env = process_env);

// Loads the pack for the oracle backend.
std::unique_ptr<LatencyBackend> make_backend(const ServerConfig& config);

}  // namespace serve_emu
