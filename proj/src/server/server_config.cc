// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/server/server_config.h"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace serve_emu {

std::string_view to_string(BackendKind kind) {
  return kind == BackendKind::kOracle ? "oracle" : "groundtruth";
}

BackendKind backend_kind_from_string(std::string_view name) {
  if (name == "oracle") return BackendKind::kOracle;
  if (name == "groundtruth") return BackendKind::kGroundTruth;
  throw std::invalid_argument("unknown backend '" + std::string(name) + "'");
}

void ServerConfig::validate() const {
  engine.validate();
  if (port < 0 || port > 65535) throw std::invalid_argument("bad port");
  if (backend == BackendKind::kOracle) {
    if (!profile_pack) {
      throw std::invalid_argument("oracle backend requires a profile pack");
    }
    std::ifstream probe(*profile_pack);
    if (!probe) {
      throw std::invalid_argument("profile pack not readable: " +
                                  profile_pack->string());
    }
    oracle.validate();
  } else {
    ground_truth.validate();
  }
}

std::optional<std::string> process_env(const char* name) {
  const char* v = std::getenv(name);
  if (!v) return std::nullopt;
  return std::string(v);
}

void resolve_backend(ServerConfig& config, const BackendOverrides& cli,
                     const EnvLookup& env) {
  if (auto enable = env(kEnvEnableOracle); enable && *enable == "1") {
    config.backend = BackendKind::kOracle;
  }
  if (auto pack = env(kEnvProfilePack); pack && !pack->empty()) {
    config.profile_pack = *pack;
  }
  if (cli.backend) config.backend = *cli.backend;
  if (cli.profile_pack) config.profile_pack = *cli.profile_pack;
}

std::unique_ptr<LatencyBackend> make_backend(const ServerConfig& config) {
  if (config.backend == BackendKind::kGroundTruth) {
    return std::make_unique<GroundTruthBackend>(config.ground_truth);
  }
  if (!config.profile_pack) {
    throw std::invalid_argument("oracle backend requires a profile pack");
  }
  auto pack = std::make_shared<const ProfilePack>(
      load_pack_file(*config.profile_pack));
  return std::make_unique<OracleBackend>(LatencyOracle(pack, config.oracle));
}

}  // namespace serve_emu
