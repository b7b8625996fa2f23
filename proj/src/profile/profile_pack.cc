// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/profile/profile_pack.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace serve_emu {

namespace {

using ordered_json = nlohmann::ordered_json;

ProfileError validation_error(const std::string& message) {
  return ProfileError(ProfileError::Kind::kValidation, message);
}

ordered_json table_to_json(const PhaseTable& table) {
  ordered_json buckets = ordered_json::array();
  for (const auto& bucket : table.buckets()) {
    std::vector<double> sorted = bucket.samples;
    std::sort(sorted.begin(), sorted.end());
    ordered_json b;
    b["tt"] = bucket.tt;
    b["conc"] = bucket.conc;
    b["samples"] = sorted;
    buckets.push_back(std::move(b));
  }
  ordered_json out;
  out["buckets"] = std::move(buckets);
  return out;
}

PhaseTable table_from_json(const nlohmann::json& j, TableKind kind) {
  PhaseTable table(kind);
  const std::string name(to_string(kind));
  size_t index = 0;
  for (const auto& b : j.at("buckets")) {
    Bucket bucket;
    const auto tt = b.at("tt").get<int64_t>();
    const auto conc = b.at("conc").get<int64_t>();
    if (tt < 1 || conc < 1 || tt > UINT32_MAX || conc > UINT32_MAX) {
      throw validation_error(name + " bucket " + std::to_string(index) +
                             ": tt and conc must be positive");
    }
    bucket.tt = static_cast<uint32_t>(tt);
    bucket.conc = static_cast<uint32_t>(conc);
    bucket.samples = b.at("samples").get<std::vector<double>>();
    if (bucket.samples.empty()) {
      throw validation_error(name + " bucket (" + std::to_string(tt) + ", " +
                             std::to_string(conc) + ") has no samples");
    }
    for (double s : bucket.samples) {
      if (!(s > 0.0) || !std::isfinite(s)) {
        throw validation_error(name + " bucket (" + std::to_string(tt) + ", " +
                               std::to_string(conc) +
                               ") has a nonpositive sample");
      }
    }
    try {
      table.add_bucket(std::move(bucket));
    } catch (const std::invalid_argument&) {
      throw validation_error(name + " table has duplicate bucket (" +
                             std::to_string(tt) + ", " + std::to_string(conc) +
                             ")");
    }
    ++index;
  }
  return table;
}

}  // namespace

std::string_view to_string(TableKind kind) {
  switch (kind) {
    case TableKind::kDecode:
      return "decode";
    case TableKind::kMixed:
      return "mixed";
    case TableKind::kCombined:
      return "combined";
  }
  return "unknown";
}

void PhaseTable::widen_ranges(uint32_t tt, uint32_t conc) {
  if (buckets_.size() == 1) {
    tt_range_ = {tt, tt};
    conc_range_ = {conc, conc};
    return;
  }
  tt_range_.min = std::min(tt_range_.min, tt);
  tt_range_.max = std::max(tt_range_.max, tt);
  conc_range_.min = std::min(conc_range_.min, conc);
  conc_range_.max = std::max(conc_range_.max, conc);
}

void PhaseTable::add_sample(uint32_t tt, uint32_t conc, double latency_s) {
  const BucketKey key{tt, conc};
  auto it = std::lower_bound(
      buckets_.begin(), buckets_.end(), key,
      [](const Bucket& b, const BucketKey& k) { return b.key() < k; });
  if (it != buckets_.end() && it->key() == key) {
    it->samples.push_back(latency_s);
  } else {
    buckets_.insert(it, Bucket{tt, conc, {latency_s}});
    widen_ranges(tt, conc);
  }
  ++total_samples_;
}

void PhaseTable::add_bucket(Bucket bucket) {
  const BucketKey key = bucket.key();
  auto it = std::lower_bound(
      buckets_.begin(), buckets_.end(), key,
      [](const Bucket& b, const BucketKey& k) { return b.key() < k; });
  if (it != buckets_.end() && it->key() == key) {
    throw std::invalid_argument("duplicate bucket key");
  }
  total_samples_ += bucket.samples.size();
  buckets_.insert(it, std::move(bucket));
  widen_ranges(key.tt, key.conc);
}

const Bucket* PhaseTable::find(BucketKey key) const {
  auto it = std::lower_bound(
      buckets_.begin(), buckets_.end(), key,
      [](const Bucket& b, const BucketKey& k) { return b.key() < k; });
  if (it != buckets_.end() && it->key() == key) return &*it;
  return nullptr;
}

bool PhaseTable::operator==(const PhaseTable& other) const {
  if (kind_ != other.kind_ || buckets_.size() != other.buckets_.size()) {
    return false;
  }
  for (size_t i = 0; i < buckets_.size(); ++i) {
    const auto& a = buckets_[i];
    const auto& b = other.buckets_[i];
    if (a.key() != b.key() || a.samples.size() != b.samples.size()) {
      return false;
    }
    auto sa = a.samples;
    auto sb = b.samples;
    std::sort(sa.begin(), sa.end());
    std::sort(sb.begin(), sb.end());
    if (sa != sb) return false;
  }
  return true;
}

const PhaseTable& ProfilePack::table(TableKind kind) const {
  switch (kind) {
    case TableKind::kDecode:
      return decode;
    case TableKind::kMixed:
      return mixed;
    case TableKind::kCombined:
      return combined;
  }
  return combined;
}

const PhaseTable& ProfilePack::table_for(StepPhase phase) const {
  return phase == StepPhase::kDecodeOnly ? decode : mixed;
}

void ProfilePack::validate() const {
  if (num_gpu_blocks == 0) {
    throw validation_error("num_gpu_blocks must be positive");
  }
  for (const PhaseTable* table : {&decode, &mixed, &combined}) {
    for (const auto& bucket : table->buckets()) {
      if (bucket.samples.empty()) {
        throw validation_error(std::string(to_string(table->kind())) +
                               " table has an empty bucket");
      }
      for (double s : bucket.samples) {
        if (!(s > 0.0) || !std::isfinite(s)) {
          throw validation_error(std::string(to_string(table->kind())) +
                                 " table has a nonpositive sample");
        }
      }
    }
  }
  if (combined.total_samples() !=
      decode.total_samples() + mixed.total_samples()) {
    throw validation_error("combined table inconsistent: " +
                           std::to_string(combined.total_samples()) +
                           " samples, expected " +
                           std::to_string(decode.total_samples() +
                                          mixed.total_samples()));
  }
}

ProfilePack build_pack(std::span<const StepTraceRecord> traces,
                       uint64_t num_gpu_blocks,
                       std::map<std::string, std::string> metadata) {
  if (num_gpu_blocks == 0) {
    throw validation_error("num_gpu_blocks must be positive");
  }
  ProfilePack pack;
  pack.num_gpu_blocks = num_gpu_blocks;
  pack.metadata = std::move(metadata);
  for (size_t i = 0; i < traces.size(); ++i) {
    const auto& r = traces[i];
    if (r.total_tokens == 0 || r.concurrency == 0) {
      throw validation_error("trace record " + std::to_string(i) +
                             ": zero tokens or concurrency");
    }
    if (!(r.latency_s > 0.0) || !std::isfinite(r.latency_s)) {
      throw validation_error("trace record " + std::to_string(i) +
                             ": latency must be positive");
    }
    if (r.phase == StepPhase::kDecodeOnly && r.total_tokens < r.concurrency) {
      throw validation_error("trace record " + std::to_string(i) +
                             ": decode step with fewer tokens than requests");
    }
    PhaseTable& phase_table =
        r.phase == StepPhase::kDecodeOnly ? pack.decode : pack.mixed;
    phase_table.add_sample(r.total_tokens, r.concurrency, r.latency_s);
    pack.combined.add_sample(r.total_tokens, r.concurrency, r.latency_s);
  }
  return pack;
}

std::string save_pack(const ProfilePack& pack) {
  ordered_json j;
  j["schema_version"] = pack.schema_version;
  j["metadata"] = ordered_json::object();
  for (const auto& [k, v] : pack.metadata) j["metadata"][k] = v;
  j["num_gpu_blocks"] = pack.num_gpu_blocks;
  j["tables"]["decode"] = table_to_json(pack.decode);
  j["tables"]["mixed"] = table_to_json(pack.mixed);
  j["tables"]["combined"] = table_to_json(pack.combined);
  return j.dump();
}

ProfilePack load_pack(std::string_view bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProfileError(ProfileError::Kind::kParse,
                       std::string("malformed profile pack: ") + e.what());
  }
  ProfilePack pack;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kProfileSchemaVersion) {
      throw ProfileError(ProfileError::Kind::kVersion,
                         "unsupported profile schema_version " +
                             std::to_string(version) + " (expected " +
                             std::to_string(kProfileSchemaVersion) + ")");
    }
    pack.schema_version = version;
    if (j.contains("metadata")) {
      pack.metadata =
          j.at("metadata").get<std::map<std::string, std::string>>();
    }
    const auto blocks = j.at("num_gpu_blocks").get<int64_t>();
    if (blocks <= 0) throw validation_error("num_gpu_blocks must be positive");
    pack.num_gpu_blocks = static_cast<uint64_t>(blocks);
    const auto& tables = j.at("tables");
    pack.decode = table_from_json(tables.at("decode"), TableKind::kDecode);
    pack.mixed = table_from_json(tables.at("mixed"), TableKind::kMixed);
    pack.combined =
        table_from_json(tables.at("combined"), TableKind::kCombined);
  } catch (const nlohmann::json::exception& e) {
    throw ProfileError(ProfileError::Kind::kParse,
                       std::string("malformed profile pack: ") + e.what());
  }
  pack.validate();
  return pack;
}

void save_pack_file(const ProfilePack& pack, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << save_pack(pack);
}

ProfilePack load_pack_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ProfileError(ProfileError::Kind::kParse,
                       "cannot open profile pack " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_pack(ss.str());
}

PackStats pack_stats(const ProfilePack& pack) {
  PackStats s;
  s.decode_buckets = pack.decode.size();
  s.mixed_buckets = pack.mixed.size();
  s.combined_buckets = pack.combined.size();
  s.decode_samples = pack.decode.total_samples();
  s.mixed_samples = pack.mixed.total_samples();
  s.combined_samples = pack.combined.total_samples();
  return s;
}

}  // namespace serve_emu
