// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "serve_emu/profile/step_trace.h"

namespace serve_emu {

inline constexpr int kProfileSchemaVersion = 1;

enum class TableKind { kDecode, kMixed, kCombined };

std::string_view to_string(TableKind kind);

struct BucketKey {
  uint32_t tt = 0;
  uint32_t conc = 0;

  auto operator<=>(const BucketKey&) const = default;
};

// Raw latency samples (seconds) observed for one (tt, conc) cell.
struct Bucket {
  uint32_t tt = 0;
  uint32_t conc = 0;
  std::vector<double> samples;

  BucketKey key() const { return {tt, conc}; }
};

struct AxisRange {
  uint32_t min = 0;
  uint32_t max = 0;

  bool operator==(const AxisRange&) const = default;
};

// A set of buckets with unique (tt, conc) keys, kept sorted by key. Ranges are
// derived from the buckets and never stored independently.
class PhaseTable {
 public:
  explicit PhaseTable(TableKind kind = TableKind::kCombined) : kind_(kind) {}

  TableKind kind() const { return kind_; }
  const std::vector<Bucket>& buckets() const { return buckets_; }
  bool empty() const { return buckets_.empty(); }
  size_t size() const { return buckets_.size(); }
  size_t total_samples() const { return total_samples_; }

  // Ranges over the buckets; {0, 0} for an empty table.
  AxisRange tt_range() const { return tt_range_; }
  AxisRange conc_range() const { return conc_range_; }

  // Appends one sample to bucket (tt, conc), creating the bucket if needed.
  void add_sample(uint32_t tt, uint32_t conc, double latency_s);

  // Inserts a whole bucket. Throws std::invalid_argument on a duplicate key.
  void add_bucket(Bucket bucket);

  const Bucket* find(BucketKey key) const;

  // Equal keys and, per bucket, equal sample multisets. Sample order is
  // capture order in memory and ascending on disk, so it is not compared.
  bool operator==(const PhaseTable& other) const;

 private:
  void widen_ranges(uint32_t tt, uint32_t conc);

  TableKind kind_;
  std::vector<Bucket> buckets_;
  size_t total_samples_ = 0;
  AxisRange tt_range_;
  AxisRange conc_range_;
};

struct ProfilePack {
  int schema_version = kProfileSchemaVersion;
  std::map<std::string, std::string> metadata;
  uint64_t num_gpu_blocks = 1;
  PhaseTable decode{TableKind::kDecode};
  PhaseTable mixed{TableKind::kMixed};
  PhaseTable combined{TableKind::kCombined};

  const PhaseTable& table(TableKind kind) const;
  const PhaseTable& table_for(StepPhase phase) const;

  // Throws ProfileError{kValidation} naming the first violated invariant.
  void validate() const;

  bool operator==(const ProfilePack&) const = default;
};

class ProfileError : public std::runtime_error {
 public:
  enum class Kind { kParse, kVersion, kValidation };

  ProfileError(Kind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Every record goes to the table matching its phase and to the combined table.
ProfilePack build_pack(std::span<const StepTraceRecord> traces,
                       uint64_t num_gpu_blocks,
                       std::map<std::string, std::string> metadata = {});

// Canonical JSON: buckets sorted by (tt, conc), samples ascending.
std::string save_pack(const ProfilePack& pack);
ProfilePack load_pack(std::string_view bytes);

void save_pack_file(const ProfilePack& pack, const std::filesystem::path& path);
ProfilePack load_pack_file(const std::filesystem::path& path);

struct PackStats {
  size_t decode_buckets = 0;
  size_t mixed_buckets = 0;
  size_t combined_buckets = 0;
  size_t decode_samples = 0;
  size_t mixed_samples = 0;
  size_t combined_samples = 0;
  // Buckets across the two phase tables (a key present in both counts twice).
  size_t phase_buckets() const { return decode_buckets + mixed_buckets; }
};

PackStats pack_stats(const ProfilePack& pack);

}  // namespace serve_emu
