// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace serve_emu {

// Phase of one executed engine step. A step is DecodeOnly iff every entry is a
// single decode token; anything containing a prefill chunk is PrefillOrMixed.
enum class StepPhase { kDecodeOnly, kPrefillOrMixed };

std::string_view to_string(StepPhase phase);
StepPhase step_phase_from_string(std::string_view name);

// One per-step observation emitted by the engine tracer.
struct StepTraceRecord {
  uint64_t step_index = 0;
  uint32_t total_tokens = 0;  // tt
  uint32_t concurrency = 0;   // conc
  StepPhase phase = StepPhase::kDecodeOnly;
  double latency_s = 0.0;

  bool operator==(const StepTraceRecord&) const = default;
};

class TraceFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON-lines wire format:
//   {"step": i, "tt": t, "conc": c, "phase": "decode"|"mixed", "latency_s": x}
std::string to_json_line(const StepTraceRecord& record);
StepTraceRecord parse_json_line(std::string_view line);

void write_trace(std::ostream& os, const std::vector<StepTraceRecord>& records);
std::vector<StepTraceRecord> read_trace(std::istream& is);
std::vector<StepTraceRecord> read_trace_file(const std::filesystem::path& path);

}  // namespace serve_emu
