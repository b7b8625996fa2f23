// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

#include "serve_emu/profile/step_trace.h"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace serve_emu {

std::string_view to_string(StepPhase phase) {
  switch (phase) {
    case StepPhase::kDecodeOnly:
      return "decode";
    case StepPhase::kPrefillOrMixed:
      return "mixed";
  }
  return "unknown";
}

StepPhase step_phase_from_string(std::string_view name) {
  if (name == "decode") return StepPhase::kDecodeOnly;
  if (name == "mixed") return StepPhase::kPrefillOrMixed;
  throw TraceFormatError("unknown step phase '" + std::string(name) + "'");
}

std::string to_json_line(const StepTraceRecord& record) {
  nlohmann::ordered_json j;
  j["step"] = record.step_index;
  j["tt"] = record.total_tokens;
  j["conc"] = record.concurrency;
  j["phase"] = to_string(record.phase);
  j["latency_s"] = record.latency_s;
  return j.dump();
}

StepTraceRecord parse_json_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    StepTraceRecord record;
    record.step_index = j.at("step").get<uint64_t>();
    record.total_tokens = j.at("tt").get<uint32_t>();
    record.concurrency = j.at("conc").get<uint32_t>();
    record.phase = step_phase_from_string(j.at("phase").get<std::string>());
    record.latency_s = j.at("latency_s").get<double>();
    return record;
  } catch (const nlohmann::json::exception& e) {
    throw TraceFormatError(std::string("bad trace line: ") + e.what());
  }
}

void write_trace(std::ostream& os, const std::vector<StepTraceRecord>& records) {
  for (const auto& record : records) {
    os << to_json_line(record) << '\n';
  }
}

std::vector<StepTraceRecord> read_trace(std::istream& is) {
  std::vector<StepTraceRecord> records;
  std::string line;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    records.push_back(parse_json_line(line));
  }
  return records;
}

std::vector<StepTraceRecord> read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw TraceFormatError("cannot open trace file " + path.string());
  }
  return read_trace(in);
}

}  // namespace serve_emu
