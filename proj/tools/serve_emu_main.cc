// Copyright 2026 The serve-emu Authors
// SPDX-License-Identifier: Apache-2.0

// serve-emu: emulated LLM serving endpoint plus the benchmark, capture and
// comparison tooling around it.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "serve_emu/bench/capture.h"
#include "serve_emu/bench/client.h"
#include "serve_emu/bench/compare.h"
#include "serve_emu/bench/report.h"
#include "serve_emu/bench/workload.h"
#include "serve_emu/profile/profile_pack.h"
#include "serve_emu/server/server.h"

namespace {

using namespace serve_emu;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct ServeArgs {
  ServerConfig config;
  std::string backend;
  std::string profile_pack;
  std::string trace;
  bool blocking = false;
  bool fallback_below_floor = false;
};

int run_serve(ServeArgs& args) {
  BackendOverrides overrides;
  if (!args.backend.empty()) {
    overrides.backend = backend_kind_from_string(args.backend);
  }
  if (!args.profile_pack.empty()) overrides.profile_pack = args.profile_pack;
  if (!args.trace.empty()) args.config.trace_path = args.trace;
  args.config.engine.async_scheduling = !args.blocking;
  if (args.fallback_below_floor) {
    args.config.oracle.fallback = CombinedFallback::kPhaseTableBelowFloor;
  }
  resolve_backend(args.config, overrides);
  args.config.validate();

  Server server(args.config);
  server.start();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  spdlog::info("shutting down");
  server.stop();
  return 0;
}

struct BenchArgs {
  std::string target;
  std::string workload;
  double rate = 1.0;
  double burstiness = 1.0;
  uint32_t num_prompts = 100;
  uint64_t seed = 0;
  std::string out;
};

int run_bench(const BenchArgs& args) {
  WorkloadSpec spec;
  spec.entries = read_workload_file(args.workload);
  spec.request_rate = args.rate;
  spec.burstiness = args.burstiness;
  spec.seed = args.seed;
  spec.num_prompts = args.num_prompts;
  spec.validate();

  const ServerStats before = fetch_stats(args.target);
  BenchResult result = run_benchmark(args.target, spec);

  BenchReport report;
  report.workload_hash = workload_hash(spec);
  report.request_rate = spec.request_rate;
  report.burstiness = spec.burstiness;
  report.seed = spec.seed;
  report.num_prompts = spec.num_prompts;
  report.target = args.target;
  report.backend = before.backend;
  report.num_gpu_blocks = before.num_gpu_blocks;
  report.valid = result.valid;
  report.error = result.error;
  report.records = std::move(result.records);
  if (!args.out.empty()) save_report_file(report, args.out);

  if (!report.valid) {
    std::cerr << "benchmark invalid: " << report.error << '\n';
    return 1;
  }
  const auto m = compute_metrics(report.records);
  std::printf("requests %zu  duration %.2f s  TPS %.2f\n", report.records.size(),
              m.duration_s, m.tps);
  std::printf("%-6s %12s %12s %12s\n", "", "mean ms", "median ms", "p99 ms");
  for (const auto& [name, a] : {std::pair{"TTFT", m.ttft}, {"TPOT", m.tpot},
                                {"ITL", m.itl}, {"E2E", m.e2e}}) {
    std::printf("%-6s %12.2f %12.2f %12.2f\n", name, a.mean * 1e3,
                a.median * 1e3, a.p99 * 1e3);
  }
  return 0;
}

int run_compare(const std::vector<std::string>& real_paths,
                const std::vector<std::string>& emu_paths,
                const std::string& out) {
  std::vector<BenchReport> real, emu;
  for (const auto& p : real_paths) real.push_back(load_report_file(p));
  for (const auto& p : emu_paths) emu.push_back(load_report_file(p));
  const auto cmp = compare_reports(real, emu);
  const std::string table = format_table(cmp);
  std::cout << table;
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::invalid_argument("cannot write " + out);
    f << (std::filesystem::path(out).extension() == ".json"
              ? comparisons_to_json(cmp) + "\n"
              : table);
  }
  return 0;
}

struct CaptureArgs {
  std::string target;
  std::string workload;
  std::vector<double> rates;
  std::vector<uint32_t> prompts_per_rate;
  uint64_t seed = 0;
  uint32_t rounds = 1;
  double burstiness = 1.0;
  std::string trace_dir;
};

int run_capture(const CaptureArgs& args) {
  CaptureOptions opt;
  opt.rates = args.rates;
  opt.prompts_per_rate = args.prompts_per_rate;
  opt.seed = args.seed;
  opt.rounds = args.rounds;
  opt.burstiness = args.burstiness;
  opt.entries = read_workload_file(args.workload);
  opt.trace_dir = args.trace_dir;
  for (const auto& run : capture_profile(args.target, opt)) {
    std::printf("%s  %zu steps\n", run.trace_file.string().c_str(),
                run.num_steps);
  }
  return 0;
}

int run_build_pack(const std::string& traces, uint64_t num_gpu_blocks,
                   const std::string& out) {
  const auto records = load_trace_dir(traces);
  const auto pack =
      build_pack(records, num_gpu_blocks, {{"source", traces}});
  save_pack_file(pack, out);
  const auto s = pack_stats(pack);
  std::printf("decode: %zu buckets, %zu samples\n", s.decode_buckets,
              s.decode_samples);
  std::printf("mixed: %zu buckets, %zu samples\n", s.mixed_buckets,
              s.mixed_samples);
  std::printf("combined: %zu buckets, %zu samples\n", s.combined_buckets,
              s.combined_samples);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Emulated LLM serving endpoint and benchmark tools"};
  app.require_subcommand(1);

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run the emulated completions server");
  auto& ec = serve.config.engine;
  auto& gt = serve.config.ground_truth;
  auto& oc = serve.config.oracle;
  s->add_option("--host", serve.config.host, "Bind address")->capture_default_str();
  s->add_option("--port", serve.config.port, "Port, 0 for any free port")->capture_default_str();
  s->add_option("--max-model-len", ec.max_model_len)->capture_default_str();
  s->add_option("--block-size", ec.block_size)->capture_default_str();
  s->add_option("--num-gpu-blocks", ec.num_gpu_blocks)->capture_default_str();
  s->add_option("--max-num-batched-tokens", ec.max_num_batched_tokens)->capture_default_str();
  s->add_option("--max-num-seqs", ec.max_num_seqs)->capture_default_str();
  s->add_option("--backend", serve.backend,
                "groundtruth or oracle (default: env, then groundtruth)")
      ->check(CLI::IsMember({"groundtruth", "oracle"}));
  s->add_option("--profile-pack", serve.profile_pack, "Pack for the oracle backend");
  s->add_option("--seed", serve.config.seed)->capture_default_str();
  s->add_option("--trace", serve.trace, "Write the per-step trace here");
  s->add_flag("--blocking", serve.blocking, "Disable async scheduling");
  s->add_option("--gt-base", gt.base_s, "Ground truth fixed cost, s")->capture_default_str();
  s->add_option("--gt-per-token", gt.per_token_s)->capture_default_str();
  s->add_option("--gt-per-seq", gt.per_seq_s)->capture_default_str();
  s->add_option("--gt-mixed-multiplier", gt.mixed_multiplier)->capture_default_str();
  s->add_option("--gt-noise-cv", gt.noise_cv)->capture_default_str();
  s->add_option("--reliability-floor", oc.reliability_floor)->capture_default_str();
  s->add_option("--shepard-power", oc.shepard_power)->capture_default_str();
  s->add_flag("--fallback-below-floor", serve.fallback_below_floor,
              "Use the combined table when a phase table holds fewer than M samples");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Open-loop benchmark against a server");
  b->add_option("--target", bench.target, "Server URL")->required();
  b->add_option("--workload", bench.workload, "JSON-lines workload")->required();
  b->add_option("--rate", bench.rate, "Requests per second")->capture_default_str();
  b->add_option("--burstiness", bench.burstiness, "Gamma shape, 1 is Poisson")->capture_default_str();
  b->add_option("--num-prompts", bench.num_prompts)->capture_default_str();
  b->add_option("--seed", bench.seed)->capture_default_str();
  b->add_option("--out", bench.out, "Report JSON");

  std::vector<std::string> real_paths, emu_paths;
  std::string compare_out;
  auto* c = app.add_subcommand("compare", "Relative error of emulated vs real reports");
  c->add_option("--real", real_paths, "Real report(s)")->required();
  c->add_option("--emu", emu_paths, "Emulated report(s)")->required();
  c->add_option("--out", compare_out, "table.txt or table.json");

  CaptureArgs cap;
  auto* cp = app.add_subcommand("capture", "Rate sweep against a tracing server");
  cp->add_option("--target", cap.target)->required();
  cp->add_option("--workload", cap.workload)->required();
  cp->add_option("--rates", cap.rates)->delimiter(',')->required();
  cp->add_option("--prompts-per-rate", cap.prompts_per_rate,
                 "One count, or one per rate")
      ->delimiter(',')
      ->required();
  cp->add_option("--seed", cap.seed)->capture_default_str();
  cp->add_option("--rounds", cap.rounds)->capture_default_str();
  cp->add_option("--burstiness", cap.burstiness)->capture_default_str();
  cp->add_option("--trace-dir", cap.trace_dir)->required();

  std::string traces_dir, pack_out;
  uint64_t pack_blocks = 0;
  auto* bp = app.add_subcommand("build-pack", "Merge traces into a profile pack");
  bp->add_option("--traces", traces_dir)->required();
  bp->add_option("--num-gpu-blocks", pack_blocks)->required();
  bp->add_option("--out", pack_out)->required();

  uint32_t gen_num = 1000;
  LengthDistribution dist;
  uint64_t gen_seed = 0;
  std::string gen_out;
  auto* g = app.add_subcommand("gen-workload", "Synthetic prompt/output lengths");
  g->add_option("--num", gen_num)->capture_default_str();
  g->add_option("--prompt-median", dist.prompt_median)->capture_default_str();
  g->add_option("--output-median", dist.output_median)->capture_default_str();
  g->add_option("--max-prompt", dist.max_prompt)->capture_default_str();
  g->add_option("--max-output", dist.max_output)->capture_default_str();
  g->add_option("--max-model-len", dist.max_model_len)->capture_default_str();
  g->add_option("--seed", gen_seed)->capture_default_str();
  g->add_option("--out", gen_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (s->parsed()) return run_serve(serve);
    if (b->parsed()) return run_bench(bench);
    if (c->parsed()) return run_compare(real_paths, emu_paths, compare_out);
    if (cp->parsed()) return run_capture(cap);
    if (bp->parsed()) return run_build_pack(traces_dir, pack_blocks, pack_out);
    if (g->parsed()) {
      std::ofstream out(gen_out);
      if (!out) throw std::invalid_argument("cannot write " + gen_out);
      write_workload(out, generate_sharegpt_like(gen_num, dist, gen_seed));
      return 0;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
