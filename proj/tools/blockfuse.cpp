// Copyright 2026 The blockfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// blockfuse: compile kernels, run host scripts, sweep grain sizes and model
// cache behaviour.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "blockfuse/bench.hpp"
#include "blockfuse/cachesim.hpp"
#include "blockfuse/host.hpp"
#include "blockfuse/mpmd.hpp"
#include "blockfuse/parser.hpp"
#include "blockfuse/validate.hpp"

#ifndef BLOCKFUSE_CORPUS_DIR
#define BLOCKFUSE_CORPUS_DIR "corpus"
#endif

namespace fs = std::filesystem;
using namespace blockfuse;

namespace {

constexpr int kOk = 0;
constexpr int kOracleFailed = 1;
constexpr int kInputError = 2;

std::string readFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read '{}'", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A corpus name or a path to a host script.
bench::BenchCase resolveCase(const std::string& name, const std::string& corpus) {
  if (name.ends_with(".host")) return bench::loadScript(name);
  return bench::loadCase(corpus, name);
}

void printJson(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

struct CompileArgs {
  std::string file;
  bool warp = false;
  std::uint32_t warp_size = 32;
  bool reorder = false;
  bool json = false;
};

int cmdCompile(const CompileArgs& a) {
  const auto kernels = parseUnit(readFile(a.file));
  int rc = kOk;
  auto out = nlohmann::json::array();
  for (const auto& k : kernels) {
    const auto diags = validate(k, a.warp);
    if (!diags.empty()) {
      for (const auto& d : diags) std::cerr << a.file << ":" << to_string(d) << "\n";
      rc = kInputError;
      continue;
    }
    mpmd::MpmdKernel m = mpmd::compile(k, {a.warp, a.warp_size});
    if (a.reorder) m = mpmd::reorderGridStride(std::move(m));
    if (a.json) out.push_back(nlohmann::json::parse(mpmd::dumpJson(m)));
    else std::cout << mpmd::listing(m) << "\n";
  }
  if (a.json) printJson(out);
  return rc;
}

struct RunArgs {
  std::string script;
  std::string kernels;
  std::size_t pool = 0;
  std::string policy = "average";
  bool warp = false;
  std::uint32_t warp_size = 32;
  bool no_barriers = false;
  bool hold = false;
  std::optional<std::uint64_t> delay_seed;
  std::string out_dir;
  bool json = false;
};

int cmdRun(const RunArgs& a) {
  const bench::BenchCase c =
      bench::loadScript(a.script, a.kernels.empty() ? std::nullopt : std::optional<fs::path>(a.kernels));
  bench::LoadedCase loaded = bench::load(c);

  host::RunOptions ref;
  ref.mode = host::ExecMode::Reference;
  ref.base_dir = c.base_dir;
  ref.warp_size = a.warp_size;
  const auto expected = host::HostRunner(loaded.kernels, ref).run(loaded.program).downloads;

  host::RunOptions opts;
  opts.base_dir = a.out_dir.empty() ? c.base_dir : fs::path(a.out_dir);
  opts.write_downloads = !a.out_dir.empty();
  opts.warp_mode = a.warp;
  opts.warp_size = a.warp_size;
  opts.insert_barriers = !a.no_barriers;
  opts.runtime.pool_size = a.pool;
  opts.runtime.policy = runtime::FetchPolicy::parse(a.policy);
  opts.runtime.hold_until_sync = a.hold;
  opts.runtime.delay_seed = a.delay_seed;
  std::vector<std::string> log;
  opts.runtime.log = [&log](const std::string& line) { log.push_back(line); };
  if (!a.out_dir.empty()) {
    // file: sources stay relative to the script.
    for (auto& op : loaded.program.ops)
      if (auto* u = std::get_if<host::Upload>(&op.node); u && u->source.kind == host::Source::Kind::File)
        u->source.path = (c.base_dir / u->source.path).string();
  }
  const host::RunResult r = host::HostRunner(loaded.kernels, opts).run(loaded.program);
  const auto mismatch = bench::compareDownloads(expected, r.downloads);
  const bool ok = !mismatch && r.conflicts.empty();

  if (a.json) {
    auto launches = nlohmann::json::array();
    for (const auto& l : r.launches) launches.push_back(runtime::toJson(l));
    auto conflicts = nlohmann::json::array();
    for (const auto& e : r.conflicts)
      conflicts.push_back({{"op", e.op_index}, {"launch", e.launch_id}, {"hazard", host::to_string(e.hazard)},
                           {"buffer", e.buffer}});
    auto downloads = nlohmann::json::array();
    for (const auto& d : r.downloads)
      downloads.push_back({{"buffer", d.buf}, {"type", to_string(d.type)}, {"length", d.values.size()}});
    printJson({{"program", host::toJson(r.executed)},
               {"counters", runtime::toJson(*r.counters)},
               {"launches", launches},
               {"conflicts", conflicts},
               {"downloads", downloads},
               {"oracle_ok", !mismatch.has_value()}});
  } else {
    std::cout << host::print(r.executed);
    for (const auto& line : log) std::cout << "# " << line << "\n";
    std::cout << fmt::format("{:>4} {:<16} {:>8} {:>6} {:>8} {:>5} {:>12}\n", "id", "kernel", "blocks", "grain",
                             "fetches", "idle", "exactly-once");
    for (const auto& l : r.launches)
      std::cout << fmt::format("{:>4} {:<16} {:>8} {:>6} {:>8} {:>5} {:>12}\n", l.id, l.kernel, l.total_blocks,
                               l.grain, l.fetches, l.idleWorkers(), l.exactlyOnce() ? "yes" : "NO");
    const auto& k = *r.counters;
    std::cout << fmt::format("fetches {}  blocks {}  syncs {}  queue waits {}\n", k.fetch_count, k.blocks_executed,
                             k.syncs, k.queue_waits);
    for (const auto& e : r.conflicts)
      std::cout << fmt::format("conflict: op {} {} on '{}' with launch {}\n", e.op_index, host::to_string(e.hazard),
                               e.buffer, e.launch_id);
    std::cout << "oracle: " << (mismatch ? "FAIL " + *mismatch : std::string("ok")) << "\n";
  }
  return ok ? kOk : kOracleFailed;
}

std::vector<std::uint64_t> parseGrains(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const auto g = std::stoull(item, &used);
    if (used != item.size() || g == 0) throw Error(fmt::format("bad grain '{}'", item));
    out.push_back(g);
  }
  return out;
}

int main2(int argc, char** argv) {
  CLI::App app{"Block-fused execution of CUDA-style kernels on a CPU worker pool"};
  app.require_subcommand(1);
  std::string corpus = BLOCKFUSE_CORPUS_DIR;
  app.add_option("--corpus", corpus, "Directory holding the case corpus");

  CompileArgs ca;
  auto* compile = app.add_subcommand("compile", "Validate and transform a kernel file");
  compile->add_option("file", ca.file, "Kernel source (.kn)")->required();
  compile->add_flag("--warp", ca.warp, "Enable warp mode");
  compile->add_option("--warp-size", ca.warp_size, "Lanes per warp")->check(CLI::Range(1u, 1024u));
  compile->add_flag("--reorder", ca.reorder, "Reorder grid-stride loops");
  compile->add_flag("--json", ca.json, "Structured output");

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Run a host script on the worker pool and check it against the oracle");
  run->add_option("script", ra.script, "Host script (.host)")->required();
  run->add_option("--kernels", ra.kernels, "Kernel source; defaults to the script with a .kn extension");
  run->add_option("--pool", ra.pool, "Worker count (0 = hardware concurrency)");
  run->add_option("--policy", ra.policy, "average | auto | fixed:<g>");
  run->add_flag("--warp", ra.warp, "Warp mode for every kernel");
  run->add_option("--warp-size", ra.warp_size, "Lanes per warp")->check(CLI::Range(1u, 1024u));
  run->add_flag("--no-barriers", ra.no_barriers, "Skip implicit barrier insertion");
  run->add_flag("--hold", ra.hold, "Defer every launch until the next synchronization");
  run->add_option("--seed", ra.delay_seed, "Random per-block delays from this seed");
  run->add_option("--out-dir", ra.out_dir, "Write downloads under this directory");
  run->add_flag("--json", ra.json, "Structured output");

  std::string sweep_case;
  std::string grains_text;
  bench::SweepOptions so;
  bool sweep_json = false;
  auto* sweep = app.add_subcommand("sweep", "Fixed-grain sweep with oracle checks");
  sweep->add_option("case", sweep_case, "Corpus case name or host script")->required();
  sweep->add_option("--grains", grains_text, "Comma-separated grain sizes");
  sweep->add_option("--pool", so.pool, "Worker count")->check(CLI::PositiveNumber);
  sweep->add_option("--repeats", so.repeats, "Runs per grain")->check(CLI::PositiveNumber);
  sweep->add_flag("--json", sweep_json, "Structured output");

  std::string reorder_case;
  cachesim::CacheConfig rcfg;
  bool reorder_json = false;
  auto* reorder = app.add_subcommand("reorder-exp", "Cache misses before and after grid-stride reordering");
  reorder->add_option("case", reorder_case, "Corpus case name or host script")->required();
  reorder->add_option("--capacity", rcfg.capacity, "Cache bytes");
  reorder->add_option("--line", rcfg.line_size, "Line bytes");
  reorder->add_option("--ways", rcfg.ways, "Associativity");
  reorder->add_flag("--json", reorder_json, "Structured output");

  std::string trace_case;
  std::string trace_out;
  bool trace_reorder = false;
  bool trace_binary = false;
  auto* trace = app.add_subcommand("trace", "Write the global-memory trace of a single-worker run");
  trace->add_option("case", trace_case, "Corpus case name or host script")->required();
  trace->add_option("--out", trace_out, "Output file")->required();
  trace->add_flag("--reorder", trace_reorder, "Reorder grid-stride loops first");
  trace->add_flag("--binary", trace_binary, "Binary format");

  std::string trace_file;
  cachesim::CacheConfig ccfg;
  bool cache_binary = false;
  bool cache_json = false;
  auto* cache = app.add_subcommand("cachesim", "Simulate a trace file");
  cache->add_option("--trace", trace_file, "Trace file")->required();
  cache->add_option("--capacity", ccfg.capacity, "Cache bytes");
  cache->add_option("--line", ccfg.line_size, "Line bytes");
  cache->add_option("--ways", ccfg.ways, "Associativity");
  cache->add_flag("--binary", cache_binary, "Trace is in binary format");
  cache->add_flag("--json", cache_json, "Structured output");

  CLI11_PARSE(app, argc, argv);

  if (*compile) return cmdCompile(ca);
  if (*run) return cmdRun(ra);
  if (*sweep) {
    const auto c = resolveCase(sweep_case, corpus);
    const auto grains = grains_text.empty() ? c.grains : parseGrains(grains_text);
    try {
      const auto report = bench::runSweep(c, grains, so);
      if (sweep_json) printJson(bench::toJson(report));
      else std::cout << bench::table(report);
      bool law = true;
      for (const auto& row : report.rows) law = law && row.fetch_count == row.expected_fetch_count;
      return law ? kOk : kOracleFailed;
    } catch (const bench::OracleMismatch& e) {
      std::cerr << "oracle mismatch: " << e.what() << "\n";
      return kOracleFailed;
    }
  }
  if (*reorder) {
    const auto report = bench::runReorderExperiment(resolveCase(reorder_case, corpus), rcfg);
    if (reorder_json) printJson(bench::toJson(report));
    else std::cout << bench::table(report);
    return report.original_ok && report.reordered_ok ? kOk : kOracleFailed;
  }
  if (*trace) {
    const MemoryTrace t = bench::traceScript(resolveCase(trace_case, corpus), trace_reorder);
    std::ofstream out(trace_out, std::ios::binary);
    if (!out) throw Error(fmt::format("cannot write '{}'", trace_out));
    if (trace_binary) writeTraceBinary(out, t.events());
    else writeTraceText(out, t.events());
    std::cout << fmt::format("{} events written to {}\n", t.size(), trace_out);
    return kOk;
  }
  if (*cache) {
    std::ifstream in(trace_file, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot read '{}'", trace_file));
    const auto events = cache_binary ? readTraceBinary(in) : readTraceText(in);
    const auto report = cachesim::simulate(events, ccfg);
    if (cache_json) printJson({{"cache", cachesim::toJson(ccfg)}, {"report", cachesim::toJson(report)}});
    else std::cout << cachesim::table(report);
    return kOk;
  }
  return kInputError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return main2(argc, argv);
  } catch (const ParseError& e) {
    std::cerr << "error: " << to_string(e.where()) << ": " << e.what() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kInputError;
}
