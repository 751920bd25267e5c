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

#include "blockfuse/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "blockfuse/executor.hpp"
#include "blockfuse/mpmd.hpp"

namespace blockfuse::bench {

namespace {

std::string readFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read '{}'", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::vector<std::uint64_t> kDefaultGrains{1, 2, 4, 8, 16, 24, 32};

bool valuesAgree(const Value& a, const Value& b, double tol) {
  if (a.type() != b.type()) return false;
  if (isInteger(a.type()) || a == b) return a == b;
  const double x = a.toDouble();
  const double y = b.toDouble();
  if (std::isnan(x) || std::isnan(y)) return std::isnan(x) && std::isnan(y);
  return std::abs(x - y) <= tol * std::max(std::abs(x), std::abs(y));
}

std::shared_ptr<const mpmd::MpmdKernel> compileFor(const ast::KernelProgram& k) {
  mpmd::TransformOptions opts;
  opts.warp_mode = ast::containsWarpIntrinsic(k.body);
  return std::make_shared<const mpmd::MpmdKernel>(mpmd::compile(k, opts));
}

struct SerialResult {
  std::vector<host::DownloadResult> downloads;
  std::uint64_t working_set = 0;
  std::size_t reordered_kernels = 0;
};

// Executes the script on the calling thread, blocks in ascending order.
SerialResult serialRun(const LoadedCase& c, bool reorder, TraceSink* sink, const std::filesystem::path& base) {
  SerialResult r;
  DeviceArena arena;
  host::BufferMap buffers;
  std::map<std::string, std::shared_ptr<const mpmd::MpmdKernel>> variants;
  for (const auto& op : c.program.ops) {
    if (const auto* a = std::get_if<host::Alloc>(&op.node)) {
      buffers[a->buf] = arena.alloc(a->type, a->length);
      r.working_set += a->length * sizeOf(a->type);
    } else if (const auto* u = std::get_if<host::Upload>(&op.node)) {
      const auto buf = arena.get(buffers.at(u->buf));
      const auto values = host::materialize(u->source, buf->type(), buf->length(), base);
      for (std::size_t i = 0; i < values.size(); ++i) buf->store(i, values[i]);
    } else if (const auto* l = std::get_if<host::Launch>(&op.node)) {
      const ast::KernelProgram& k = c.kernels.at(l->kernel);
      auto& kernel = variants[l->kernel];
      if (!kernel) {
        kernel = compileFor(k);
        if (reorder) {
          try {
            kernel = std::make_shared<const mpmd::MpmdKernel>(mpmd::reorderGridStride(*kernel));
            ++r.reordered_kernels;
          } catch (const mpmd::PatternNotFound&) {
          }
        }
      }
      const PackedArgs packed = host::packParams(*l, k, buffers, arena);
      const auto args = packed.unpack(k.params);
      runAllBlocks(*kernel, LaunchShape{l->grid, l->block, l->shmem}, args, arena, sink);
    } else if (const auto* d = std::get_if<host::Download>(&op.node)) {
      const auto buf = arena.get(buffers.at(d->buf));
      r.downloads.push_back({d->buf, buf->type(), buf->values()});
    } else if (const auto* f = std::get_if<host::Free>(&op.node)) {
      arena.free(buffers.at(f->buf));
      buffers.erase(f->buf);
    }
  }
  return r;
}

}  // namespace

BenchCase loadScript(const std::filesystem::path& script, const std::optional<std::filesystem::path>& kernels) {
  std::filesystem::path kn = kernels ? *kernels : script;
  if (!kernels) kn.replace_extension(".kn");
  BenchCase c;
  c.name = script.stem().string();
  c.kernel_source = readFile(kn);
  c.host_source = readFile(script);
  c.base_dir = script.parent_path();
  c.grains = kDefaultGrains;
  return c;
}

BenchCase loadCase(const std::filesystem::path& dir, const std::string& name) {
  return loadScript(dir / (name + ".host"));
}

std::vector<std::string> corpusNames() {
  return {"vecAdd", "dynamicReverse", "reduceSum", "hist", "fir", "warpReduce", "gaMatch"};
}

BenchCase vecAddCase(std::uint32_t grid, std::uint32_t block) {
  const std::uint64_t n = std::uint64_t{grid} * block;
  BenchCase c;
  c.name = fmt::format("vecAdd_g{}_b{}", grid, block);
  c.kernel_source = R"(kernel vecAdd(a: global f64[], b: global f64[], c: global f64[], n: i32) {
  let id: i32 = blockIdx.x * blockDim.x + threadIdx.x;
  if (id < n) {
    c[id] = a[id] + b[id];
  }
}
)";
  c.host_source = fmt::format(
      "alloc a f64 {0}\nalloc b f64 {0}\nalloc c f64 {0}\nupload a fill:rand:1\nupload b fill:seq\n"
      "launch vecAdd grid {1} 1 1 block {2} 1 1 shmem 0 args a b c {0}\ndownload c c.bin\n",
      n, grid, block);
  c.grains = kDefaultGrains;
  return c;
}

LoadedCase load(const BenchCase& c) {
  LoadedCase l;
  l.kernels = host::makeKernelTable(parseUnit(c.kernel_source));
  l.program = host::parseHost(c.host_source, l.kernels);
  return l;
}

std::optional<std::string> compareDownloads(const std::vector<host::DownloadResult>& expected,
                                             const std::vector<host::DownloadResult>& actual, double tol) {
  if (expected.size() != actual.size())
    return fmt::format("{} downloads expected, {} produced", expected.size(), actual.size());
  for (std::size_t d = 0; d < expected.size(); ++d) {
    const auto& e = expected[d];
    const auto& a = actual[d];
    if (e.buf != a.buf || e.type != a.type || e.values.size() != a.values.size())
      return fmt::format("download {} differs in buffer, type or length", d);
    for (std::size_t i = 0; i < e.values.size(); ++i)
      if (!valuesAgree(e.values[i], a.values[i], tol))
        return fmt::format("{}[{}]: expected {}, got {}", e.buf, i, e.values[i].str(), a.values[i].str());
  }
  return std::nullopt;
}

std::vector<host::DownloadResult> oracle(const LoadedCase& c, std::uint32_t warp_size) {
  host::RunOptions opts;
  opts.mode = host::ExecMode::Reference;
  opts.warp_size = warp_size;
  host::HostRunner runner(c.kernels, opts);
  return runner.run(c.program).downloads;
}

OracleMismatch::OracleMismatch(std::string case_name, std::uint64_t grain, std::uint64_t seed,
                               const std::string& detail)
    : Error(fmt::format("{}: grain {} seed {}: {}", case_name, grain, seed, detail)), grain_(grain), seed_(seed) {}

SweepReport runSweep(const BenchCase& c, const std::vector<std::uint64_t>& grains, const SweepOptions& opts) {
  const LoadedCase loaded = load(c);
  std::vector<host::DownloadResult> expected;
  {
    host::RunOptions ro;
    ro.mode = host::ExecMode::Reference;
    ro.base_dir = c.base_dir;
    expected = host::HostRunner(loaded.kernels, ro).run(loaded.program).downloads;
  }
  SweepReport report{c.name, opts.pool, {}};
  for (const std::uint64_t grain : grains) {
    SweepRow row;
    row.grain = grain;
    row.repeats = std::max<std::size_t>(1, opts.repeats);
    std::vector<double> times;
    for (std::size_t rep = 0; rep < row.repeats; ++rep) {
      host::RunOptions ro;
      ro.base_dir = c.base_dir;
      ro.runtime.pool_size = opts.pool;
      ro.runtime.policy = runtime::FetchPolicy::fixed(grain);
      ro.runtime.fair_fetch = opts.fair_fetch;
      const auto start = std::chrono::steady_clock::now();
      const host::RunResult r = host::HostRunner(loaded.kernels, ro).run(loaded.program);
      times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
      if (auto diff = compareDownloads(expected, r.downloads)) throw OracleMismatch(c.name, grain, opts.seed + rep, *diff);
      row.fetch_count = r.counters->fetch_count;
      row.blocks_executed = r.counters->blocks_executed;
      row.expected_fetch_count = 0;
      const runtime::LaunchRecord* largest = nullptr;
      for (const auto& l : r.launches) {
        const std::uint64_t g = std::min(grain, l.total_blocks);
        row.expected_fetch_count += (l.total_blocks + g - 1) / g;
        if (!largest || l.total_blocks > largest->total_blocks) largest = &l;
      }
      row.idle_workers = largest ? largest->idleWorkers() : 0;
    }
    std::sort(times.begin(), times.end());
    row.median_ms = times[times.size() / 2];
    row.oracle_ok = true;
    report.rows.push_back(row);
  }
  return report;
}

ReorderReport runReorderExperiment(const BenchCase& c, const cachesim::CacheConfig& cache) {
  cache.validate();
  const LoadedCase loaded = load(c);
  host::RunOptions ro;
  ro.mode = host::ExecMode::Reference;
  ro.base_dir = c.base_dir;
  const auto expected = host::HostRunner(loaded.kernels, ro).run(loaded.program).downloads;

  ReorderReport report;
  report.case_name = c.name;
  report.cache = cache;
  cachesim::CacheSimulator before(cache);
  const SerialResult a = serialRun(loaded, false, &before, c.base_dir);
  cachesim::CacheSimulator after(cache);
  const SerialResult b = serialRun(loaded, true, &after, c.base_dir);
  if (b.reordered_kernels == 0)
    throw mpmd::PatternNotFound(fmt::format("case '{}' launches no kernel with a grid-stride loop", c.name));
  report.working_set_bytes = a.working_set;
  report.original = before.report();
  report.reordered = after.report();
  report.original_ok = !compareDownloads(expected, a.downloads).has_value();
  report.reordered_ok = !compareDownloads(expected, b.downloads).has_value();
  return report;
}

MemoryTrace traceScript(const BenchCase& c, bool reorder) {
  MemoryTrace trace;
  serialRun(load(c), reorder, &trace, c.base_dir);
  return trace;
}

nlohmann::json toJson(const SweepReport& r) {
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"grain", row.grain},
                    {"repeats", row.repeats},
                    {"median_ms", row.median_ms},
                    {"fetch_count", row.fetch_count},
                    {"expected_fetch_count", row.expected_fetch_count},
                    {"idle_workers", row.idle_workers},
                    {"blocks_executed", row.blocks_executed},
                    {"oracle_ok", row.oracle_ok}});
  return {{"case", r.case_name}, {"pool", r.pool}, {"rows", rows}};
}

nlohmann::json toJson(const ReorderReport& r) {
  return {{"case", r.case_name},
          {"cache", cachesim::toJson(r.cache)},
          {"working_set_bytes", r.working_set_bytes},
          {"original", cachesim::toJson(r.original)},
          {"reordered", cachesim::toJson(r.reordered)},
          {"load_miss_delta", r.loadMissDelta()},
          {"original_ok", r.original_ok},
          {"reordered_ok", r.reordered_ok}};
}

std::string table(const SweepReport& r) {
  std::string s = fmt::format("case {}  pool {}\n", r.case_name, r.pool);
  s += fmt::format("{:>6} {:>12} {:>12} {:>10} {:>6} {:>10} {:>7}\n", "grain", "median_ms", "fetches", "expected",
                   "idle", "blocks", "oracle");
  for (const auto& row : r.rows)
    s += fmt::format("{:>6} {:>12.3f} {:>12} {:>10} {:>6} {:>10} {:>7}\n", row.grain, row.median_ms, row.fetch_count,
                     row.expected_fetch_count, row.idle_workers, row.blocks_executed, row.oracle_ok ? "ok" : "FAIL");
  return s;
}

std::string table(const ReorderReport& r) {
  std::string s = fmt::format("case {}  working set {} B  cache {} B / {} B lines / {} ways\n", r.case_name,
                              r.working_set_bytes, r.cache.capacity, r.cache.line_size, r.cache.ways);
  s += fmt::format("{:<10} {:>12} {:>12} {:>12} {:>12} {:>7}\n", "variant", "loads", "load_miss", "stores",
                   "store_miss", "oracle");
  auto line = [&](std::string_view name, const cachesim::CacheReport& c, bool ok) {
    s += fmt::format("{:<10} {:>12} {:>12} {:>12} {:>12} {:>7}\n", name, c.loads, c.load_misses, c.stores,
                     c.store_misses, ok ? "ok" : "FAIL");
  };
  line("original", r.original, r.original_ok);
  line("reordered", r.reordered, r.reordered_ok);
  s += fmt::format("load miss delta {}\n", r.loadMissDelta());
  return s;
}

}  // namespace blockfuse::bench
