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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <string>

#include <fmt/format.h>

#include "blockfuse/bench.hpp"
#include "blockfuse/host.hpp"
#include "blockfuse/parser.hpp"
#include "support.hpp"

using namespace blockfuse;
using namespace blockfuse::testing;

namespace {

// Wall-clock budgets in seconds.
constexpr double kFissionBudget = 1;
constexpr double kOracleBudget = 60;
constexpr double kFetchBudget = 30;
constexpr double kBarrierBudget = 30;
constexpr double kHistBudget = 30;
constexpr double kWarpBudget = 10;
constexpr double kReorderBudget = 60;
constexpr double kInstantBudget = 1;

constexpr double kFloatRelTol = 1e-6;

struct Failure {
  std::string what;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure{what};
}

bool valuesClose(const std::vector<Value>& a, const std::vector<Value>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].type() != b[i].type()) return false;
    if (isInteger(a[i].type()) || a[i] == b[i]) {
      if (!(a[i] == b[i])) return false;
      continue;
    }
    const double x = a[i].toDouble(), y = b[i].toDouble();
    if (!(std::abs(x - y) <= kFloatRelTol * std::max(std::abs(x), std::abs(y)))) return false;
  }
  return true;
}

std::uint64_t ceilDiv(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// ---------------------------------------------------------------------------

std::string fission() {
  const auto ast = corpusKernel("dynamicReverse");
  const auto k = mpmd::compile(ast);
  require(k.sections.size() == 2, fmt::format("{} sections", k.sections.size()));
  std::vector<std::string> names;
  for (const auto& v : k.expanded_vars) names.push_back(v.name);
  std::sort(names.begin(), names.end());
  require(names == std::vector<std::string>{"t", "tr"}, "expanded vars " + fmt::format("{}", fmt::join(names, ",")));
  DeviceArena arena;
  const auto d = upload(arena, ScalarType::I32, ints({0, 1, 2, 3, 4, 5, 6, 7}));
  runtime::RuntimeOptions ro;
  ro.pool_size = 2;
  runOnRuntime(ast, {{1, 1, 1}, {8, 1, 1}, 32}, {d, Value::i32(8)}, arena, ro);
  require(arena.get(d)->values() == ints({7, 6, 5, 4, 3, 2, 1, 0}), "reversal output");
  return "sections=2 expanded={t,tr} d=[7..0]";
}

// A corpus kernel instance: shape, arguments and the buffers to compare.
struct Instance {
  LaunchShape shape;
  std::vector<ArgValue> args;
  std::vector<BufferHandle> outputs;
  bool warp = false;
};

using InstanceFn = std::function<Instance(std::mt19937_64&, DeviceArena&)>;

std::uint32_t pick(std::mt19937_64& rng, std::uint32_t lo, std::uint32_t hi) {
  return lo + static_cast<std::uint32_t>(rng() % (hi - lo + 1));
}

std::vector<std::pair<std::string, InstanceFn>> corpusInstances() {
  std::vector<std::pair<std::string, InstanceFn>> out;
  out.emplace_back("vecAdd", [](std::mt19937_64& rng, DeviceArena& a) {
    const std::uint32_t block = pick(rng, 1, 512), grid = pick(rng, 1, 4096 / block);
    const std::uint32_t n = pick(rng, 1, grid * block);
    const auto x = upload(a, ScalarType::F64, randomValues(rng, ScalarType::F64, n));
    const auto y = upload(a, ScalarType::F64, randomValues(rng, ScalarType::F64, n));
    const auto z = a.alloc(ScalarType::F64, n);
    return Instance{{{grid, 1, 1}, {block, 1, 1}, 0}, {x, y, z, Value::i32(static_cast<std::int32_t>(n))}, {z}};
  });
  out.emplace_back("dynamicReverse", [](std::mt19937_64& rng, DeviceArena& a) {
    const std::uint32_t n = pick(rng, 1, 4096);
    const auto d = upload(a, ScalarType::I32, randomValues(rng, ScalarType::I32, n));
    return Instance{{{1, 1, 1}, {n, 1, 1}, 4ull * n}, {d, Value::i32(static_cast<std::int32_t>(n))}, {d}};
  });
  out.emplace_back("reduceSum", [](std::mt19937_64& rng, DeviceArena& a) {
    const std::uint32_t block = pick(rng, 1, 1024), grid = pick(rng, 1, 4096 / block);
    const std::uint32_t n = pick(rng, 1, grid * block);
    std::int32_t steps = 0;
    while ((1u << steps) < block) ++steps;
    const auto in = upload(a, ScalarType::F32, randomValues(rng, ScalarType::F32, n));
    const auto outb = a.alloc(ScalarType::F32, grid);
    return Instance{{{grid, 1, 1}, {block, 1, 1}, 0},
                    {in, outb, Value::i32(static_cast<std::int32_t>(n)), Value::i32(steps)},
                    {outb}};
  });
  out.emplace_back("hist", [](std::mt19937_64& rng, DeviceArena& a) {
    const std::uint32_t block = pick(rng, 1, 256), grid = pick(rng, 1, 4096 / block);
    const std::uint32_t per = pick(rng, 1, 8), nbins = pick(rng, 1, 64);
    const auto data = upload(a, ScalarType::I32, randomValues(rng, ScalarType::I32, std::size_t{grid} * block * per));
    const auto bins = a.alloc(ScalarType::I32, nbins);
    return Instance{{{grid, 1, 1}, {block, 1, 1}, 0},
                    {data, bins, Value::i32(static_cast<std::int32_t>(nbins)), Value::i32(static_cast<std::int32_t>(per))},
                    {bins}};
  });
  out.emplace_back("fir", [](std::mt19937_64& rng, DeviceArena& a) {
    const std::uint32_t block = pick(rng, 1, 256), grid = pick(rng, 1, 4096 / block);
    const std::uint32_t per = pick(rng, 1, 4), taps = pick(rng, 1, 16);
    const std::size_t outputs = std::size_t{grid} * block * per;
    const auto in = upload(a, ScalarType::F32, randomValues(rng, ScalarType::F32, outputs + taps - 1));
    const auto co = upload(a, ScalarType::F32, randomValues(rng, ScalarType::F32, taps));
    const auto o = a.alloc(ScalarType::F32, outputs);
    return Instance{{{grid, 1, 1}, {block, 1, 1}, 0},
                    {in, co, o, Value::i32(static_cast<std::int32_t>(taps)), Value::i32(static_cast<std::int32_t>(per))},
                    {o}};
  });
  out.emplace_back("warpReduce", [](std::mt19937_64& rng, DeviceArena& a) {
    const std::uint32_t block = 32 * pick(rng, 1, 32), grid = pick(rng, 1, 4096 / block);
    const std::uint32_t n = pick(rng, 1, grid * block);
    const auto in = upload(a, ScalarType::I32, randomValues(rng, ScalarType::I32, n));
    const auto o = a.alloc(ScalarType::I32, std::size_t{grid} * block / 32);
    return Instance{{{grid, 1, 1}, {block, 1, 1}, 0}, {in, o, Value::i32(static_cast<std::int32_t>(n))}, {o}, true};
  });
  return out;
}

std::string oracleEquivalence() {
  std::mt19937_64 rng(2026);
  std::size_t runs = 0;
  for (const auto& [name, make] : corpusInstances()) {
    const auto ast = corpusKernel(name);
    for (int i = 0; i < 50; ++i) {
      const std::uint64_t seed = rng();
      std::mt19937_64 a_rng(seed), b_rng(seed);
      DeviceArena ra, rb;
      const Instance ia = make(a_rng, ra);
      const Instance ib = make(b_rng, rb);
      require(ia.shape.grid.volume() * ia.shape.block.volume() <= 4096, "shape too large");
      runReference(ast, ia.shape, ia.args, ra, 32);
      runtime::RuntimeOptions ro;
      ro.pool_size = 1 + seed % 6;
      ro.policy = seed % 2 ? runtime::FetchPolicy::average() : runtime::FetchPolicy::fixed(1 + seed % 7);
      runOnRuntime(ast, ib.shape, ib.args, rb, ro, ib.warp, 32);
      for (std::size_t o = 0; o < ia.outputs.size(); ++o)
        require(valuesClose(ra.get(ia.outputs[o])->values(), rb.get(ib.outputs[o])->values()),
                fmt::format("{} instance {} (grid {} block {}) differs", name, i, to_string(ia.shape.grid),
                            to_string(ia.shape.block)));
      ++runs;
    }
  }
  return fmt::format("{} kernel instances equal the reference", runs);
}

std::string fetchCountLaw() {
  const auto k = std::make_shared<const mpmd::MpmdKernel>(mpmd::compile(parse("kernel nop(a: global i32[]) { }")));
  std::mt19937_64 rng(44);
  for (int i = 0; i < 200; ++i) {
    const std::uint64_t total = 1 + rng() % 10000, grain = 1 + rng() % 64;
    runtime::RuntimeOptions o;
    o.pool_size = 1 + rng() % 16;
    o.policy = runtime::FetchPolicy::fixed(grain);
    runtime::Runtime rt(o);
    DeviceArena arena;
    const auto a = arena.alloc(ScalarType::I32, 1);
    const auto id = rt.launch(k, {{static_cast<std::uint32_t>(total), 1, 1}, {1, 1, 1}, 0},
                              PackedArgs::pack(k->params, std::vector<ArgValue>{a}), arena);
    rt.deviceSynchronize();
    const auto r = rt.record(id);
    require(rt.counters().fetch_count == ceilDiv(total, grain) && r.fetches == ceilDiv(total, grain) &&
                r.exactlyOnce(),
            fmt::format("total {} grain {} pool {}: {} fetches", total, grain, o.pool_size, r.fetches));
  }

  // 12 blocks on 3 workers under both policies.
  const auto vec = corpusKernel("vecAdd");
  auto run12 = [&](runtime::FetchPolicy p) {
    DeviceArena arena;
    std::mt19937_64 vr(1);
    const auto x = upload(arena, ScalarType::F64, randomValues(vr, ScalarType::F64, 12 * 32));
    const auto y = upload(arena, ScalarType::F64, randomValues(vr, ScalarType::F64, 12 * 32));
    const auto z = arena.alloc(ScalarType::F64, 12 * 32);
    runtime::RuntimeOptions o;
    o.pool_size = 3;
    o.policy = p;
    o.fair_fetch = true;
    return runOnRuntime(vec, {{12, 1, 1}, {32, 1, 1}, 0}, {x, y, z, Value::i32(12 * 32)}, arena, o);
  };
  const auto avg = run12(runtime::FetchPolicy::average());
  const auto agg = run12(runtime::FetchPolicy::aggressive());
  require(avg.grain == 4 && avg.fetches == 3 && avg.idleWorkers() == 0,
          fmt::format("average: grain {} fetches {} idle {}", avg.grain, avg.fetches, avg.idleWorkers()));
  require(agg.grain == 6 && agg.fetches == 2 && agg.idleWorkers() >= 1,
          fmt::format("aggressive: grain {} fetches {} idle {}", agg.grain, agg.fetches, agg.idleWorkers()));
  return fmt::format("200 configs exact; average (grain 4, 3 fetches, 0 idle), aggressive (grain 6, 2 fetches, {} idle)",
                     agg.idleWorkers());
}

std::string averageResolution() {
  for (std::uint64_t g = 1; g <= 64; ++g)
    for (std::uint64_t p = 1; p <= 64; ++p) {
      std::uint64_t expect = 1;
      while (expect * p < g) ++expect;
      const auto got = runtime::resolveGrain(runtime::FetchPolicy::average(), g, p);
      require(got == expect, fmt::format("grid {} pool {}: {} != {}", g, p, got, expect));
    }
  return "4096 pairs";
}

std::string implicitBarriers() {
  auto kernels = host::makeKernelTable(parseUnit(hostKernelSource()));
  host::SummaryTable sums;
  for (const auto& [name, k] : kernels) sums.emplace(name, host::summarizeAccess(k));
  auto clash = [](const ScriptAccess& e, const ScriptAccess& l) {
    for (const auto& b : e.writes)
      if (l.reads.count(b) || l.writes.count(b)) return true;
    for (const auto& b : e.reads)
      if (l.writes.count(b)) return true;
    return false;
  };
  std::mt19937_64 rng(55);
  std::size_t conflicts = 0, inserted = 0, removals = 0;
  for (int n = 0; n < 100; ++n) {
    const auto script = randomHostScript(rng);
    const auto q = host::insertBarriers(host::parseHost(script.text, kernels), sums);
    std::vector<ScriptAccess> ops;
    std::size_t src = 0;
    for (const auto& op : q.ops) {
      const auto* y = std::get_if<host::Sync>(&op.node);
      ops.push_back(y && y->implicit ? ScriptAccess{{}, {}, false, true} : script.ops[src++]);
    }
    for (std::size_t j = 0; j < ops.size(); ++j)
      for (std::size_t i = j; i-- > 0 && !ops[i].sync;) {
        if (!ops[i].launch || !clash(ops[i], ops[j])) continue;
        require(false, fmt::format("script {}: op {} conflicts with launch {} without a sync", n, j, i));
      }
    for (std::size_t j = 0; j < ops.size(); ++j)
      for (std::size_t i = 0; i < j; ++i)
        if (ops[i].launch && clash(ops[i], ops[j])) ++conflicts;

    // Adversarial scheduler: launches stay deferred until a sync.
    for (std::size_t i = 0; i < q.ops.size(); ++i) {
      const auto* y = std::get_if<host::Sync>(&q.ops[i].node);
      if (!y || !y->implicit) continue;
      ++inserted;
      host::HostProgram cut = q;
      cut.ops.erase(cut.ops.begin() + static_cast<std::ptrdiff_t>(i));
      host::RunOptions o;
      o.runtime.pool_size = 2;
      o.runtime.hold_until_sync = true;
      o.insert_barriers = false;
      const auto r = host::HostRunner(kernels, o).run(cut);
      require(!r.conflicts.empty(), fmt::format("script {}: removing sync at op {} went undetected", n, i));
      ++removals;
    }
  }
  require(inserted > 0, "no barriers were inserted");
  for (int n = 0; n < 100; ++n) {
    HostScriptOptions o;
    o.buffers = 3 + rng() % 6;
    o.disjoint = true;
    const auto q = host::insertBarriers(host::parseHost(randomHostScript(rng, o).text, kernels), sums);
    require(q.implicitSyncs() == 0, fmt::format("control {} got {} syncs", n, q.implicitSyncs()));
  }
  return fmt::format("{} conflicting pairs covered, {} syncs each necessary, 100 controls sync-free", conflicts,
                     removals);
}

std::string histogramExactlyOnce() {
  const auto ast = corpusKernel("hist");
  constexpr std::uint32_t kGrid = 96, kBlock = 64, kPer = 4, kBins = 37;
  std::mt19937_64 rng(66);
  const auto data = randomValues(rng, ScalarType::I32, kGrid * kBlock * kPer);
  std::vector<std::int64_t> serial(kBins, 0);
  for (const auto& v : data) ++serial[static_cast<std::size_t>(v.asI32() % static_cast<std::int32_t>(kBins))];

  std::size_t runs = 0;
  for (std::size_t pool : {1, 2, 4, 8}) {
    for (std::uint64_t grain : {std::uint64_t{1}, ceilDiv(kGrid, pool), std::uint64_t{kGrid}}) {
      DeviceArena arena;
      const auto d = upload(arena, ScalarType::I32, data);
      const auto bins = arena.alloc(ScalarType::I32, kBins);
      runtime::RuntimeOptions o;
      o.pool_size = pool;
      o.policy = runtime::FetchPolicy::fixed(grain);
      o.delay_seed = pool * 100 + grain;
      o.max_delay_us = 20;
      const auto r = runOnRuntime(ast, {{kGrid, 1, 1}, {kBlock, 1, 1}, 0},
                                  {d, bins, Value::i32(kBins), Value::i32(kPer)}, arena, o);
      require(asInts(arena.get(bins)->values()) == serial, fmt::format("pool {} grain {} counts differ", pool, grain));
      require(r.block_runs.size() == kGrid &&
                  std::all_of(r.block_runs.begin(), r.block_runs.end(), [](auto n) { return n == 1; }),
              fmt::format("pool {} grain {}: a block did not run exactly once", pool, grain));
      ++runs;
    }
  }
  return fmt::format("{} configurations equal the serial count", runs);
}

std::string warpMode() {
  // Shuffle reduction against a plain per-warp sum.
  const auto ast = corpusKernel("warpReduce");
  constexpr std::uint32_t kGrid = 16, kBlock = 64, kN = kGrid * kBlock - 24;
  std::mt19937_64 rng(77);
  const auto input = randomValues(rng, ScalarType::I32, kN);
  std::vector<std::int64_t> expect(kGrid * kBlock / 32, 0);
  for (std::size_t i = 0; i < kN; ++i) expect[i / 32] += input[i].asI32();
  DeviceArena arena;
  const auto in = upload(arena, ScalarType::I32, input);
  const auto out = arena.alloc(ScalarType::I32, expect.size());
  runtime::RuntimeOptions o;
  o.pool_size = 3;
  runOnRuntime(ast, {{kGrid, 1, 1}, {kBlock, 1, 1}, 0}, {in, out, Value::i32(kN)}, arena, o, true, 32);
  require(asInts(arena.get(out)->values()) == expect, "warp reduction differs from the per-warp sums");

  // Without intrinsics the loop nest changes but the results do not.
  std::size_t compared = 0;
  for (const auto& [name, make] : corpusInstances()) {
    if (name == "warpReduce") continue;
    const auto k = corpusKernel(name);
    for (int i = 0; i < 5; ++i) {
      const std::uint64_t seed = rng();
      std::mt19937_64 ra(seed), rb(seed);
      DeviceArena aa, ab;
      const Instance ia = make(ra, aa), ib = make(rb, ab);
      runAllBlocks(mpmd::compile(k, {false, 32}), ia.shape, ia.args, aa);
      runAllBlocks(mpmd::compile(k, {true, 32}), ib.shape, ib.args, ab);
      for (std::size_t b = 0; b < ia.outputs.size(); ++b)
        require(aa.get(ia.outputs[b])->values() == ab.get(ib.outputs[b])->values(),
                fmt::format("{}: warp mode changed the output", name));
      ++compared;
    }
  }
  for (int i = 0; i < 40; ++i) {
    const auto k = parse(randomKernel(rng, "g"));
    const std::uint32_t block = pick(rng, 1, 96);
    DeviceArena aa, ab;
    std::mt19937_64 ra(i), rb(i);
    auto setup = [&](DeviceArena& a, std::mt19937_64& r) {
      const std::size_t n = 2 * block;
      return std::vector<ArgValue>{upload(a, ScalarType::I32, randomValues(r, ScalarType::I32, n)),
                                   a.alloc(ScalarType::I32, n), a.alloc(ScalarType::F32, n),
                                   a.alloc(ScalarType::I32, 8), Value::i32(3)};
    };
    const auto xa = setup(aa, ra), xb = setup(ab, rb);
    const LaunchShape s{{2, 1, 1}, {block, 1, 1}, 4ull * block};
    runAllBlocks(mpmd::compile(k, {false, 32}), s, xa, aa);
    runAllBlocks(mpmd::compile(k, {true, 32}), s, xb, ab);
    for (std::size_t b = 1; b <= 3; ++b)
      require(aa.get(std::get<BufferHandle>(xa[b]))->values() == ab.get(std::get<BufferHandle>(xb[b]))->values(),
              fmt::format("generated kernel {} differs under warp mode", i));
    ++compared;
  }
  return fmt::format("shuffle reduction exact; {} intrinsic-free runs identical", compared);
}

std::string reorderDirection() {
  const auto r = bench::runReorderExperiment(bench::loadCase(corpusDir(), "hist"));
  require(r.working_set_bytes >= 32 * r.cache.capacity,
          fmt::format("working set {} below 32x cache {}", r.working_set_bytes, r.cache.capacity));
  require(r.original_ok && r.reordered_ok, "an output differs from the oracle");
  require(r.reordered.load_misses < r.original.load_misses,
          fmt::format("load misses {} -> {}", r.original.load_misses, r.reordered.load_misses));
  return fmt::format("load misses {} -> {} (working set {} B, cache {} B)", r.original.load_misses,
                     r.reordered.load_misses, r.working_set_bytes, r.cache.capacity);
}

std::string packIdentity() {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 500; ++i) {
    const auto sig = randomSignature(rng, 1 + rng() % 16);
    const auto args = randomArgs(rng, sig);
    const auto packed = PackedArgs::pack(sig, args);
    const auto back = packed.unpack(sig);
    require(back.size() == args.size(), "arity changed");
    for (std::size_t s = 0; s < args.size(); ++s) {
      const auto* a = std::get_if<Value>(&args[s]);
      const auto* b = std::get_if<Value>(&back[s]);
      if (a) require(b && a->type() == b->type() && a->bits() == b->bits(), fmt::format("signature {} slot {}", i, s));
      else require(std::get<BufferHandle>(args[s]) == std::get<BufferHandle>(back[s]),
                   fmt::format("signature {} handle slot {}", i, s));
    }
  }
  return "500 signatures";
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget;
    std::function<std::string()> run;
  };
  const std::vector<Criterion> criteria{
      {"fission structure", kFissionBudget, fission},
      {"oracle equivalence", kOracleBudget, oracleEquivalence},
      {"fetch-count law", kFetchBudget, fetchCountLaw},
      {"average grain resolution", kInstantBudget, averageResolution},
      {"implicit barrier insertion", kBarrierBudget, implicitBarriers},
      {"exactly-once histogram", kHistBudget, histogramExactlyOnce},
      {"warp mode", kWarpBudget, warpMode},
      {"reordering direction", kReorderBudget, reorderDirection},
      {"pack/unpack identity", kInstantBudget, packIdentity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = c.run();
    } catch (const Failure& f) {
      ok = false;
      detail = f.what;
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (ok && secs >= c.budget) {
      ok = false;
      detail += fmt::format("; exceeded {:.0f} s budget", c.budget);
    }
    failed += ok ? 0 : 1;
    std::cout << fmt::format("{} [{}] {} ({:.2f} s): {}\n", ok ? "PASS" : "FAIL", i + 1, c.name, secs, detail);
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
