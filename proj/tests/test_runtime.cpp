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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "blockfuse/parser.hpp"
#include "support.hpp"

using namespace blockfuse;
using namespace blockfuse::testing;
using namespace blockfuse::runtime;

namespace {

std::uint64_t ceilDiv(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

// Writes each block's id into its slot and counts executions.
constexpr const char* kMarkSrc =
    "kernel mark(ids: global i32[], runs: global i32[]) {"
    "  let b: i32 = (blockIdx.z * gridDim.y + blockIdx.y) * gridDim.x + blockIdx.x;"
    "  if (threadIdx.x == 0) { ids[b] = b; atomic_add(runs[b], 1); }"
    "}";

struct MarkLaunch {
  std::shared_ptr<const mpmd::MpmdKernel> kernel = std::make_shared<const mpmd::MpmdKernel>(mpmd::compile(parse(kMarkSrc)));
  DeviceArena arena;
  BufferHandle ids, runs;
  LaunchShape shape;

  explicit MarkLaunch(Dim3 grid, std::uint32_t block = 2) : shape{grid, {block, 1, 1}, 0} {
    ids = arena.alloc(ScalarType::I32, grid.volume());
    runs = arena.alloc(ScalarType::I32, grid.volume());
  }
  std::uint64_t launch(Runtime& rt) {
    return rt.launch(kernel, shape, PackedArgs::pack(kernel->params, std::vector<ArgValue>{ids, runs}), arena);
  }
  bool allRanOnce() const {
    const auto r = asInts(arena.get(runs)->values());
    const auto id = asInts(arena.get(ids)->values());
    for (std::size_t b = 0; b < r.size(); ++b)
      if (r[b] != 1 || id[b] != static_cast<std::int64_t>(b)) return false;
    return true;
  }
};

RuntimeOptions pool(std::size_t n, FetchPolicy p = FetchPolicy::average()) {
  RuntimeOptions o;
  o.pool_size = n;
  o.policy = p;
  return o;
}

}  // namespace

TEST_CASE("grain decisions") {
  CHECK(resolveGrain(FetchPolicy::average(), 16, 4) == 4);
  CHECK(resolveGrain(FetchPolicy::average(), 10, 4) == 3);
  CHECK(resolveGrain(FetchPolicy::average(), 3, 8) == 1);
  CHECK(resolveGrain(FetchPolicy::fixed(6), 12, 3) == 6);
  CHECK(resolveGrain(FetchPolicy::fixed(50), 12, 3) == 12);
  CHECK_THROWS(FetchPolicy::fixed(0));
  CHECK_THROWS(resolveGrain(FetchPolicy::average(), 0, 3));

  const KernelStats light{10, 32, false};
  const KernelStats heavy{1000, 256, false};
  const KernelStats atomic{1000, 256, true};
  CHECK(resolveGrain(FetchPolicy::aggressive(), 12, 3, light) == 6);
  CHECK(resolveGrain(FetchPolicy::aggressive(), 12, 3, heavy) == 4);
  CHECK(resolveGrain(FetchPolicy::aggressive(), 12, 3, atomic) == 8);
  CHECK(resolveGrain(FetchPolicy::aggressive(), 5, 2, atomic) == 5);
  // The light threshold is configurable.
  CHECK(resolveGrain(FetchPolicy::aggressive(), 12, 3, heavy, AggressiveConfig{1u << 20}) == 6);
  CHECK(decideGrain(FetchPolicy::aggressive(), 12, 3, light).reason.find("light") != std::string::npos);
}

TEST_CASE("policy text round-trips") {
  for (const char* s : {"average", "auto", "fixed:7"}) CHECK(to_string(FetchPolicy::parse(s)) == s);
  CHECK_THROWS(FetchPolicy::parse("fixed:"));
  CHECK_THROWS(FetchPolicy::parse("fixed:0"));
  CHECK_THROWS(FetchPolicy::parse("greedy"));
}

TEST_CASE("exhaustive: average grain is the ceiling quotient") {
  for (std::uint64_t g = 1; g <= 64; ++g)
    for (std::uint64_t p = 1; p <= 64; ++p) {
      const std::uint64_t grain = resolveGrain(FetchPolicy::average(), g, p);
      // Smallest grain whose p fetches cover the grid.
      std::uint64_t expect = 1;
      while (expect * p < g) ++expect;
      CHECK(grain == expect);
    }
}

TEST_CASE("fetched ranges tile the grid in order") {
  struct Case {
    std::uint32_t grid;
    std::size_t pool;
    FetchPolicy policy;
    std::vector<BlockRange> ranges;
  };
  const std::vector<Case> cases{
      {16, 4, FetchPolicy::average(), {{0, 4}, {4, 4}, {8, 4}, {12, 4}}},
      {10, 4, FetchPolicy::average(), {{0, 3}, {3, 3}, {6, 3}, {9, 1}}},
      {12, 2, FetchPolicy::fixed(6), {{0, 6}, {6, 6}}},
      {5, 3, FetchPolicy::fixed(2), {{0, 2}, {2, 2}, {4, 1}}},
  };
  for (const auto& c : cases) {
    Runtime rt(pool(c.pool, c.policy));
    MarkLaunch m({c.grid, 1, 1});
    const auto id = m.launch(rt);
    rt.deviceSynchronize();
    const auto r = rt.record(id);
    CHECK(r.ranges == c.ranges);
    CHECK(r.fetches == c.ranges.size());
    CHECK(r.exactlyOnce());
    CHECK(m.allRanOnce());
  }
}

TEST_CASE("multi-dimensional grids run every block once") {
  Runtime rt(pool(3));
  MarkLaunch m({4, 2, 2});
  const auto id = m.launch(rt);
  rt.deviceSynchronize();
  const auto r = rt.record(id);
  CHECK(r.total_blocks == 16);
  CHECK(r.grain == 6);
  CHECK(r.fetches == 3);
  CHECK(r.exactlyOnce());
  CHECK(m.allRanOnce());
}

TEST_CASE("synchronization") {
  SUBCASE("with nothing launched returns immediately") {
    Runtime rt(pool(2));
    rt.deviceSynchronize();
    rt.deviceSynchronize();
    CHECK(rt.counters().syncs == 2);
    CHECK(rt.counters().fetch_count == 0);
  }
  SUBCASE("waits for every outstanding launch") {
    Runtime rt(pool(3));
    std::vector<std::unique_ptr<MarkLaunch>> ls;
    std::vector<std::uint64_t> ids;
    for (std::uint32_t i = 0; i < 6; ++i) {
      ls.push_back(std::make_unique<MarkLaunch>(Dim3{5 + i, 1, 1}));
      ids.push_back(ls.back()->launch(rt));
    }
    rt.deviceSynchronize();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      CHECK_FALSE(rt.pending(ids[i]));
      CHECK(rt.record(ids[i]).finished());
      CHECK(ls[i]->allRanOnce());
    }
    CHECK(rt.counters().launches == 6);
  }
  SUBCASE("held launches stay pending until synchronized") {
    RuntimeOptions o = pool(2);
    o.hold_until_sync = true;
    Runtime rt(o);
    MarkLaunch m({8, 1, 1});
    const auto id = m.launch(rt);
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    CHECK(rt.pending(id));
    CHECK(rt.record(id).fetches == 0);
    rt.deviceSynchronize();
    CHECK_FALSE(rt.pending(id));
    CHECK(m.allRanOnce());
  }
}

TEST_CASE("launches are served first in, first out") {
  RuntimeOptions o = pool(3);
  o.delay_seed = 3;
  Runtime rt(o);
  MarkLaunch a({20, 1, 1}), b({20, 1, 1});
  const auto ia = a.launch(rt);
  const auto ib = b.launch(rt);
  rt.deviceSynchronize();
  const auto ra = rt.record(ia), rb = rt.record(ib);
  CHECK(*std::max_element(ra.fetch_seq.begin(), ra.fetch_seq.end()) <
        *std::min_element(rb.fetch_seq.begin(), rb.fetch_seq.end()));
  CHECK(rt.counters().fetch_count == ra.fetches + rb.fetches);
}

TEST_CASE("fetching happens outside the queue lock") {
  Runtime rt(pool(4, FetchPolicy::fixed(1)));
  MarkLaunch m({64, 1, 1});
  m.launch(rt);
  rt.deviceSynchronize();
  CHECK(rt.counters().guard_violations == 0);
  CHECK(rt.counters().blocks_executed == 64);
  const auto busy = rt.counters().busy_blocks;
  CHECK(std::accumulate(busy.begin(), busy.end(), std::uint64_t{0}) == 64);
}

TEST_CASE("faults name the launch and block") {
  const auto k = std::make_shared<const mpmd::MpmdKernel>(
      mpmd::compile(parse("kernel k(a: global i32[]) { a[blockIdx.x * 4 + threadIdx.x] = 1; }")));
  DeviceArena arena;
  const auto a = arena.alloc(ScalarType::I32, 4 * 6 + 2);
  Runtime rt(pool(2, FetchPolicy::fixed(3)));
  const auto id = rt.launch(k, {{8, 1, 1}, {4, 1, 1}, 0}, PackedArgs::pack(k->params, std::vector<ArgValue>{a}), arena);
  try {
    rt.deviceSynchronize();
    FAIL("expected a fault");
  } catch (const RuntimeFault& f) {
    CHECK(f.launchId() == id);
    CHECK(f.blockId() == 6);
    CHECK(f.trap().kind() == TrapKind::OutOfBounds);
  }
  // The fault is reported once; the runtime keeps working.
  rt.deviceSynchronize();
  MarkLaunch m({4, 1, 1});
  m.launch(rt);
  rt.deviceSynchronize();
  CHECK(m.allRanOnce());
}

TEST_CASE("shutdown") {
  Runtime rt(pool(2));
  MarkLaunch m({10, 1, 1});
  m.launch(rt);
  rt.shutdown();
  CHECK(m.allRanOnce());
  CHECK_THROWS_AS(m.launch(rt), PoolShutdown);
  rt.shutdown();
}

TEST_CASE("counters are stable once idle") {
  Runtime rt(pool(3));
  MarkLaunch m({9, 1, 1});
  m.launch(rt);
  rt.deviceSynchronize();
  const auto c1 = toJson(rt.counters());
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  auto c2 = toJson(rt.counters());
  CHECK(c1 == c2);
  CHECK(c1["fetch_count"] == 3);
}

TEST_CASE("the grain decision is logged") {
  std::vector<std::string> lines;
  RuntimeOptions o = pool(3, FetchPolicy::aggressive());
  o.log = [&](const std::string& s) { lines.push_back(s); };
  Runtime rt(o);
  MarkLaunch m({12, 1, 1});
  const auto id = m.launch(rt);
  rt.deviceSynchronize();
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].find("auto") != std::string::npos);
  CHECK(rt.record(id).grain_reason.find("atomic") != std::string::npos);
}

TEST_CASE("property: fetch count and utilization under fair fetching") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 60; ++i) {
    const std::uint32_t total = 1 + static_cast<std::uint32_t>(rng() % 200);
    const std::size_t p = 1 + rng() % 8;
    const bool average = rng() % 2 == 0;
    const FetchPolicy pol = average ? FetchPolicy::average() : FetchPolicy::fixed(1 + rng() % 20);
    RuntimeOptions o = pool(p, pol);
    o.fair_fetch = true;
    o.delay_seed = rng();
    o.max_delay_us = 3;
    Runtime rt(o);
    MarkLaunch m({total, 1, 1}, 1);
    const auto id = m.launch(rt);
    rt.deviceSynchronize();
    const auto r = rt.record(id);
    CAPTURE(total);
    CAPTURE(p);
    CAPTURE(r.grain);
    const std::uint64_t fetches = ceilDiv(total, r.grain);
    CHECK(r.fetches == fetches);
    CHECK(r.exactlyOnce());
    CHECK(m.allRanOnce());
    // Fair fetching spreads the fetches: no worker is more than one ahead.
    const auto busy = std::count_if(r.worker_blocks.begin(), r.worker_blocks.end(), [](auto n) { return n > 0; });
    CHECK(static_cast<std::uint64_t>(busy) == std::min<std::uint64_t>(p, fetches));
    if (average) {
      // Every worker gets a range exactly when the average grain splits the
      // grid into p pieces; otherwise ceil(T / ceil(T/p)) workers do.
      CHECK(static_cast<std::uint64_t>(busy) == ceilDiv(total, ceilDiv(total, p)));
      CHECK(r.idleWorkers() == p - fetches);
    }
  }
}

TEST_CASE("property: results do not depend on timing") {
  const auto ast = corpusKernel("hist");
  std::mt19937_64 rng(31);
  DeviceArena arena;
  const auto data = upload(arena, ScalarType::I32, randomValues(rng, ScalarType::I32, 16 * 32 * 4));
  std::vector<std::int64_t> first;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto bins = arena.alloc(ScalarType::I32, 16);
    RuntimeOptions o = pool(1 + seed % 5, seed % 2 ? FetchPolicy::fixed(1 + seed) : FetchPolicy::average());
    o.delay_seed = seed;
    o.max_delay_us = 20;
    const auto r = runOnRuntime(ast, {{16, 1, 1}, {32, 1, 1}, 0},
                                {data, bins, Value::i32(16), Value::i32(4)}, arena, o);
    CHECK(r.exactlyOnce());
    const auto got = asInts(arena.get(bins)->values());
    if (first.empty()) first = got;
    CHECK(got == first);
  }
  CHECK(std::accumulate(first.begin(), first.end(), std::int64_t{0}) == 16 * 32 * 4);
}
