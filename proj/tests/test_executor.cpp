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
#include <functional>
#include <sstream>

#include "blockfuse/parser.hpp"
#include "support.hpp"

using namespace blockfuse;
using namespace blockfuse::testing;

namespace {

mpmd::MpmdKernel compileSrc(std::string_view src) { return mpmd::compile(parse(src)); }

LaunchShape shape1d(std::uint32_t grid, std::uint32_t block, std::size_t dyn = 0) {
  return LaunchShape{{grid, 1, 1}, {block, 1, 1}, dyn};
}

Trap trapOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Trap& t) {
    return t;
  }
  FAIL("expected a trap");
  throw std::logic_error("unreachable");
}

// Addresses of events that fall inside buffer `b`, in execution order.
std::vector<std::uint64_t> addressesIn(const MemoryTrace& t, const TypedBuffer& b, AccessKind kind) {
  std::vector<std::uint64_t> out;
  for (const auto& e : t.events())
    if (e.kind == kind && e.address >= b.base() && e.address < b.base() + b.bytes()) out.push_back(e.address);
  return out;
}

}  // namespace

TEST_CASE("vecAdd on a 2x2 launch") {
  DeviceArena arena;
  const auto a = upload(arena, ScalarType::F64, {Value::f64(1), Value::f64(2), Value::f64(3), Value::f64(4)});
  const auto b = upload(arena, ScalarType::F64, {Value::f64(10), Value::f64(20), Value::f64(30), Value::f64(40)});
  const auto c = arena.alloc(ScalarType::F64, 4);
  const std::vector<ArgValue> args{a, b, c, Value::i32(4)};
  const auto stats = runAllBlocks(mpmd::compile(corpusKernel("vecAdd")), shape1d(2, 2), args, arena);
  CHECK(asDoubles(arena.get(c)->values()) == std::vector<double>{11, 22, 33, 44});
  CHECK(stats.sections_run == 2);
  CHECK(stats.thread_iterations == 4);
  CHECK(stats.barrier_events == 0);
}

TEST_CASE("dynamicReverse reverses through shared memory") {
  DeviceArena arena;
  const auto d = upload(arena, ScalarType::I32, ints({0, 1, 2, 3, 4, 5, 6, 7}));
  const std::vector<ArgValue> args{d, Value::i32(8)};
  const auto stats = runAllBlocks(mpmd::compile(corpusKernel("dynamicReverse")), shape1d(1, 8, 32), args, arena);
  CHECK(asInts(arena.get(d)->values()) == std::vector<std::int64_t>{7, 6, 5, 4, 3, 2, 1, 0});
  CHECK(stats.barrier_events == 1);
  CHECK(stats.sections_run == 2);
}

TEST_CASE("compare-and-swap has exactly one winner across blocks") {
  const auto k = compileSrc(
      "kernel k(x: global i32[], won: global i32[]) {"
      "  let old: i32 = atomic_cas(x[0], 0, 5);"
      "  if (old == 0) { atomic_add(won[0], 1); }"
      "}");
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DeviceArena arena;
    const auto x = upload(arena, ScalarType::I32, ints({0}));
    const auto won = upload(arena, ScalarType::I32, ints({0}));
    runtime::RuntimeOptions ro;
    ro.pool_size = 4;
    ro.delay_seed = seed;
    ro.policy = runtime::FetchPolicy::fixed(1);
    runtime::Runtime rt(ro);
    const auto id = rt.launch(std::make_shared<const mpmd::MpmdKernel>(k), shape1d(64, 4),
                              PackedArgs::pack(k.params, std::vector<ArgValue>{x, won}), arena);
    rt.deviceSynchronize();
    CHECK(rt.record(id).exactlyOnce());
    CHECK(asInts(arena.get(won)->values()) == std::vector<std::int64_t>{1});
    CHECK(asInts(arena.get(x)->values()) == std::vector<std::int64_t>{5});
  }
}

TEST_CASE("traps carry kernel, section and thread") {
  SUBCASE("out of bounds") {
    const auto k = compileSrc("kernel k(a: global i32[]) { barrier; a[threadIdx.x] = 1; }");
    DeviceArena arena;
    const auto a = arena.alloc(ScalarType::I32, 5);
    const std::vector<ArgValue> args{a};
    const Trap t = trapOf([&] { runAllBlocks(k, shape1d(1, 8), args, arena); });
    CHECK(t.kind() == TrapKind::OutOfBounds);
    REQUIRE(t.location().has_value());
    CHECK(t.location()->kernel == "k");
    CHECK(t.location()->section == "section 1");
    CHECK(t.location()->thread == 5);
  }
  SUBCASE("integer division by zero") {
    const auto k = compileSrc("kernel k(a: global i32[]) { a[threadIdx.x] = 12 / (2 - threadIdx.x); }");
    DeviceArena arena;
    const auto a = arena.alloc(ScalarType::I32, 4);
    const std::vector<ArgValue> args{a};
    const Trap t = trapOf([&] { runAllBlocks(k, shape1d(1, 4), args, arena); });
    CHECK(t.kind() == TrapKind::DivByZero);
    CHECK(t.location()->thread == 2);
    // Threads before the faulting one completed.
    CHECK(asInts(arena.get(a)->values()) == std::vector<std::int64_t>{6, 12, 0, 0});
  }
  SUBCASE("non-positive step over a non-empty range") {
    const auto ast = parse("kernel k(s: i32) { for (i = 0; i < 4; i += s) { barrier; } }");
    DeviceArena arena;
    const std::vector<ArgValue> zero{Value::i32(0)};
    CHECK(trapOf([&] { runAllBlocks(mpmd::compile(ast), shape1d(1, 2), zero, arena); }).kind() ==
          TrapKind::TypeFault);
    CHECK(trapOf([&] { runReference(ast, shape1d(1, 2), zero, arena); }).kind() == TrapKind::TypeFault);
  }
  SUBCASE("the reference interpreter rejects divergent barrier trip counts") {
    // Not a valid kernel; the interpreter must still fail loudly.
    const auto ast = parse("kernel k() { for (i = 0; i < threadIdx.x; i += 1) { barrier; } }");
    DeviceArena arena;
    const Trap t = trapOf([&] { runReference(ast, shape1d(1, 4), {}, arena); });
    CHECK(t.kind() == TrapKind::NonUniformTrip);
    CHECK(t.location()->section == "reference");
  }
  SUBCASE("compare-and-swap on floats") {
    const auto ast = parse("kernel k(a: global f32[]) { let o: f32 = atomic_cas(a[0], 0.0f, 1.0f); }");
    DeviceArena arena;
    const auto a = arena.alloc(ScalarType::F32, 1);
    const std::vector<ArgValue> args{a};
    CHECK(trapOf([&] { runReference(ast, shape1d(1, 1), args, arena); }).kind() == TrapKind::TypeFault);
  }
}

TEST_CASE("block-local state is reset between blocks") {
  // Shared memory starts zeroed in every block.
  const auto k = compileSrc(
      "kernel k(out: global i32[]) { shared i32 s[4];"
      "  s[threadIdx.x] = s[threadIdx.x] + blockIdx.x + 1; barrier;"
      "  out[blockIdx.x * 4 + threadIdx.x] = s[3 - threadIdx.x]; }");
  DeviceArena arena;
  const auto out = arena.alloc(ScalarType::I32, 12);
  const std::vector<ArgValue> args{out};
  runAllBlocks(k, shape1d(3, 4), args, arena);
  CHECK(asInts(arena.get(out)->values()) == std::vector<std::int64_t>{1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3});
}

TEST_CASE("multi-dimensional blocks linearize x fastest") {
  const auto k = compileSrc(
      "kernel k(out: global i32[]) {"
      "  let t: i32 = (threadIdx.z * blockDim.y + threadIdx.y) * blockDim.x + threadIdx.x;"
      "  let b: i32 = (blockIdx.z * gridDim.y + blockIdx.y) * gridDim.x + blockIdx.x;"
      "  out[b * blockDim.x * blockDim.y * blockDim.z + t] = t * 100 + b; }");
  DeviceArena arena;
  const LaunchShape s{{2, 2, 1}, {3, 1, 2}, 0};
  const auto out = arena.alloc(ScalarType::I32, 24);
  const std::vector<ArgValue> args{out};
  runAllBlocks(k, s, args, arena);
  const auto v = asInts(arena.get(out)->values());
  for (std::int64_t b = 0; b < 4; ++b)
    for (std::int64_t t = 0; t < 6; ++t) CHECK(v[b * 6 + t] == t * 100 + b);
}

TEST_CASE("memory traces follow the serialized thread order") {
  const auto ast = corpusKernel("hist");
  const std::uint32_t block = 16, per_thread = 4;
  DeviceArena arena;
  std::mt19937_64 rng(5);
  const auto data = upload(arena, ScalarType::I32, randomValues(rng, ScalarType::I32, 2 * block * per_thread));
  const auto bins = arena.alloc(ScalarType::I32, 8);
  const std::vector<ArgValue> args{data, bins, Value::i32(8), Value::i32(per_thread)};
  const auto& buf = *arena.get(data);

  SUBCASE("grid-stride order jumps by the block size") {
    const auto t = traceAccesses(mpmd::compile(ast), shape1d(2, block), args, arena);
    const auto a = addressesIn(t, buf, AccessKind::Read);
    REQUIRE(a.size() == 2 * block * per_thread);
    // Thread 0 of block 0 visits elements 0, 16, 32, 48.
    for (std::uint32_t j = 0; j < per_thread; ++j) CHECK(a[j] == buf.base() + 4ull * j * block);
  }
  SUBCASE("reordered accesses are contiguous per thread and overall") {
    const auto t = traceAccesses(mpmd::reorderGridStride(mpmd::compile(ast)), shape1d(2, block), args, arena);
    const auto a = addressesIn(t, buf, AccessKind::Read);
    REQUIRE(a.size() == 2 * block * per_thread);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == buf.base() + 4 * i);
  }
  SUBCASE("vecAdd touches consecutive elements") {
    DeviceArena ar;
    const auto x = upload(ar, ScalarType::F64, std::vector<Value>(8, Value::f64(1)));
    const auto y = upload(ar, ScalarType::F64, std::vector<Value>(8, Value::f64(2)));
    const auto z = ar.alloc(ScalarType::F64, 8);
    const std::vector<ArgValue> va{x, y, z, Value::i32(8)};
    const auto t = traceAccesses(mpmd::compile(corpusKernel("vecAdd")), shape1d(2, 4), va, ar);
    CHECK(t.size() == 24);
    const auto w = addressesIn(t, *ar.get(z), AccessKind::Write);
    REQUIRE(w.size() == 8);
    for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] - w[i - 1] == 8);
  }
  SUBCASE("tracing is deterministic and round-trips through both formats") {
    const auto k = mpmd::compile(ast);
    const auto t1 = traceAccesses(k, shape1d(2, block), args, arena);
    const auto t2 = traceAccesses(k, shape1d(2, block), args, arena);
    CHECK(t1.events() == t2.events());
    std::stringstream text, bin;
    writeTraceText(text, t1.events());
    writeTraceBinary(bin, t1.events());
    CHECK(readTraceText(text) == t1.events());
    CHECK(readTraceBinary(bin) == t1.events());
  }
}

TEST_CASE("malformed traces are rejected") {
  std::istringstream bad_text("R 0x10 4\nQ 0x20 4\n");
  CHECK_THROWS_AS(readTraceText(bad_text), TraceFormatError);
  std::istringstream short_bin(std::string("\x01\x02", 2));
  CHECK_THROWS_AS(readTraceBinary(short_bin), TraceFormatError);
}

TEST_CASE("device arena") {
  DeviceArena arena;
  const auto a = arena.alloc(ScalarType::I32, 3);
  const auto b = arena.alloc(ScalarType::F64, 5);
  CHECK(a != b);
  CHECK(arena.get(a)->base() % DeviceArena::kBaseAlign == 0);
  CHECK(arena.get(b)->base() % DeviceArena::kBaseAlign == 0);
  CHECK(arena.get(b)->base() >= arena.get(a)->base() + arena.get(a)->bytes());
  CHECK(arena.get(a)->values() == std::vector<Value>(3, Value::i32(0)));
  arena.get(a)->store(1, Value::i32(-7));
  CHECK(arena.get(a)->raw().size() == 12);
  CHECK(std::to_integer<int>(arena.get(a)->raw()[4]) == 0xf9);
  const auto copy = arena.clone();
  arena.get(a)->store(1, Value::i32(1));
  CHECK(copy->get(a)->load(1) == Value::i32(-7));
  arena.free(a);
  CHECK_FALSE(arena.contains(a));
  CHECK_THROWS_AS(arena.get(a), ArenaError);
  CHECK_THROWS_AS(arena.free(a), ArenaError);
  CHECK(arena.liveCount() == 1);
}

TEST_CASE("argument packing") {
  const auto k = parse("kernel k(a: global f32[], n: i32, s: f64, m: i64) { }");
  DeviceArena arena;
  const auto a = arena.alloc(ScalarType::F32, 2);
  const std::vector<ArgValue> good{a, Value::i32(3), Value::f64(0.5), Value::i64(-1)};
  const auto p = PackedArgs::pack(k.params, good);
  CHECK(p.size() == 4);
  CHECK(p.unpack(k.params) == good);
  CHECK(p.slots()[0].kind == PackedArgs::SlotKind::Handle);
  CHECK(p.slots()[0].type == ScalarType::F32);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(p.slots()[i].offset % 8 == 0);

  auto mismatch = [&](std::vector<ArgValue> args) -> std::size_t {
    try {
      PackedArgs::pack(k.params, args);
    } catch (const TypeMismatch& e) {
      return e.slot();
    }
    return 99;
  };
  CHECK(mismatch({Value::i32(1), Value::i32(3), Value::f64(0.5), Value::i64(-1)}) == 0);
  CHECK(mismatch({a, Value::i64(3), Value::f64(0.5), Value::i64(-1)}) == 1);
  CHECK(mismatch({a, Value::i32(3), Value::f32(0.5f), Value::i64(-1)}) == 2);
  CHECK(mismatch({a, Value::i32(3), Value::f64(0.5)}) == 3);
}

TEST_CASE("property: packing random signatures round-trips bit-exactly") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 300; ++i) {
    const auto sig = randomSignature(rng, 1 + rng() % 12);
    const auto args = randomArgs(rng, sig);
    const auto p = PackedArgs::pack(sig, args);
    const auto back = p.unpack(sig);
    CHECK(back == args);
    CHECK(PackedArgs::pack(sig, back) == p);
  }
}
