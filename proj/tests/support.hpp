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

// Helpers shared by the test binaries: corpus access, launch shortcuts and
// random program generators.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "blockfuse/arena.hpp"
#include "blockfuse/ast.hpp"
#include "blockfuse/executor.hpp"
#include "blockfuse/mpmd.hpp"
#include "blockfuse/runtime.hpp"

namespace blockfuse::testing {

std::filesystem::path corpusDir();
std::string readText(const std::filesystem::path& p);
ast::KernelProgram corpusKernel(const std::string& name);

/// Fills a new buffer with `values` converted to `type`.
BufferHandle upload(DeviceArena& arena, ScalarType type, const std::vector<Value>& values);
std::vector<Value> ints(std::initializer_list<std::int64_t> v, ScalarType t = ScalarType::I32);
std::vector<std::int64_t> asInts(const std::vector<Value>& v);
std::vector<double> asDoubles(const std::vector<Value>& v);
std::vector<Value> randomValues(std::mt19937_64& rng, ScalarType t, std::size_t n, std::int64_t int_range = 1024);

/// Compiles and runs one launch on a fresh runtime, then synchronizes.
runtime::LaunchRecord runOnRuntime(const ast::KernelProgram& k, const LaunchShape& shape,
                                   const std::vector<ArgValue>& args, const DeviceArena& arena,
                                   const runtime::RuntimeOptions& opts = {}, bool warp_mode = false,
                                   std::uint32_t warp_size = 32);

/// Kernel generator for differential tests. Generated kernels are race-free
/// and deterministic: per-thread arithmetic, shared-memory exchanges
/// separated by barriers, uniform loops with barriers, divergent branches
/// and integer atomics. The signature is always
/// (in: global i32[], out: global i32[], fout: global f32[], acc: global i32[], scale: i32)
/// with shared storage `extern shared i32 s[]` of one element per thread.
/// `in`, `out` and `fout` hold one element per launched thread; `acc` has 8.
struct KernelGenOptions {
  int statements = 12;
  bool barriers = true;
  bool warp_intrinsics = false;  // only in warp-uniform positions
};
std::string randomKernel(std::mt19937_64& rng, const std::string& name, const KernelGenOptions& opts = {});

/// Unconstrained syntax for parse/print round trips; need not validate.
std::string randomSyntax(std::mt19937_64& rng);

/// Random parameter list of `n` params, each scalar or global.
std::vector<ast::Param> randomSignature(std::mt19937_64& rng, std::size_t n);
/// Arguments matching `sig`: scalars with random bit patterns, handles with
/// random ids.
std::vector<ArgValue> randomArgs(std::mt19937_64& rng, const std::vector<ast::Param>& sig);

/// Bit-exact equality of two value vectors.
// Host-script generation over a fixed kernel set whose buffer effects are
// known by construction, independent of the access analysis.
std::string hostKernelSource();
struct ScriptAccess {
  std::set<std::string> reads, writes;
  bool launch = false;
  bool sync = false;
};
struct HostScript {
  std::string text;
  std::vector<ScriptAccess> ops;  // one entry per non-blank line
};
struct HostScriptOptions {
  std::size_t buffers = 4;
  std::size_t ops = 14;
  bool disjoint = false;  // launches never share a written buffer or read another's output
};
HostScript randomHostScript(std::mt19937_64& rng, const HostScriptOptions& opts = {});

bool sameBits(const std::vector<Value>& a, const std::vector<Value>& b);

}  // namespace blockfuse::testing
