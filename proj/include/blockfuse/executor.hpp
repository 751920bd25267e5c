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

// Interpreters: the block-fused executor and the per-thread reference.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "blockfuse/arena.hpp"
#include "blockfuse/args.hpp"
#include "blockfuse/ast.hpp"
#include "blockfuse/mpmd.hpp"
#include "blockfuse/trace.hpp"

namespace blockfuse {

struct LaunchShape {
  Dim3 grid;
  Dim3 block;
  std::size_t dynamic_shared_bytes = 0;
};

struct BlockStats {
  std::uint64_t barrier_events = 0;
  std::uint64_t sections_run = 0;
  std::uint64_t thread_iterations = 0;  // single thread-loop trips
  std::uint64_t warp_iterations = 0;    // outer warp-loop trips
  std::uint64_t lane_iterations = 0;    // inner lane-loop trips
  // Trip counts of the most recent warp-mode section.
  std::uint32_t outer_trip_count = 0;
  std::uint32_t inner_trip_count = 0;

  BlockStats& operator+=(const BlockStats& o);
};

/// Per-block execution state: implicit variables, shared memory and
/// expanded-variable storage. Shared buffers start zeroed.
class BlockContext {
 public:
  BlockContext(const mpmd::MpmdKernel& k, const LaunchShape& shape, Dim3 block_index);

  Dim3 block_index;
  Dim3 block_dim;
  Dim3 grid_dim;
  std::vector<TypedBuffer> static_shared;
  TypedBuffer dynamic_shared;
  std::size_t dynamic_shared_bytes = 0;
  std::vector<std::vector<Value>> expanded;  // [slot][linear tid]
  std::vector<Value> uniforms;
  TraceSink* trace = nullptr;
  BlockStats stats;
};

/// Runs one block. Traps carry the kernel, section, thread and span.
void runBlock(const mpmd::MpmdKernel& k, BlockContext& ctx, std::span<const ArgValue> args,
              const DeviceArena& arena);

/// Runs all blocks of a launch in ascending order on the calling thread.
BlockStats runAllBlocks(const mpmd::MpmdKernel& k, const LaunchShape& shape, std::span<const ArgValue> args,
                        const DeviceArena& arena, TraceSink* trace = nullptr);

/// Global-memory accesses of a single-worker, block-ordered run. The run
/// happens on a copy of `arena`, so the result depends only on its inputs.
MemoryTrace traceAccesses(const mpmd::MpmdKernel& k, const LaunchShape& shape, std::span<const ArgValue> args,
                          const DeviceArena& arena);

struct ReferenceStats {
  std::uint64_t blocks = 0;
  std::uint64_t barrier_events = 0;
};

/// Oracle: runs the untransformed kernel thread by thread, all threads of a
/// block advancing together between barriers. Atomics within a phase are
/// applied in ascending thread order.
ReferenceStats runReference(const ast::KernelProgram& k, const LaunchShape& shape, std::span<const ArgValue> args,
                            const DeviceArena& arena, std::uint32_t warp_size = 32);

}  // namespace blockfuse
