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

// Worker-pool runtime: a single FIFO task queue drained by a fixed pool.

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "blockfuse/args.hpp"
#include "blockfuse/executor.hpp"
#include "blockfuse/mpmd.hpp"

namespace blockfuse::runtime {

class PoolShutdown : public Error {
 public:
  PoolShutdown() : Error("runtime has been shut down") {}
};

/// A trap raised by one block; carries the launch and linear block id.
class RuntimeFault : public Error {
 public:
  RuntimeFault(std::uint64_t launch_id, std::uint64_t block_id, const Trap& trap);
  std::uint64_t launchId() const { return launch_id_; }
  std::uint64_t blockId() const { return block_id_; }
  const Trap& trap() const { return trap_; }

 private:
  std::uint64_t launch_id_;
  std::uint64_t block_id_;
  Trap trap_;
};

enum class PolicyKind : std::uint8_t { Average, Fixed, AutoAggressive };

struct FetchPolicy {
  PolicyKind kind = PolicyKind::Average;
  std::uint64_t grain = 1;  // Fixed only

  static FetchPolicy average() { return {}; }
  static FetchPolicy fixed(std::uint64_t g);
  static FetchPolicy aggressive() { return {PolicyKind::AutoAggressive, 1}; }
  /// Accepts "average", "auto" and "fixed:<g>".
  static FetchPolicy parse(std::string_view text);
};

std::string to_string(const FetchPolicy& p);

struct AggressiveConfig {
  // A kernel is light when instruction_estimate * block size is below this.
  std::uint64_t light_kernel_threshold = 1u << 14;
};

struct KernelStats {
  std::uint64_t instruction_estimate = 0;
  std::uint64_t block_size = 1;
  bool uses_atomics = false;

  static KernelStats of(const mpmd::MpmdKernel& k, const Dim3& block);
};

struct GrainDecision {
  std::uint64_t grain = 1;
  std::string reason;
};

/// Blocks per fetch. Requires grid_size >= 1 and pool_size >= 1.
GrainDecision decideGrain(const FetchPolicy& policy, std::uint64_t grid_size, std::uint64_t pool_size,
                          const KernelStats& stats = {}, const AggressiveConfig& cfg = {});

inline std::uint64_t resolveGrain(const FetchPolicy& policy, std::uint64_t grid_size, std::uint64_t pool_size,
                                  const KernelStats& stats = {}, const AggressiveConfig& cfg = {}) {
  return decideGrain(policy, grid_size, pool_size, stats, cfg).grain;
}

struct BlockRange {
  std::uint64_t first = 0;
  std::uint64_t count = 0;
  friend bool operator==(const BlockRange&, const BlockRange&) = default;
};

struct RuntimeOptions {
  std::size_t pool_size = 0;  // 0 selects the hardware concurrency
  FetchPolicy policy;
  AggressiveConfig aggressive;
  // Workers fetch in turn: a worker may only fetch from a task when no other
  // worker has fetched from it fewer times. Makes per-worker counts
  // reproducible.
  bool fair_fetch = false;
  // Blocks of a launch are not fetched until deviceSynchronize is called.
  bool hold_until_sync = false;
  // When set, each block is preceded by a random sleep below max_delay_us.
  std::optional<std::uint64_t> delay_seed;
  std::uint32_t max_delay_us = 50;
  // Receives one line per grain decision.
  std::function<void(const std::string&)> log;
};

/// Per-launch observations, taken as a snapshot.
struct LaunchRecord {
  std::uint64_t id = 0;
  std::string kernel;
  std::uint64_t total_blocks = 0;
  std::uint64_t grain = 0;
  std::string grain_reason;
  std::uint64_t fetches = 0;
  std::vector<BlockRange> ranges;  // in fetch order
  std::vector<std::uint64_t> fetch_seq;  // runtime-wide fetch number per range
  std::vector<std::uint32_t> block_runs;  // executions per block id
  std::vector<std::uint64_t> worker_blocks;  // blocks executed per worker
  std::uint64_t completed = 0;
  BlockStats stats;

  bool finished() const { return completed == total_blocks; }
  std::size_t idleWorkers() const;
  bool exactlyOnce() const;
};

struct RuntimeCounters {
  std::uint64_t fetch_count = 0;
  std::uint64_t blocks_executed = 0;
  std::vector<std::uint64_t> busy_blocks;
  std::uint64_t syncs = 0;
  std::uint64_t queue_waits = 0;
  std::uint64_t launches = 0;
  std::uint64_t guard_violations = 0;
};

nlohmann::json toJson(const RuntimeCounters& c);
nlohmann::json toJson(const LaunchRecord& r);

class Runtime {
 public:
  explicit Runtime(RuntimeOptions options = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  /// Enqueues a launch and returns its id without waiting.
  std::uint64_t launch(std::shared_ptr<const mpmd::MpmdKernel> kernel, const LaunchShape& shape, PackedArgs args,
                       const DeviceArena& arena);

  /// Waits until the queue is empty and every fetched range has finished.
  /// Rethrows the first RuntimeFault raised since the previous call.
  void deviceSynchronize();

  /// Drains outstanding work and joins the pool. Later launches throw.
  void shutdown();

  std::size_t poolSize() const { return workers_.size(); }
  const RuntimeOptions& options() const { return options_; }
  RuntimeCounters counters() const;
  LaunchRecord record(std::uint64_t launch_id) const;
  std::vector<LaunchRecord> records() const;
  /// True while some block of the launch has not completed.
  bool pending(std::uint64_t launch_id) const;

 private:
  struct Task;
  struct Fetched {
    std::shared_ptr<Task> task;
    BlockRange range;
  };

  void workerMain(std::size_t worker);
  bool tryFetch(std::size_t worker, Fetched& out);
  void executeRange(std::size_t worker, const Fetched& f);
  LaunchRecord snapshot(const Task& t) const;

  RuntimeOptions options_;
  mutable std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::deque<std::shared_ptr<Task>> queue_;
  std::vector<std::shared_ptr<Task>> history_;
  std::uint64_t in_flight_ = 0;
  bool stopping_ = false;
  std::exception_ptr fault_;

  std::uint64_t fetch_count_ = 0;
  std::uint64_t syncs_ = 0;
  std::uint64_t queue_waits_ = 0;
  std::atomic<std::uint64_t> blocks_executed_{0};
  std::atomic<std::uint64_t> guard_violations_{0};
  std::unique_ptr<std::atomic<std::uint64_t>[]> busy_blocks_;

  std::vector<std::thread> workers_;
};

}  // namespace blockfuse::runtime
