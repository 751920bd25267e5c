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

#include "blockfuse/runtime.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <random>

#include <fmt/format.h>

namespace blockfuse::runtime {

namespace {

// Set while the current thread holds the queue guard.
thread_local bool t_in_guard = false;

struct GuardFlag {
  GuardFlag() { t_in_guard = true; }
  ~GuardFlag() { t_in_guard = false; }
  GuardFlag(const GuardFlag&) = delete;
  GuardFlag& operator=(const GuardFlag&) = delete;
};

std::uint64_t ceilDiv(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

RuntimeFault::RuntimeFault(std::uint64_t launch_id, std::uint64_t block_id, const Trap& trap)
    : Error(fmt::format("launch {} block {}: {}", launch_id, block_id, trap.what())),
      launch_id_(launch_id),
      block_id_(block_id),
      trap_(trap) {}

FetchPolicy FetchPolicy::fixed(std::uint64_t g) {
  if (g == 0) throw Error("fixed grain must be at least 1");
  return {PolicyKind::Fixed, g};
}

FetchPolicy FetchPolicy::parse(std::string_view text) {
  if (text == "average") return average();
  if (text == "auto") return aggressive();
  if (text.starts_with("fixed:")) {
    const std::string_view num = text.substr(6);
    std::uint64_t g = 0;
    const auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), g);
    if (ec == std::errc{} && p == num.data() + num.size()) return fixed(g);
  }
  throw Error(fmt::format("unknown fetch policy '{}' (expected average, auto or fixed:<g>)", text));
}

std::string to_string(const FetchPolicy& p) {
  switch (p.kind) {
    case PolicyKind::Average: return "average";
    case PolicyKind::AutoAggressive: return "auto";
    case PolicyKind::Fixed: return fmt::format("fixed:{}", p.grain);
  }
  return "?";
}

KernelStats KernelStats::of(const mpmd::MpmdKernel& k, const Dim3& block) {
  return {k.instruction_estimate, block.volume(), k.uses_atomics};
}

GrainDecision decideGrain(const FetchPolicy& policy, std::uint64_t grid_size, std::uint64_t pool_size,
                          const KernelStats& stats, const AggressiveConfig& cfg) {
  if (grid_size == 0 || pool_size == 0) throw Error("grid and pool sizes must be positive");
  const std::uint64_t avg = ceilDiv(grid_size, pool_size);
  switch (policy.kind) {
    case PolicyKind::Average:
      return {avg, fmt::format("average: ceil({}/{}) = {}", grid_size, pool_size, avg)};
    case PolicyKind::Fixed: {
      const std::uint64_t g = std::min(policy.grain, grid_size);
      return {g, fmt::format("fixed: min({}, {}) = {}", policy.grain, grid_size, g)};
    }
    case PolicyKind::AutoAggressive: {
      const std::uint64_t cost = stats.instruction_estimate * stats.block_size;
      if (stats.uses_atomics) {
        const std::uint64_t g = std::clamp<std::uint64_t>(2 * avg, 1, grid_size);
        return {g, fmt::format("auto: atomic kernel, doubled average grain {} -> {}", avg, g)};
      }
      if (cost < cfg.light_kernel_threshold) {
        const std::uint64_t g = std::clamp<std::uint64_t>(std::max(avg, ceilDiv(grid_size, 2)), 1, grid_size);
        return {g, fmt::format("auto: light kernel (cost {} < {}), grain max({}, ceil({}/2)) = {}", cost,
                               cfg.light_kernel_threshold, avg, grid_size, g)};
      }
      return {avg, fmt::format("auto: heavy kernel (cost {}), average grain {}", cost, avg)};
    }
  }
  return {avg, "average"};
}

std::size_t LaunchRecord::idleWorkers() const {
  return static_cast<std::size_t>(std::count(worker_blocks.begin(), worker_blocks.end(), 0u));
}

bool LaunchRecord::exactlyOnce() const {
  return block_runs.size() == total_blocks &&
         std::all_of(block_runs.begin(), block_runs.end(), [](std::uint32_t n) { return n == 1; });
}

nlohmann::json toJson(const RuntimeCounters& c) {
  return {{"fetch_count", c.fetch_count}, {"blocks_executed", c.blocks_executed},
          {"busy_blocks", c.busy_blocks},   {"syncs", c.syncs},
          {"queue_waits", c.queue_waits},   {"launches", c.launches},
          {"guard_violations", c.guard_violations}};
}

nlohmann::json toJson(const LaunchRecord& r) {
  return {{"id", r.id},
          {"kernel", r.kernel},
          {"total_blocks", r.total_blocks},
          {"grain", r.grain},
          {"grain_reason", r.grain_reason},
          {"fetches", r.fetches},
          {"idle_workers", r.idleWorkers()},
          {"worker_blocks", r.worker_blocks},
          {"exactly_once", r.exactlyOnce()},
          {"barrier_events", r.stats.barrier_events}};
}

// Fields other than `next`, `fetches`, `worker_fetches`, `held`, `ranges`
// and `fetch_seq` are immutable after launch; those change only under the
// queue guard.
struct Runtime::Task {
  std::uint64_t id = 0;
  std::shared_ptr<const mpmd::MpmdKernel> kernel;
  LaunchShape shape;
  PackedArgs args;
  const DeviceArena* arena = nullptr;
  std::uint64_t total = 0;
  std::uint64_t grain = 1;
  std::string reason;

  std::uint64_t next = 0;
  std::uint64_t fetches = 0;
  std::vector<std::uint64_t> worker_fetches;
  std::vector<BlockRange> ranges;
  std::vector<std::uint64_t> fetch_seq;
  bool held = false;

  std::unique_ptr<std::atomic<std::uint32_t>[]> block_runs;
  std::unique_ptr<std::atomic<std::uint64_t>[]> worker_blocks;
  std::atomic<std::uint64_t> completed{0};
  mutable std::mutex stats_mu;
  BlockStats stats;
};

Runtime::Runtime(RuntimeOptions options) : options_(std::move(options)) {
  std::size_t n = options_.pool_size;
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  options_.pool_size = n;
  busy_blocks_ = std::make_unique<std::atomic<std::uint64_t>[]>(n);
  workers_.reserve(n);
  for (std::size_t w = 0; w < n; ++w) workers_.emplace_back([this, w] { workerMain(w); });
}

Runtime::~Runtime() {
  try {
    shutdown();
  } catch (...) {
    // A pending fault has nowhere to go during destruction.
  }
}

std::uint64_t Runtime::launch(std::shared_ptr<const mpmd::MpmdKernel> kernel, const LaunchShape& shape,
                              PackedArgs args, const DeviceArena& arena) {
  if (!kernel) throw Error("launch without a kernel");
  if (!shape.grid.valid() || !shape.block.valid()) throw Error("launch dimensions must be positive");
  auto t = std::make_shared<Task>();
  t->kernel = std::move(kernel);
  t->shape = shape;
  t->args = std::move(args);
  t->arena = &arena;
  t->total = shape.grid.volume();
  const GrainDecision d =
      decideGrain(options_.policy, t->total, poolSize(), KernelStats::of(*t->kernel, shape.block), options_.aggressive);
  t->grain = d.grain;
  t->reason = d.reason;
  t->worker_fetches.assign(poolSize(), 0);
  t->block_runs = std::make_unique<std::atomic<std::uint32_t>[]>(t->total);
  t->worker_blocks = std::make_unique<std::atomic<std::uint64_t>[]>(poolSize());
  t->held = options_.hold_until_sync;
  {
    std::lock_guard lk(mu_);
    if (stopping_) throw PoolShutdown();
    t->id = history_.size() + 1;
    history_.push_back(t);
    queue_.push_back(t);
  }
  if (options_.log) options_.log(fmt::format("launch {} {}: {}", t->id, t->kernel->name, t->reason));
  wake_.notify_all();
  return t->id;
}

bool Runtime::tryFetch(std::size_t worker, Fetched& out) {
  GuardFlag guard;
  if (queue_.empty()) return false;
  Task& t = *queue_.front();
  if (t.held) return false;
  if (options_.fair_fetch) {
    const std::uint64_t least = *std::min_element(t.worker_fetches.begin(), t.worker_fetches.end());
    if (t.worker_fetches[worker] > least) return false;
  }
  const std::uint64_t count = std::min(t.grain, t.total - t.next);
  out.task = queue_.front();
  out.range = {t.next, count};
  t.next += count;
  ++t.fetches;
  ++t.worker_fetches[worker];
  t.ranges.push_back(out.range);
  t.fetch_seq.push_back(fetch_count_);
  ++fetch_count_;
  if (t.next == t.total) queue_.pop_front();
  return true;
}

void Runtime::workerMain(std::size_t worker) {
  std::unique_lock lk(mu_);
  for (;;) {
    Fetched f;
    while (!tryFetch(worker, f)) {
      if (stopping_ && queue_.empty()) return;
      ++queue_waits_;
      wake_.wait(lk);
    }
    ++in_flight_;
    lk.unlock();
    // Other workers may now be allowed to fetch (fair mode) or to see the
    // next task.
    wake_.notify_all();
    executeRange(worker, f);
    lk.lock();
    --in_flight_;
    if (in_flight_ == 0 && queue_.empty()) idle_.notify_all();
  }
}

void Runtime::executeRange(std::size_t worker, const Fetched& f) {
  if (t_in_guard) guard_violations_.fetch_add(1);
  Task& t = *f.task;
  std::optional<std::mt19937_64> rng;
  if (options_.delay_seed) rng.emplace(*options_.delay_seed ^ (t.id << 32) ^ (f.range.first * 0x9E3779B97F4A7C15ull));
  BlockStats local;
  std::uint64_t b = f.range.first;
  const std::uint64_t end = f.range.first + f.range.count;
  try {
    const std::vector<ArgValue> args = t.args.unpack(t.kernel->params);
    for (; b < end; ++b) {
      if (rng && options_.max_delay_us > 0)
        std::this_thread::sleep_for(std::chrono::microseconds((*rng)() % options_.max_delay_us));
      BlockContext ctx(*t.kernel, t.shape, t.shape.grid.delinearize(b));
      runBlock(*t.kernel, ctx, args, *t.arena);
      local += ctx.stats;
      t.block_runs[b].fetch_add(1);
      t.worker_blocks[worker].fetch_add(1);
      busy_blocks_[worker].fetch_add(1);
      blocks_executed_.fetch_add(1);
      t.completed.fetch_add(1);
    }
  } catch (const Trap& trap) {
    std::lock_guard lk(mu_);
    if (!fault_) fault_ = std::make_exception_ptr(RuntimeFault(t.id, b, trap));
    // The failed block and the rest of the range count as completed so
    // that synchronization terminates.
    t.completed.fetch_add(end - b);
  } catch (...) {
    std::lock_guard lk(mu_);
    if (!fault_) fault_ = std::current_exception();
    t.completed.fetch_add(end - b);
  }
  std::lock_guard lk(t.stats_mu);
  t.stats += local;
}

void Runtime::deviceSynchronize() {
  std::unique_lock lk(mu_);
  bool released = false;
  for (auto& t : queue_) {
    released = released || t->held;
    t->held = false;
  }
  if (released) wake_.notify_all();
  idle_.wait(lk, [&] { return queue_.empty() && in_flight_ == 0; });
  ++syncs_;
  if (fault_) {
    std::exception_ptr e = std::exchange(fault_, nullptr);
    std::rethrow_exception(e);
  }
}

void Runtime::shutdown() {
  {
    std::unique_lock lk(mu_);
    if (stopping_ && workers_.empty()) return;
    for (auto& t : queue_) t->held = false;
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& w : workers_)
    if (w.joinable()) w.join();
  std::lock_guard lk(mu_);
  if (fault_) std::rethrow_exception(std::exchange(fault_, nullptr));
}

RuntimeCounters Runtime::counters() const {
  std::lock_guard lk(mu_);
  RuntimeCounters c;
  c.fetch_count = fetch_count_;
  c.blocks_executed = blocks_executed_.load();
  for (std::size_t w = 0; w < poolSize(); ++w) c.busy_blocks.push_back(busy_blocks_[w].load());
  c.syncs = syncs_;
  c.queue_waits = queue_waits_;
  c.launches = history_.size();
  c.guard_violations = guard_violations_.load();
  return c;
}

LaunchRecord Runtime::snapshot(const Task& t) const {
  LaunchRecord r;
  r.id = t.id;
  r.kernel = t.kernel->name;
  r.total_blocks = t.total;
  r.grain = t.grain;
  r.grain_reason = t.reason;
  r.fetches = t.fetches;
  r.ranges = t.ranges;
  r.fetch_seq = t.fetch_seq;
  r.block_runs.reserve(t.total);
  for (std::uint64_t b = 0; b < t.total; ++b) r.block_runs.push_back(t.block_runs[b].load());
  for (std::size_t w = 0; w < poolSize(); ++w) r.worker_blocks.push_back(t.worker_blocks[w].load());
  r.completed = t.completed.load();
  std::lock_guard slk(t.stats_mu);
  r.stats = t.stats;
  return r;
}

LaunchRecord Runtime::record(std::uint64_t launch_id) const {
  std::lock_guard lk(mu_);
  if (launch_id == 0 || launch_id > history_.size()) throw Error(fmt::format("unknown launch {}", launch_id));
  return snapshot(*history_[launch_id - 1]);
}

std::vector<LaunchRecord> Runtime::records() const {
  std::lock_guard lk(mu_);
  std::vector<LaunchRecord> out;
  for (const auto& t : history_) out.push_back(snapshot(*t));
  return out;
}

bool Runtime::pending(std::uint64_t launch_id) const {
  std::lock_guard lk(mu_);
  if (launch_id == 0 || launch_id > history_.size()) throw Error(fmt::format("unknown launch {}", launch_id));
  const Task& t = *history_[launch_id - 1];
  return t.completed.load() < t.total;
}

}  // namespace blockfuse::runtime
