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

// Benchmark cases, grain-size sweeps and reordering experiments.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockfuse/cachesim.hpp"
#include "blockfuse/host.hpp"

namespace blockfuse::bench {

/// A kernel unit plus a host script. The oracle is the reference
/// interpreter run over the same script.
struct BenchCase {
  std::string name;
  std::string kernel_source;
  std::string host_source;
  std::filesystem::path base_dir;  // resolves `file:` sources
  std::vector<std::uint64_t> grains;  // default sweep
};

/// `<dir>/<name>.kn` with `<dir>/<name>.host`.
BenchCase loadCase(const std::filesystem::path& dir, const std::string& name);
/// Reads kernels from `kernels` (default: the script with a .kn extension).
BenchCase loadScript(const std::filesystem::path& script, const std::optional<std::filesystem::path>& kernels = {});
std::vector<std::string> corpusNames();

/// vecAdd over grid x block threads, for scheduling experiments.
BenchCase vecAddCase(std::uint32_t grid, std::uint32_t block);

struct LoadedCase {
  host::KernelTable kernels;
  host::HostProgram program;
};
LoadedCase load(const BenchCase& c);

/// Relative tolerance applied to floating-point downloads.
inline constexpr double kFloatTolerance = 1e-6;

/// Describes the first difference, or nullopt when the downloads agree:
/// integers bit-exactly, floats within `tol` relative.
std::optional<std::string> compareDownloads(const std::vector<host::DownloadResult>& expected,
                                             const std::vector<host::DownloadResult>& actual,
                                             double tol = kFloatTolerance);

/// Downloads of the reference-interpreter run.
std::vector<host::DownloadResult> oracle(const LoadedCase& c, std::uint32_t warp_size = 32);

class OracleMismatch : public Error {
 public:
  OracleMismatch(std::string case_name, std::uint64_t grain, std::uint64_t seed, const std::string& detail);
  std::uint64_t grain() const { return grain_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t grain_;
  std::uint64_t seed_;
};

struct SweepRow {
  std::uint64_t grain = 0;
  std::uint64_t repeats = 0;
  double median_ms = 0;
  std::uint64_t fetch_count = 0;
  std::uint64_t expected_fetch_count = 0;  // sum of ceil(blocks / grain)
  std::uint64_t idle_workers = 0;          // of the largest launch
  std::uint64_t blocks_executed = 0;
  bool oracle_ok = false;
};

struct SweepReport {
  std::string case_name;
  std::size_t pool = 0;
  std::vector<SweepRow> rows;
};

struct SweepOptions {
  std::size_t pool = 4;
  std::size_t repeats = 1;
  std::uint64_t seed = 1;
  // Fair fetching makes the idle-worker column reproducible.
  bool fair_fetch = true;
};

/// Runs the case once per grain and repeat with a Fixed policy. Throws
/// OracleMismatch on the first wrong output.
SweepReport runSweep(const BenchCase& c, const std::vector<std::uint64_t>& grains, const SweepOptions& opts = {});

struct ReorderReport {
  std::string case_name;
  cachesim::CacheConfig cache;
  std::uint64_t working_set_bytes = 0;
  cachesim::CacheReport original;
  cachesim::CacheReport reordered;
  bool original_ok = false;
  bool reordered_ok = false;

  std::int64_t loadMissDelta() const {
    return static_cast<std::int64_t>(reordered.load_misses) - static_cast<std::int64_t>(original.load_misses);
  }
};

/// Runs the script on one worker in block order, feeding global accesses to
/// the cache model, once as compiled and once with every launched kernel
/// that has a grid-stride loop reordered. Throws PatternNotFound if no
/// launched kernel has one.
ReorderReport runReorderExperiment(const BenchCase& c, const cachesim::CacheConfig& cache = {});

/// Global accesses of a single-worker, block-ordered run of the script.
MemoryTrace traceScript(const BenchCase& c, bool reorder = false);

nlohmann::json toJson(const SweepReport& r);
nlohmann::json toJson(const ReorderReport& r);
std::string table(const SweepReport& r);
std::string table(const ReorderReport& r);

}  // namespace blockfuse::bench
