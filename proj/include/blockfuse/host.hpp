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

// Host scripts: parsing, buffer dependence analysis, implicit barriers,
// parameter packing and execution.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "blockfuse/args.hpp"
#include "blockfuse/arena.hpp"
#include "blockfuse/ast.hpp"
#include "blockfuse/parser.hpp"
#include "blockfuse/runtime.hpp"

namespace blockfuse::host {

class UnknownKernel : public ParseError {
 public:
  UnknownKernel(Span where, const std::string& name);
};

using KernelTable = std::map<std::string, ast::KernelProgram, std::less<>>;

KernelTable makeKernelTable(std::vector<ast::KernelProgram> kernels);

struct Source {
  enum class Kind : std::uint8_t { File, Seq, Const, Rand };
  Kind kind = Kind::Seq;
  std::string path;   // File
  Value constant;     // Const, already in the buffer type
  std::uint64_t seed = 0;  // Rand
  friend bool operator==(const Source&, const Source&) = default;
};

struct BufferArg {
  std::string name;
  friend bool operator==(const BufferArg&, const BufferArg&) = default;
};

using HostArg = std::variant<Value, BufferArg>;

struct Alloc {
  std::string buf;
  ScalarType type = ScalarType::I32;
  std::size_t length = 0;
  friend bool operator==(const Alloc&, const Alloc&) = default;
};
struct Upload {
  std::string buf;
  Source source;
  friend bool operator==(const Upload&, const Upload&) = default;
};
struct Launch {
  std::string kernel;
  Dim3 grid;
  Dim3 block;
  std::size_t shmem = 0;
  std::vector<HostArg> args;
  friend bool operator==(const Launch&, const Launch&) = default;
};
struct Download {
  std::string buf;
  std::string path;
  friend bool operator==(const Download&, const Download&) = default;
};
struct Sync {
  bool implicit = false;  // inserted by insertBarriers
  friend bool operator==(const Sync&, const Sync&) = default;
};
struct Free {
  std::string buf;
  friend bool operator==(const Free&, const Free&) = default;
};

struct HostOp {
  Span span;
  std::variant<Alloc, Upload, Launch, Download, Sync, Free> node;
  friend bool operator==(const HostOp&, const HostOp&) = default;
};

struct HostProgram {
  std::vector<HostOp> ops;
  std::size_t implicitSyncs() const;
  friend bool operator==(const HostProgram&, const HostProgram&) = default;
};

/// Throws ParseError (Arity for argument-count mismatches, Semantic for
/// type and buffer-lifetime errors) or UnknownKernel.
HostProgram parseHost(std::string_view source, const KernelTable& kernels);

/// Script text; implicit syncs carry a trailing `# implicit` comment.
std::string print(const HostProgram& p);
nlohmann::json toJson(const HostProgram& p);

struct AccessSummary {
  std::set<std::size_t> reads;   // param indices
  std::set<std::size_t> writes;
  friend bool operator==(const AccessSummary&, const AccessSummary&) = default;
};

AccessSummary summarizeAccess(const ast::KernelProgram& k);

using SummaryTable = std::map<std::string, AccessSummary, std::less<>>;

/// Buffers an op reads and writes, by name. Launch access comes from the
/// kernel summary mapped through the arguments.
struct BufferAccess {
  std::set<std::string> reads;
  std::set<std::string> writes;
};

BufferAccess opAccess(const HostOp& op, const SummaryTable& summaries);

enum class Hazard : std::uint8_t { ReadAfterWrite, WriteAfterRead, WriteAfterWrite };
std::string_view to_string(Hazard h);

/// First hazard of `later` against the effects of an earlier launch. Hazards
/// on the writes of `later` (WAW, then WAR) take precedence over RAW.
std::optional<std::pair<Hazard, std::string>> conflict(const BufferAccess& earlier, const BufferAccess& later);

/// Inserts an implicit Sync before each op that conflicts with a launch not
/// yet followed by a Sync. Idempotent.
HostProgram insertBarriers(const HostProgram& p, const SummaryTable& summaries);

using BufferMap = std::map<std::string, BufferHandle, std::less<>>;

/// Throws TypeMismatch naming the offending slot.
PackedArgs packParams(const Launch& l, const ast::KernelProgram& k, const BufferMap& buffers,
                      const DeviceArena& arena);

/// Contents an Upload writes into a buffer of `type` and `length`.
std::vector<Value> materialize(const Source& s, ScalarType type, std::size_t length,
                               const std::filesystem::path& base_dir = {});

enum class ExecMode : std::uint8_t { Runtime, Reference };

struct RunOptions {
  ExecMode mode = ExecMode::Runtime;
  runtime::RuntimeOptions runtime;
  bool warp_mode = false;  // kernels using warp intrinsics always get it
  std::uint32_t warp_size = 32;
  bool insert_barriers = true;
  // Resolves `file:` sources and, when write_downloads is set, download paths.
  std::filesystem::path base_dir;
  bool write_downloads = false;
};

struct ConflictEvent {
  std::size_t op_index = 0;
  std::uint64_t launch_id = 0;
  Hazard hazard = Hazard::ReadAfterWrite;
  std::string buffer;
};

struct DownloadResult {
  std::string buf;
  ScalarType type = ScalarType::I32;
  std::vector<Value> values;
};

struct RunResult {
  HostProgram executed;  // after barrier insertion
  std::vector<DownloadResult> downloads;
  std::vector<ConflictEvent> conflicts;
  std::optional<runtime::RuntimeCounters> counters;
  std::vector<runtime::LaunchRecord> launches;
  std::uint64_t reference_barrier_events = 0;
};

/// Executes host programs against a fresh arena. In runtime mode every op
/// is first checked against launches with unfinished blocks; a conflict is
/// recorded and then resolved by synchronizing, so results stay defined.
class HostRunner {
 public:
  HostRunner(const KernelTable& kernels, RunOptions options);

  RunResult run(const HostProgram& p);

 private:
  std::shared_ptr<const mpmd::MpmdKernel> compiled(const std::string& name);
  const AccessSummary& summary(const std::string& name);

  const KernelTable& kernels_;
  RunOptions options_;
  std::map<std::string, std::shared_ptr<const mpmd::MpmdKernel>> compiled_;
  SummaryTable summaries_;
};

}  // namespace blockfuse::host
