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

// Block-fused (MPMD) kernel form.
//
// A kernel becomes a schedule of sections separated by barrier points. Each
// section is executed by one worker for a whole block: a loop over linear
// thread ids, or in warp mode a loop over warps around loops over lanes.
// Thread-private scalars that are live across a section boundary are kept
// in per-thread arrays ("expanded" variables).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "blockfuse/ast.hpp"

namespace blockfuse::mpmd {

class TransformError : public Error {
 public:
  using Error::Error;
};

class PatternNotFound : public Error {
 public:
  using Error::Error;
};

class DependenceError : public Error {
 public:
  using Error::Error;
};

enum class VarClass : std::uint8_t {
  Local,     // per-thread frame slot, confined to one execution unit
  Expanded,  // per-thread array slot indexed by linear thread id
  Uniform,   // one value per block (hoisted loop counters)
};

struct VarLoc {
  VarClass cls = VarClass::Local;
  std::uint32_t slot = 0;
  friend bool operator==(const VarLoc&, const VarLoc&) = default;
};

enum class MemSpace : std::uint8_t { Unclassified, Global, SharedStatic, SharedDynamic };

std::string_view to_string(VarClass c);
std::string_view to_string(MemSpace s);

// `id` is the param index for Global and the static slot for SharedStatic.
struct ArrayRef {
  std::string name;
  MemSpace space = MemSpace::Unclassified;
  std::uint32_t id = 0;
  ScalarType elem = ScalarType::I32;
  friend bool operator==(const ArrayRef&, const ArrayRef&) = default;
};

struct LExpr;

struct EConst {
  Value value;
  friend bool operator==(const EConst&, const EConst&) = default;
};
struct EVar {
  std::string name;
  VarLoc loc;
  friend bool operator==(const EVar&, const EVar&) = default;
};
struct EParam {
  std::uint32_t index = 0;
  friend bool operator==(const EParam&, const EParam&) = default;
};
struct EBuiltin {
  ast::Builtin which = ast::Builtin::ThreadIdx;
  ast::Axis axis = ast::Axis::X;
  friend bool operator==(const EBuiltin&, const EBuiltin&) = default;
};
struct ELoad {
  ArrayRef array;
  Box<LExpr> index;
  friend bool operator==(const ELoad&, const ELoad&) = default;
};
struct EUnary {
  UnOp op = UnOp::Neg;
  Box<LExpr> operand;
  friend bool operator==(const EUnary&, const EUnary&) = default;
};
// Operands already carry the operator's operand type (logical operators
// excepted, which only test truthiness and short-circuit).
struct EBinary {
  BinOp op = BinOp::Add;
  Box<LExpr> lhs;
  Box<LExpr> rhs;
  friend bool operator==(const EBinary&, const EBinary&) = default;
};
// Math intrinsics only.
struct ECall {
  Intrinsic fn = Intrinsic::Min;
  std::vector<LExpr> args;
  friend bool operator==(const ECall&, const ECall&) = default;
};
// Converts the operand to the node's type.
struct ECast {
  Box<LExpr> operand;
  friend bool operator==(const ECast&, const ECast&) = default;
};
// Result of gather `index` of the enclosing lane exchange, for this lane.
struct ELaneRead {
  std::uint32_t index = 0;
  friend bool operator==(const ELaneRead&, const ELaneRead&) = default;
};

struct LExpr {
  Span span;
  ScalarType type = ScalarType::I32;
  std::variant<EConst, EVar, EParam, EBuiltin, ELoad, EUnary, EBinary, ECall, ECast, ELaneRead> node;
  friend bool operator==(const LExpr&, const LExpr&) = default;
};

struct LStmt;

struct SSet {
  std::string name;
  VarLoc var;
  LExpr value;  // already of the variable's type
  friend bool operator==(const SSet&, const SSet&) = default;
};
struct SStore {
  ArrayRef array;
  LExpr index;
  LExpr value;  // already of the element type
  friend bool operator==(const SStore&, const SStore&) = default;
};
struct SIf {
  LExpr cond;
  std::vector<LStmt> then_body;
  std::vector<LStmt> else_body;
  friend bool operator==(const SIf&, const SIf&) = default;
};
// Per-thread loop; bounds evaluated once on entry.
struct SFor {
  std::string counter;
  VarLoc var;
  LExpr lo, hi, step;
  std::vector<LStmt> body;
  friend bool operator==(const SFor&, const SFor&) = default;
};
struct AtomicResult {
  std::string name;
  VarLoc var;
  ScalarType type = ScalarType::I32;
  friend bool operator==(const AtomicResult&, const AtomicResult&) = default;
};
struct SAtomic {
  AtomicKind kind = AtomicKind::Add;
  ArrayRef array;
  LExpr index;
  LExpr operand;                // element type
  std::optional<LExpr> compare;  // element type, cas only
  std::optional<AtomicResult> result;
  friend bool operator==(const SAtomic&, const SAtomic&) = default;
};

struct LStmt {
  Span span;
  std::variant<SSet, SStore, SIf, SFor, SAtomic> node;
  friend bool operator==(const LStmt&, const LStmt&) = default;
};

// --- Section bodies -------------------------------------------------------

struct Step;

// Straight-line per-thread code run for every lane (or every thread).
struct LanePhase {
  std::vector<LStmt> stmts;
  friend bool operator==(const LanePhase&, const LanePhase&) = default;
};

// One warp intrinsic operand set, evaluated by every active lane into the
// warp's lane buffer before the exchange.
struct Gather {
  Intrinsic fn = Intrinsic::ShflDown;
  LExpr value;
  std::optional<LExpr> delta;  // shfl_down only, i32
  friend bool operator==(const Gather&, const Gather&) = default;
};

// Lane loop split at a warp intrinsic: gathers run for all lanes, then
// `apply` runs for all lanes reading exchanged values through ELaneRead.
struct LaneExchange {
  std::vector<Gather> gathers;
  LStmt apply;
  friend bool operator==(const LaneExchange&, const LaneExchange&) = default;
};

// Block-uniform loop kept inside the warp loop because its body exchanges
// data between lanes.
struct WarpLoop {
  std::string counter;
  VarLoc var;  // Uniform
  LExpr lo, hi, step;
  std::vector<Step> body;
  friend bool operator==(const WarpLoop&, const WarpLoop&) = default;
};

struct Step {
  std::variant<LanePhase, LaneExchange, WarpLoop> node;
  friend bool operator==(const Step&, const Step&) = default;
};

enum class LoopShape : std::uint8_t { SingleThreadLoop, WarpLaneLoops };

struct Section {
  LoopShape shape = LoopShape::SingleThreadLoop;
  // SingleThreadLoop sections hold exactly one LanePhase.
  std::vector<Step> steps;
  friend bool operator==(const Section&, const Section&) = default;
};

// --- Block schedule -------------------------------------------------------

struct Region;

struct RunSection {
  std::uint32_t index = 0;
  friend bool operator==(const RunSection&, const RunSection&) = default;
};
struct BarrierPoint {
  friend bool operator==(const BarrierPoint&, const BarrierPoint&) = default;
};
// A block-uniform loop whose body contained a barrier, hoisted outside the
// thread loops.
struct UniformLoop {
  std::string counter;
  VarLoc var;  // Uniform
  LExpr lo, hi, step;
  std::vector<Region> body;
  friend bool operator==(const UniformLoop&, const UniformLoop&) = default;
};

struct Region {
  std::variant<RunSection, BarrierPoint, UniformLoop> node;
  friend bool operator==(const Region&, const Region&) = default;
};

struct VarInfo {
  std::string name;
  ScalarType type = ScalarType::I32;
  friend bool operator==(const VarInfo&, const VarInfo&) = default;
};

struct StaticShared {
  std::string name;
  ScalarType type = ScalarType::I32;
  std::uint32_t length = 0;
  std::uint64_t bytes() const { return std::uint64_t{length} * sizeOf(type); }
  friend bool operator==(const StaticShared&, const StaticShared&) = default;
};

struct DynamicShared {
  std::string name;
  ScalarType type = ScalarType::I32;
  friend bool operator==(const DynamicShared&, const DynamicShared&) = default;
};

struct MpmdKernel {
  std::string name;
  std::vector<ast::Param> params;
  std::vector<Section> sections;
  std::vector<Region> schedule;
  std::vector<VarInfo> locals;
  std::vector<VarInfo> expanded_vars;
  std::vector<VarInfo> uniforms;
  std::vector<StaticShared> static_shared;
  std::optional<DynamicShared> dynamic_shared;
  bool warp_mode = false;
  std::uint32_t warp_size = 32;
  bool uses_atomics = false;
  // Static node count of the kernel body, used by grain heuristics.
  std::uint64_t instruction_estimate = 0;

  std::uint64_t staticSharedBytes() const;
  std::size_t barrierPoints() const;
  friend bool operator==(const MpmdKernel&, const MpmdKernel&) = default;
};

struct TransformOptions {
  bool warp_mode = false;
  std::uint32_t warp_size = 32;
};

/// Fission at barriers, thread-loop wrapping and variable expansion. Array
/// references are left Unclassified. Throws TransformError if `k` does not
/// validate.
MpmdKernel transform(const ast::KernelProgram& k, const TransformOptions& opts = {});

/// Classifies every array reference as global or shared.
MpmdKernel mapMemory(MpmdKernel k);

/// transform followed by mapMemory.
MpmdKernel compile(const ast::KernelProgram& k, const TransformOptions& opts = {});

/// Rewrites grid-stride indexing `rest + tid + j*blockDim.x` inside a
/// per-thread loop `for (j = 0; j < K; j += 1)` into `rest + tid*K + j`.
/// `rest` and K must be thread-invariant. Throws DependenceError when the
/// loop observes its counter or the thread index anywhere else, or writes
/// a rewritten array through differing indices; PatternNotFound when no
/// loop qualifies.
MpmdKernel reorderGridStride(MpmdKernel k);

/// Human-readable listing.
std::string listing(const MpmdKernel& k);

/// Structured dump with stable key order, as JSON text.
std::string dumpJson(const MpmdKernel& k);

std::string print(const LExpr& e);

}  // namespace blockfuse::mpmd
