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

// Syntax tree of the SPMD kernel language.
//
// Every node carries a Span. Spans compare equal unconditionally, so the
// defaulted operator== on these types is structural equality.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "blockfuse/common.hpp"
#include "blockfuse/ops.hpp"

namespace blockfuse::ast {

enum class Builtin : std::uint8_t { ThreadIdx, BlockIdx, BlockDim, GridDim };
enum class Axis : std::uint8_t { X, Y, Z };

std::string_view spelling(Builtin b);
char spelling(Axis a);

struct Expr;

// Integer literals are i32 when they fit, i64 otherwise.
struct IntLit {
  std::int64_t value = 0;
  friend bool operator==(const IntLit&, const IntLit&) = default;
};
// `1.5f` is f32, `1.5` is f64.
struct FloatLit {
  double value = 0;
  bool single = false;
  friend bool operator==(const FloatLit&, const FloatLit&) = default;
};
struct VarRef {
  std::string name;
  friend bool operator==(const VarRef&, const VarRef&) = default;
};
struct BuiltinRef {
  Builtin which = Builtin::ThreadIdx;
  Axis axis = Axis::X;
  friend bool operator==(const BuiltinRef&, const BuiltinRef&) = default;
};
struct Index {
  std::string array;
  Box<Expr> index;
  friend bool operator==(const Index&, const Index&) = default;
};
struct Unary {
  UnOp op = UnOp::Neg;
  Box<Expr> operand;
  friend bool operator==(const Unary&, const Unary&) = default;
};
struct Binary {
  BinOp op = BinOp::Add;
  Box<Expr> lhs;
  Box<Expr> rhs;
  friend bool operator==(const Binary&, const Binary&) = default;
};
struct Call {
  Intrinsic fn = Intrinsic::Min;
  std::vector<Expr> args;
  friend bool operator==(const Call&, const Call&) = default;
};
// `f32(x)` style conversion.
struct Cast {
  ScalarType to = ScalarType::I32;
  Box<Expr> operand;
  friend bool operator==(const Cast&, const Cast&) = default;
};

struct Expr {
  Span span;
  std::variant<IntLit, FloatLit, VarRef, BuiltinRef, Index, Unary, Binary, Call, Cast> node;

  friend bool operator==(const Expr&, const Expr&) = default;
};

// A local scalar (`x`) or an array element (`a[i]`).
struct LValue {
  Span span;
  std::string name;
  std::optional<Box<Expr>> index;

  bool isElement() const { return index.has_value(); }
  friend bool operator==(const LValue&, const LValue&) = default;
};

struct Stmt;

struct Block {
  Span span;
  std::vector<Stmt> stmts;
  friend bool operator==(const Block&, const Block&) = default;
};

struct LocalDecl {
  std::string name;
  ScalarType type = ScalarType::I32;
  Expr init;
  friend bool operator==(const LocalDecl&, const LocalDecl&) = default;
};
struct Assign {
  LValue target;
  Expr value;
  friend bool operator==(const Assign&, const Assign&) = default;
};
struct If {
  Expr cond;
  Block then_block;
  std::optional<Block> else_block;
  friend bool operator==(const If&, const If&) = default;
};
// for (counter = lo; counter < hi; counter += step) body
// The counter is an i32 scoped to the body; lo, hi and step are evaluated
// once on entry.
struct For {
  std::string counter;
  Expr lo;
  Expr hi;
  Expr step;
  Block body;
  friend bool operator==(const For&, const For&) = default;
};
struct Barrier {
  friend bool operator==(const Barrier&, const Barrier&) = default;
};
// Optional `let name: type = atomic_...(...)` binds the previous value.
struct ResultBinding {
  std::string name;
  ScalarType type = ScalarType::I32;
  friend bool operator==(const ResultBinding&, const ResultBinding&) = default;
};
// atomic_add(target, operand) | atomic_cas(target, compare, operand)
struct Atomic {
  AtomicKind kind = AtomicKind::Add;
  LValue target;
  Expr operand;
  std::optional<Expr> compare;
  std::optional<ResultBinding> result;
  friend bool operator==(const Atomic&, const Atomic&) = default;
};
struct Noop {
  friend bool operator==(const Noop&, const Noop&) = default;
};

struct Stmt {
  Span span;
  std::variant<LocalDecl, Assign, If, For, Barrier, Atomic, Noop> node;

  friend bool operator==(const Stmt&, const Stmt&) = default;
};

struct Param {
  Span span;
  std::string name;
  ScalarType type = ScalarType::I32;
  bool global = false;  // `global T[]`: a handle into device memory

  friend bool operator==(const Param&, const Param&) = default;
};

// `shared T name[N];` or, with no length, `extern shared T name[];`.
struct SharedDecl {
  Span span;
  std::string name;
  ScalarType type = ScalarType::I32;
  std::optional<std::uint32_t> length;

  bool isDynamic() const { return !length.has_value(); }
  friend bool operator==(const SharedDecl&, const SharedDecl&) = default;
};

struct KernelProgram {
  Span span;
  std::string name;
  std::vector<Param> params;
  std::vector<SharedDecl> shared;  // in declaration order
  Block body;

  std::vector<const SharedDecl*> staticShared() const;
  const SharedDecl* dynamicShared() const;
  const Param* findParam(std::string_view name) const;
  std::optional<std::size_t> paramIndex(std::string_view name) const;

  friend bool operator==(const KernelProgram&, const KernelProgram&) = default;
};

// Tree queries.
std::size_t countBarriers(const Block& b);
bool containsBarrier(const Stmt& s);
bool containsBarrier(const Block& b);
// Warp intrinsic anywhere in the expression.
bool containsWarpIntrinsic(const Expr& e);
// Warp intrinsic in the statement's own expressions (not nested blocks).
bool hasDirectWarpIntrinsic(const Stmt& s);
// Warp intrinsic anywhere within the statement, nested blocks included.
bool containsWarpIntrinsic(const Stmt& s);
bool containsWarpIntrinsic(const Block& b);
bool usesAtomics(const Block& b);

// Pretty printing. The output re-parses to a structurally equal tree.
std::string print(const KernelProgram& k);
std::string print(const Expr& e);

}  // namespace blockfuse::ast
