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

// Operators and intrinsics shared by the kernel language, its typing rules,
// and both interpreters.

#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "blockfuse/common.hpp"

namespace blockfuse {

enum class BinOp : std::uint8_t {
  Add, Sub, Mul, Div, Mod,
  Shl, Shr, BitAnd, BitOr, BitXor,
  Lt, Le, Gt, Ge, Eq, Ne,
  LogAnd, LogOr,
};

enum class UnOp : std::uint8_t { Neg, Not, BitNot };

enum class Intrinsic : std::uint8_t { Min, Max, Abs, Sqrt, ShflDown, VoteAny, VoteAll };

enum class AtomicKind : std::uint8_t { Add, Cas };

std::string_view spelling(BinOp op);
std::string_view spelling(UnOp op);
std::string_view spelling(Intrinsic fn);
std::string_view spelling(AtomicKind k);
std::optional<Intrinsic> parseIntrinsic(std::string_view name);

constexpr bool isWarpIntrinsic(Intrinsic fn) {
  return fn == Intrinsic::ShflDown || fn == Intrinsic::VoteAny || fn == Intrinsic::VoteAll;
}
constexpr bool isComparison(BinOp op) { return op >= BinOp::Lt && op <= BinOp::Ne; }
constexpr bool isLogical(BinOp op) { return op == BinOp::LogAnd || op == BinOp::LogOr; }
constexpr bool isIntegerOnly(BinOp op) { return op >= BinOp::Mod && op <= BinOp::BitXor; }
constexpr std::size_t arity(Intrinsic fn) {
  switch (fn) {
    case Intrinsic::Min:
    case Intrinsic::Max:
    case Intrinsic::ShflDown:
      return 2;
    default:
      return 1;
  }
}

// Typing rules. nullopt means the operation is ill-typed for those operands.
std::optional<ScalarType> binaryResultType(BinOp op, ScalarType lhs, ScalarType rhs);
std::optional<ScalarType> unaryResultType(UnOp op, ScalarType operand);
// For math intrinsics only; warp intrinsics are typed by the caller.
std::optional<ScalarType> mathResultType(Intrinsic fn, std::span<const ScalarType> args);
// Common operand type a binary operator evaluates in.
ScalarType operandType(BinOp op, ScalarType lhs, ScalarType rhs);

// Evaluation. Operands are promoted to the common type first; integer
// arithmetic wraps. Division or remainder by zero raises a DivByZero trap.
Value applyBinary(BinOp op, const Value& lhs, const Value& rhs);
Value applyUnary(UnOp op, const Value& v);
Value applyMath(Intrinsic fn, std::span<const Value> args);

}  // namespace blockfuse
