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

#include "blockfuse/ops.hpp"

#include <cmath>
#include <limits>

namespace blockfuse {

std::string_view spelling(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Mod: return "%";
    case BinOp::Shl: return "<<";
    case BinOp::Shr: return ">>";
    case BinOp::BitAnd: return "&";
    case BinOp::BitOr: return "|";
    case BinOp::BitXor: return "^";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::LogAnd: return "&&";
    case BinOp::LogOr: return "||";
  }
  return "?";
}

std::string_view spelling(UnOp op) {
  switch (op) {
    case UnOp::Neg: return "-";
    case UnOp::Not: return "!";
    case UnOp::BitNot: return "~";
  }
  return "?";
}

std::string_view spelling(Intrinsic fn) {
  switch (fn) {
    case Intrinsic::Min: return "min";
    case Intrinsic::Max: return "max";
    case Intrinsic::Abs: return "abs";
    case Intrinsic::Sqrt: return "sqrt";
    case Intrinsic::ShflDown: return "shfl_down";
    case Intrinsic::VoteAny: return "vote_any";
    case Intrinsic::VoteAll: return "vote_all";
  }
  return "?";
}

std::string_view spelling(AtomicKind k) { return k == AtomicKind::Add ? "atomic_add" : "atomic_cas"; }

std::optional<Intrinsic> parseIntrinsic(std::string_view name) {
  for (auto fn : {Intrinsic::Min, Intrinsic::Max, Intrinsic::Abs, Intrinsic::Sqrt, Intrinsic::ShflDown,
                  Intrinsic::VoteAny, Intrinsic::VoteAll}) {
    if (spelling(fn) == name) return fn;
  }
  return std::nullopt;
}

std::optional<ScalarType> binaryResultType(BinOp op, ScalarType lhs, ScalarType rhs) {
  if (isLogical(op)) {
    if (isFloat(lhs) || isFloat(rhs)) return std::nullopt;
    return ScalarType::I32;
  }
  if (isComparison(op)) return ScalarType::I32;
  if (isIntegerOnly(op)) {
    if (isFloat(lhs) || isFloat(rhs)) return std::nullopt;
    if (op == BinOp::Shl || op == BinOp::Shr) return lhs;
  }
  return promote(lhs, rhs);
}

ScalarType operandType(BinOp op, ScalarType lhs, ScalarType rhs) {
  if (op == BinOp::Shl || op == BinOp::Shr) return lhs;
  return promote(lhs, rhs);
}

std::optional<ScalarType> unaryResultType(UnOp op, ScalarType operand) {
  switch (op) {
    case UnOp::Neg: return operand;
    case UnOp::Not: return isFloat(operand) ? std::nullopt : std::optional(ScalarType::I32);
    case UnOp::BitNot: return isFloat(operand) ? std::nullopt : std::optional(operand);
  }
  return std::nullopt;
}

std::optional<ScalarType> mathResultType(Intrinsic fn, std::span<const ScalarType> args) {
  if (args.size() != arity(fn)) return std::nullopt;
  switch (fn) {
    case Intrinsic::Min:
    case Intrinsic::Max:
      return promote(args[0], args[1]);
    case Intrinsic::Abs:
      return args[0];
    case Intrinsic::Sqrt:
      return isFloat(args[0]) ? args[0] : ScalarType::F64;
    default:
      return std::nullopt;
  }
}

namespace {

template <class S, class U>
S wrapArith(BinOp op, S a, S b) {
  const U ua = static_cast<U>(a);
  const U ub = static_cast<U>(b);
  constexpr int bits = sizeof(S) * 8;
  switch (op) {
    case BinOp::Add: return static_cast<S>(ua + ub);
    case BinOp::Sub: return static_cast<S>(ua - ub);
    case BinOp::Mul: return static_cast<S>(ua * ub);
    case BinOp::Div:
    case BinOp::Mod:
      if (b == 0) throw Trap(TrapKind::DivByZero, "integer division by zero");
      if (a == std::numeric_limits<S>::min() && b == -1) return op == BinOp::Div ? a : S{0};
      return op == BinOp::Div ? static_cast<S>(a / b) : static_cast<S>(a % b);
    case BinOp::Shl: return static_cast<S>(ua << (static_cast<unsigned>(b) & (bits - 1)));
    case BinOp::Shr: return static_cast<S>(a >> (static_cast<unsigned>(b) & (bits - 1)));
    case BinOp::BitAnd: return static_cast<S>(ua & ub);
    case BinOp::BitOr: return static_cast<S>(ua | ub);
    case BinOp::BitXor: return static_cast<S>(ua ^ ub);
    default: break;
  }
  throw Trap(TrapKind::TypeFault, "bad integer operator");
}

template <class F>
F floatArith(BinOp op, F a, F b) {
  switch (op) {
    case BinOp::Add: return a + b;
    case BinOp::Sub: return a - b;
    case BinOp::Mul: return a * b;
    case BinOp::Div: return a / b;
    default: break;
  }
  throw Trap(TrapKind::TypeFault, std::string("operator '") + std::string(spelling(op)) + "' on floating operands");
}

template <class T>
bool compare(BinOp op, T a, T b) {
  switch (op) {
    case BinOp::Lt: return a < b;
    case BinOp::Le: return a <= b;
    case BinOp::Gt: return a > b;
    case BinOp::Ge: return a >= b;
    case BinOp::Eq: return a == b;
    case BinOp::Ne: return a != b;
    default: return false;
  }
}

}  // namespace

Value applyBinary(BinOp op, const Value& lhs, const Value& rhs) {
  if (isLogical(op)) {
    const bool r = op == BinOp::LogAnd ? (lhs.truthy() && rhs.truthy()) : (lhs.truthy() || rhs.truthy());
    return Value::i32(r ? 1 : 0);
  }
  const ScalarType t = operandType(op, lhs.type(), rhs.type());
  const Value a = lhs.convert(t);
  if (op == BinOp::Shl || op == BinOp::Shr) {
    if (isFloat(t) || isFloat(rhs.type())) throw Trap(TrapKind::TypeFault, "shift of floating operand");
    const std::int64_t count = rhs.toInt64();
    if (t == ScalarType::I32) return Value::i32(wrapArith<std::int32_t, std::uint32_t>(op, a.asI32(), static_cast<std::int32_t>(count)));
    return Value::i64(wrapArith<std::int64_t, std::uint64_t>(op, a.asI64(), count));
  }
  const Value b = rhs.convert(t);
  if (isComparison(op)) {
    bool r = false;
    switch (t) {
      case ScalarType::I32: r = compare(op, a.asI32(), b.asI32()); break;
      case ScalarType::I64: r = compare(op, a.asI64(), b.asI64()); break;
      case ScalarType::F32: r = compare(op, a.asF32(), b.asF32()); break;
      case ScalarType::F64: r = compare(op, a.asF64(), b.asF64()); break;
    }
    return Value::i32(r ? 1 : 0);
  }
  switch (t) {
    case ScalarType::I32: return Value::i32(wrapArith<std::int32_t, std::uint32_t>(op, a.asI32(), b.asI32()));
    case ScalarType::I64: return Value::i64(wrapArith<std::int64_t, std::uint64_t>(op, a.asI64(), b.asI64()));
    case ScalarType::F32: return Value::f32(floatArith(op, a.asF32(), b.asF32()));
    case ScalarType::F64: return Value::f64(floatArith(op, a.asF64(), b.asF64()));
  }
  return a;
}

Value applyUnary(UnOp op, const Value& v) {
  switch (op) {
    case UnOp::Neg:
      switch (v.type()) {
        case ScalarType::I32: return Value::i32(static_cast<std::int32_t>(0u - static_cast<std::uint32_t>(v.asI32())));
        case ScalarType::I64: return Value::i64(static_cast<std::int64_t>(0ull - static_cast<std::uint64_t>(v.asI64())));
        case ScalarType::F32: return Value::f32(-v.asF32());
        case ScalarType::F64: return Value::f64(-v.asF64());
      }
      break;
    case UnOp::Not:
      if (isFloat(v.type())) throw Trap(TrapKind::TypeFault, "logical not of floating operand");
      return Value::i32(v.truthy() ? 0 : 1);
    case UnOp::BitNot:
      if (v.type() == ScalarType::I32) return Value::i32(~v.asI32());
      if (v.type() == ScalarType::I64) return Value::i64(~v.asI64());
      throw Trap(TrapKind::TypeFault, "bitwise not of floating operand");
  }
  return v;
}

Value applyMath(Intrinsic fn, std::span<const Value> args) {
  if (args.size() != arity(fn)) throw Trap(TrapKind::TypeFault, "intrinsic arity");
  switch (fn) {
    case Intrinsic::Min:
    case Intrinsic::Max: {
      const ScalarType t = promote(args[0].type(), args[1].type());
      const Value a = args[0].convert(t);
      const Value b = args[1].convert(t);
      const bool less = applyBinary(BinOp::Lt, b, a).truthy();
      if (fn == Intrinsic::Min) return less ? b : a;
      return applyBinary(BinOp::Gt, b, a).truthy() ? b : a;
    }
    case Intrinsic::Abs: {
      const Value& a = args[0];
      switch (a.type()) {
        case ScalarType::I32: return a.asI32() < 0 ? applyUnary(UnOp::Neg, a) : a;
        case ScalarType::I64: return a.asI64() < 0 ? applyUnary(UnOp::Neg, a) : a;
        case ScalarType::F32: return Value::f32(std::fabs(a.asF32()));
        case ScalarType::F64: return Value::f64(std::fabs(a.asF64()));
      }
      break;
    }
    case Intrinsic::Sqrt: {
      const Value& a = args[0];
      if (a.type() == ScalarType::F32) return Value::f32(std::sqrt(a.asF32()));
      return Value::f64(std::sqrt(a.toDouble()));
    }
    default:
      break;
  }
  throw Trap(TrapKind::TypeFault, std::string("not a math intrinsic: ") + std::string(spelling(fn)));
}

}  // namespace blockfuse
