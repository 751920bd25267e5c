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

#include "blockfuse/common.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace blockfuse {

std::string_view to_string(ScalarType t) {
  switch (t) {
    case ScalarType::I32: return "i32";
    case ScalarType::I64: return "i64";
    case ScalarType::F32: return "f32";
    case ScalarType::F64: return "f64";
  }
  return "?";
}

std::optional<ScalarType> parseScalarType(std::string_view s) {
  if (s == "i32") return ScalarType::I32;
  if (s == "i64") return ScalarType::I64;
  if (s == "f32") return ScalarType::F32;
  if (s == "f64") return ScalarType::F64;
  return std::nullopt;
}

std::string to_string(const Span& s) { return fmt::format("{}:{}", s.line, s.column); }

std::string to_string(const Dim3& d) { return fmt::format("({},{},{})", d.x, d.y, d.z); }

std::string_view to_string(TrapKind k) {
  switch (k) {
    case TrapKind::OutOfBounds: return "OutOfBounds";
    case TrapKind::DivByZero: return "DivByZero";
    case TrapKind::TypeFault: return "TypeFault";
    case TrapKind::NonUniformTrip: return "NonUniformTrip";
  }
  return "?";
}

Trap::Trap(TrapKind kind, std::string message)
    : Error(fmt::format("{}: {}", to_string(kind), message)), kind_(kind), detail_(std::move(message)) {}

Trap::Trap(TrapKind kind, std::string message, TrapLocation loc)
    : Error(fmt::format("{}: {} [kernel {}, {}, thread {}, at {}]", to_string(kind), message, loc.kernel,
                        loc.section, loc.thread, to_string(loc.span))),
      kind_(kind),
      detail_(std::move(message)),
      location_(std::move(loc)) {}

Trap Trap::located(TrapLocation loc) const { return Trap(kind_, detail_, std::move(loc)); }

Value Value::fromBits(ScalarType t, std::uint64_t bits) {
  switch (t) {
    case ScalarType::I32:
      return Value::i32(static_cast<std::int32_t>(static_cast<std::uint32_t>(bits)));
    case ScalarType::F32:
      return Value(t, bits & 0xffffffffULL);
    default:
      return Value(t, bits);
  }
}

std::int64_t Value::toInt64() const {
  switch (type_) {
    case ScalarType::I32: return asI32();
    case ScalarType::I64: return asI64();
    default: return convert(ScalarType::I64).asI64();
  }
}

double Value::toDouble() const {
  switch (type_) {
    case ScalarType::I32: return asI32();
    case ScalarType::I64: return static_cast<double>(asI64());
    case ScalarType::F32: return asF32();
    case ScalarType::F64: return asF64();
  }
  return 0;
}

bool Value::truthy() const {
  switch (type_) {
    case ScalarType::I32: return asI32() != 0;
    case ScalarType::I64: return asI64() != 0;
    case ScalarType::F32: return asF32() != 0.0f;
    case ScalarType::F64: return asF64() != 0.0;
  }
  return false;
}

namespace {

template <class Int>
Int saturatingFromDouble(double d) {
  if (std::isnan(d)) return 0;
  constexpr double lo = static_cast<double>(std::numeric_limits<Int>::min());
  constexpr double hi = static_cast<double>(std::numeric_limits<Int>::max());
  if (d <= lo) return std::numeric_limits<Int>::min();
  if (d >= hi) return std::numeric_limits<Int>::max();
  return static_cast<Int>(d);
}

}  // namespace

Value Value::convert(ScalarType to) const {
  if (to == type_) return *this;
  switch (to) {
    case ScalarType::I32:
      if (isInteger(type_)) return Value::i32(static_cast<std::int32_t>(static_cast<std::uint32_t>(bits_)));
      return Value::i32(saturatingFromDouble<std::int32_t>(toDouble()));
    case ScalarType::I64:
      if (isInteger(type_)) return Value::i64(toInt64());
      return Value::i64(saturatingFromDouble<std::int64_t>(toDouble()));
    case ScalarType::F32:
      if (type_ == ScalarType::I32) return Value::f32(static_cast<float>(asI32()));
      if (type_ == ScalarType::I64) return Value::f32(static_cast<float>(asI64()));
      return Value::f32(static_cast<float>(asF64()));
    case ScalarType::F64:
      return Value::f64(toDouble());
  }
  return *this;
}

std::string Value::str() const {
  char buf[64];
  std::to_chars_result r{};
  switch (type_) {
    case ScalarType::I32: return std::to_string(asI32());
    case ScalarType::I64: return std::to_string(asI64());
    case ScalarType::F32: r = std::to_chars(buf, buf + sizeof buf, asF32()); break;
    case ScalarType::F64: r = std::to_chars(buf, buf + sizeof buf, asF64()); break;
  }
  return std::string(buf, r.ptr);
}

}  // namespace blockfuse
