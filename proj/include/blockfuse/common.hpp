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

#pragma once

#include <bit>
#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace blockfuse {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ScalarType : std::uint8_t { I32, I64, F32, F64 };

std::string_view to_string(ScalarType t);
std::optional<ScalarType> parseScalarType(std::string_view s);

constexpr std::size_t sizeOf(ScalarType t) {
  return (t == ScalarType::I32 || t == ScalarType::F32) ? 4 : 8;
}
constexpr bool isFloat(ScalarType t) {
  return t == ScalarType::F32 || t == ScalarType::F64;
}
constexpr bool isInteger(ScalarType t) { return !isFloat(t); }

// Usual arithmetic conversion: i32 < i64 < f32 < f64.
constexpr ScalarType promote(ScalarType a, ScalarType b) {
  return static_cast<std::uint8_t>(a) > static_cast<std::uint8_t>(b) ? a : b;
}

/// Source position. Spans never participate in structural equality of
/// syntax trees, so comparison always succeeds.
struct Span {
  std::uint32_t line = 0;
  std::uint32_t column = 0;

  friend constexpr bool operator==(const Span&, const Span&) { return true; }
};

std::string to_string(const Span& s);

/// Grid/block extents.
struct Dim3 {
  std::uint32_t x = 1;
  std::uint32_t y = 1;
  std::uint32_t z = 1;

  constexpr std::uint64_t volume() const {
    return std::uint64_t{x} * y * z;
  }
  constexpr bool valid() const {
    return x >= 1 && y >= 1 && z >= 1 && volume() <= 0x7fffffffULL;
  }
  // ((z * dim.y) + y) * dim.x + x
  constexpr std::uint64_t linearize(const Dim3& idx) const {
    return (std::uint64_t{idx.z} * y + idx.y) * x + idx.x;
  }
  constexpr Dim3 delinearize(std::uint64_t id) const {
    Dim3 r;
    r.x = static_cast<std::uint32_t>(id % x);
    id /= x;
    r.y = static_cast<std::uint32_t>(id % y);
    r.z = static_cast<std::uint32_t>(id / y);
    return r;
  }

  friend constexpr bool operator==(const Dim3&, const Dim3&) = default;
};

std::string to_string(const Dim3& d);

enum class TrapKind : std::uint8_t { OutOfBounds, DivByZero, TypeFault, NonUniformTrip };

std::string_view to_string(TrapKind k);

struct TrapLocation {
  std::string kernel;
  std::string section;  // "section 2", "reference", ...
  std::uint64_t thread = 0;
  Span span;
};

/// Execution fault raised by the interpreters. Value arithmetic raises traps
/// without a location; the interpreter that catches them attaches one.
class Trap : public Error {
 public:
  Trap(TrapKind kind, std::string message);

  TrapKind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }
  const std::optional<TrapLocation>& location() const { return location_; }
  Trap located(TrapLocation loc) const;

 private:
  Trap(TrapKind kind, std::string message, TrapLocation loc);

  TrapKind kind_;
  std::string detail_;
  std::optional<TrapLocation> location_;
};

/// A tagged scalar. The payload is kept as raw bits so that values survive
/// packing and unpacking bit-for-bit, NaN payloads included.
class Value {
 public:
  constexpr Value() = default;

  static Value i32(std::int32_t v) {
    return Value(ScalarType::I32, static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
  }
  static Value i64(std::int64_t v) { return Value(ScalarType::I64, static_cast<std::uint64_t>(v)); }
  static Value f32(float v) { return Value(ScalarType::F32, std::bit_cast<std::uint32_t>(v)); }
  static Value f64(double v) { return Value(ScalarType::F64, std::bit_cast<std::uint64_t>(v)); }
  static Value fromBits(ScalarType t, std::uint64_t bits);
  static Value zero(ScalarType t) { return fromBits(t, 0); }

  ScalarType type() const { return type_; }
  std::uint64_t bits() const { return bits_; }

  std::int32_t asI32() const { return static_cast<std::int32_t>(static_cast<std::uint32_t>(bits_)); }
  std::int64_t asI64() const { return static_cast<std::int64_t>(bits_); }
  float asF32() const { return std::bit_cast<float>(static_cast<std::uint32_t>(bits_)); }
  double asF64() const { return std::bit_cast<double>(bits_); }

  // Widened views used by arithmetic.
  std::int64_t toInt64() const;
  double toDouble() const;
  bool truthy() const;

  Value convert(ScalarType to) const;

  std::string str() const;

  // Bitwise identity, used for bit-exact comparisons.
  friend bool operator==(const Value& a, const Value& b) {
    return a.type_ == b.type_ && a.bits_ == b.bits_;
  }

 private:
  constexpr Value(ScalarType t, std::uint64_t bits) : type_(t), bits_(bits) {}

  ScalarType type_ = ScalarType::I32;
  std::uint64_t bits_ = 0;
};

/// Heap box with value semantics, for recursive syntax trees.
template <class T>
class Box {
 public:
  Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
  Box(const Box& other) : ptr_(std::make_unique<T>(*other.ptr_)) {}
  Box(Box&&) noexcept = default;
  Box& operator=(const Box& other) {
    if (this != &other) ptr_ = std::make_unique<T>(*other.ptr_);
    return *this;
  }
  Box& operator=(Box&&) noexcept = default;
  ~Box() = default;

  T& operator*() { return *ptr_; }
  const T& operator*() const { return *ptr_; }
  T* operator->() { return ptr_.get(); }
  const T* operator->() const { return ptr_.get(); }
  T* get() { return ptr_.get(); }
  const T* get() const { return ptr_.get(); }

  friend bool operator==(const Box& a, const Box& b) { return *a.ptr_ == *b.ptr_; }

 private:
  std::unique_ptr<T> ptr_;
};

}  // namespace blockfuse
