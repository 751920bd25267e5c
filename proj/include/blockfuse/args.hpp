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

// Launch arguments and their packed form.
//
// A launch boxes all of its arguments into one blob with a slot table, the
// form a kernel entry point receives; the executor unpacks it against the
// kernel's parameter list before running any block.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "blockfuse/ast.hpp"

namespace blockfuse {

struct BufferHandle {
  std::uint64_t id = 0;
  friend auto operator<=>(const BufferHandle&, const BufferHandle&) = default;
};

using ArgValue = std::variant<Value, BufferHandle>;

std::string to_string(const ArgValue& a);

class TypeMismatch : public Error {
 public:
  TypeMismatch(std::size_t slot, const std::string& message);
  std::size_t slot() const { return slot_; }

 private:
  std::size_t slot_;
};

class PackedArgs {
 public:
  enum class SlotKind : std::uint8_t { Scalar, Handle };
  struct Slot {
    SlotKind kind = SlotKind::Scalar;
    ScalarType type = ScalarType::I32;  // element type for handles
    std::size_t offset = 0;
    friend bool operator==(const Slot&, const Slot&) = default;
  };

  PackedArgs() = default;

  /// Throws TypeMismatch when the count or a slot's kind or type differs
  /// from the signature.
  static PackedArgs pack(std::span<const ast::Param> signature, std::span<const ArgValue> args);

  /// Inverse of pack. Throws TypeMismatch if the slots do not match
  /// `signature`.
  std::vector<ArgValue> unpack(std::span<const ast::Param> signature) const;

  std::size_t size() const { return slots_.size(); }
  bool empty() const { return slots_.empty(); }
  const std::vector<Slot>& slots() const { return slots_; }
  std::span<const std::byte> bytes() const { return blob_; }

  friend bool operator==(const PackedArgs&, const PackedArgs&) = default;

 private:
  std::vector<std::byte> blob_;
  std::vector<Slot> slots_;
};

}  // namespace blockfuse
