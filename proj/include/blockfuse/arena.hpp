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

// Handle-addressed buffers standing in for device global memory.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <span>
#include <vector>

#include "blockfuse/args.hpp"
#include "blockfuse/common.hpp"

namespace blockfuse {

class ArenaError : public Error {
 public:
  using Error::Error;
};

/// Fixed-length typed storage. Element accesses are individually atomic
/// (relaxed), so concurrent blocks never tear a value; read-modify-write
/// indivisibility is provided by atomicAdd and atomicCas only.
class TypedBuffer {
 public:
  TypedBuffer(ScalarType type, std::size_t length, std::uint64_t base = 0);
  TypedBuffer(const TypedBuffer& other);
  TypedBuffer& operator=(const TypedBuffer& other);
  TypedBuffer(TypedBuffer&&) noexcept = default;
  TypedBuffer& operator=(TypedBuffer&&) noexcept = default;

  ScalarType type() const { return type_; }
  std::size_t length() const { return length_; }
  std::size_t bytes() const { return length_ * sizeOf(type_); }
  // Synthetic address of element 0, used for memory traces.
  std::uint64_t base() const { return base_; }
  bool inBounds(std::int64_t i) const { return i >= 0 && static_cast<std::uint64_t>(i) < length_; }

  Value load(std::size_t i) const;
  // `v` is converted to the element type.
  void store(std::size_t i, const Value& v);
  // Both return the previous value.
  Value atomicAdd(std::size_t i, const Value& v);
  Value atomicCas(std::size_t i, const Value& expected, const Value& desired);

  std::vector<Value> values() const;
  std::span<std::byte> raw();
  std::span<const std::byte> raw() const;

 private:
  ScalarType type_;
  std::size_t length_;
  std::uint64_t base_;
  std::unique_ptr<std::uint64_t[]> words_;
};

class DeviceArena {
 public:
  static constexpr std::uint64_t kFirstBase = 0x10000;
  static constexpr std::uint64_t kBaseAlign = 64;

  DeviceArena() = default;
  DeviceArena(const DeviceArena&) = delete;
  DeviceArena& operator=(const DeviceArena&) = delete;

  BufferHandle alloc(ScalarType type, std::size_t length);
  void free(BufferHandle h);
  // Throws ArenaError for unknown or freed handles.
  std::shared_ptr<TypedBuffer> get(BufferHandle h) const;
  bool contains(BufferHandle h) const;
  std::size_t liveCount() const;

  // Deep copy with identical handles, bases and counters.
  std::unique_ptr<DeviceArena> clone() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::uint64_t, std::shared_ptr<TypedBuffer>> buffers_;
  std::uint64_t next_handle_ = 1;
  std::uint64_t next_base_ = kFirstBase;
};

}  // namespace blockfuse
