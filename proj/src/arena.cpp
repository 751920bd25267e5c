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

#include "blockfuse/arena.hpp"

#include <atomic>
#include <cstring>
#include <mutex>

#include <fmt/format.h>

namespace blockfuse {

namespace {

template <class T>
T loadAs(const std::uint64_t* words, std::size_t i) {
  auto* p = const_cast<T*>(reinterpret_cast<const T*>(words) + i);
  return std::atomic_ref<T>(*p).load(std::memory_order_relaxed);
}

template <class T>
void storeAs(std::uint64_t* words, std::size_t i, T v) {
  std::atomic_ref<T>(reinterpret_cast<T*>(words)[i]).store(v, std::memory_order_relaxed);
}

template <class T>
T fetchAdd(std::uint64_t* words, std::size_t i, T v) {
  std::atomic_ref<T> ref(reinterpret_cast<T*>(words)[i]);
  if constexpr (std::is_integral_v<T>) {
    return ref.fetch_add(v, std::memory_order_acq_rel);
  } else {
    T old = ref.load(std::memory_order_relaxed);
    while (!ref.compare_exchange_weak(old, old + v, std::memory_order_acq_rel, std::memory_order_relaxed)) {
    }
    return old;
  }
}

template <class T>
T compareExchange(std::uint64_t* words, std::size_t i, T expected, T desired) {
  std::atomic_ref<T> ref(reinterpret_cast<T*>(words)[i]);
  ref.compare_exchange_strong(expected, desired, std::memory_order_acq_rel, std::memory_order_acquire);
  return expected;  // holds the previous value either way
}

std::size_t wordCount(ScalarType t, std::size_t length) { return (length * sizeOf(t) + 7) / 8; }

}  // namespace

TypedBuffer::TypedBuffer(ScalarType type, std::size_t length, std::uint64_t base)
    : type_(type),
      length_(length),
      base_(base),
      words_(std::make_unique<std::uint64_t[]>(std::max<std::size_t>(1, wordCount(type, length)))) {}

TypedBuffer::TypedBuffer(const TypedBuffer& other) : TypedBuffer(other.type_, other.length_, other.base_) {
  std::memcpy(words_.get(), other.words_.get(), wordCount(type_, length_) * 8);
}

TypedBuffer& TypedBuffer::operator=(const TypedBuffer& other) {
  if (this != &other) *this = TypedBuffer(other);
  return *this;
}

Value TypedBuffer::load(std::size_t i) const {
  switch (type_) {
    case ScalarType::I32: return Value::i32(loadAs<std::int32_t>(words_.get(), i));
    case ScalarType::I64: return Value::i64(loadAs<std::int64_t>(words_.get(), i));
    case ScalarType::F32: return Value::f32(loadAs<float>(words_.get(), i));
    case ScalarType::F64: return Value::f64(loadAs<double>(words_.get(), i));
  }
  return {};
}

void TypedBuffer::store(std::size_t i, const Value& v) {
  const Value c = v.convert(type_);
  switch (type_) {
    case ScalarType::I32: storeAs(words_.get(), i, c.asI32()); break;
    case ScalarType::I64: storeAs(words_.get(), i, c.asI64()); break;
    case ScalarType::F32: storeAs(words_.get(), i, c.asF32()); break;
    case ScalarType::F64: storeAs(words_.get(), i, c.asF64()); break;
  }
}

Value TypedBuffer::atomicAdd(std::size_t i, const Value& v) {
  const Value c = v.convert(type_);
  switch (type_) {
    case ScalarType::I32: return Value::i32(fetchAdd(words_.get(), i, c.asI32()));
    case ScalarType::I64: return Value::i64(fetchAdd(words_.get(), i, c.asI64()));
    case ScalarType::F32: return Value::f32(fetchAdd(words_.get(), i, c.asF32()));
    case ScalarType::F64: return Value::f64(fetchAdd(words_.get(), i, c.asF64()));
  }
  return {};
}

Value TypedBuffer::atomicCas(std::size_t i, const Value& expected, const Value& desired) {
  const Value e = expected.convert(type_);
  const Value d = desired.convert(type_);
  switch (type_) {
    case ScalarType::I32: return Value::i32(compareExchange(words_.get(), i, e.asI32(), d.asI32()));
    case ScalarType::I64: return Value::i64(compareExchange(words_.get(), i, e.asI64(), d.asI64()));
    default: throw Trap(TrapKind::TypeFault, "atomic_cas on a floating-point array");
  }
}

std::vector<Value> TypedBuffer::values() const {
  std::vector<Value> out;
  out.reserve(length_);
  for (std::size_t i = 0; i < length_; ++i) out.push_back(load(i));
  return out;
}

std::span<std::byte> TypedBuffer::raw() { return {reinterpret_cast<std::byte*>(words_.get()), bytes()}; }

std::span<const std::byte> TypedBuffer::raw() const {
  return {reinterpret_cast<const std::byte*>(words_.get()), bytes()};
}

BufferHandle DeviceArena::alloc(ScalarType type, std::size_t length) {
  std::unique_lock lock(mu_);
  const BufferHandle h{next_handle_++};
  auto buf = std::make_shared<TypedBuffer>(type, length, next_base_);
  const std::uint64_t span = std::max<std::uint64_t>(buf->bytes(), 1);
  next_base_ = (next_base_ + span + kBaseAlign - 1) / kBaseAlign * kBaseAlign;
  buffers_.emplace(h.id, std::move(buf));
  return h;
}

void DeviceArena::free(BufferHandle h) {
  std::unique_lock lock(mu_);
  if (buffers_.erase(h.id) == 0) throw ArenaError(fmt::format("free of unknown buffer handle {}", h.id));
}

std::shared_ptr<TypedBuffer> DeviceArena::get(BufferHandle h) const {
  std::shared_lock lock(mu_);
  auto it = buffers_.find(h.id);
  if (it == buffers_.end()) throw ArenaError(fmt::format("unknown buffer handle {}", h.id));
  return it->second;
}

bool DeviceArena::contains(BufferHandle h) const {
  std::shared_lock lock(mu_);
  return buffers_.contains(h.id);
}

std::size_t DeviceArena::liveCount() const {
  std::shared_lock lock(mu_);
  return buffers_.size();
}

std::unique_ptr<DeviceArena> DeviceArena::clone() const {
  std::shared_lock lock(mu_);
  auto out = std::make_unique<DeviceArena>();
  out->next_handle_ = next_handle_;
  out->next_base_ = next_base_;
  for (const auto& [id, buf] : buffers_) out->buffers_.emplace(id, std::make_shared<TypedBuffer>(*buf));
  return out;
}

}  // namespace blockfuse
