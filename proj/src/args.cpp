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

#include "blockfuse/args.hpp"

#include <cstring>

#include <fmt/format.h>

namespace blockfuse {

std::string to_string(const ArgValue& a) {
  if (const auto* h = std::get_if<BufferHandle>(&a)) return fmt::format("handle({})", h->id);
  const Value& v = std::get<Value>(a);
  return fmt::format("{} {}", to_string(v.type()), v.str());
}

TypeMismatch::TypeMismatch(std::size_t slot, const std::string& message)
    : Error(fmt::format("argument {}: {}", slot, message)), slot_(slot) {}

namespace {

std::size_t alignUp(std::size_t n, std::size_t a) { return (n + a - 1) / a * a; }

}  // namespace

PackedArgs PackedArgs::pack(std::span<const ast::Param> signature, std::span<const ArgValue> args) {
  if (args.size() != signature.size())
    throw TypeMismatch(std::min(args.size(), signature.size()),
                       fmt::format("expected {} arguments, got {}", signature.size(), args.size()));
  PackedArgs out;
  for (std::size_t i = 0; i < signature.size(); ++i) {
    const ast::Param& p = signature[i];
    Slot slot;
    slot.type = p.type;
    if (p.global) {
      const auto* h = std::get_if<BufferHandle>(&args[i]);
      if (!h) throw TypeMismatch(i, fmt::format("'{}' expects a buffer handle", p.name));
      slot.kind = SlotKind::Handle;
      slot.offset = alignUp(out.blob_.size(), sizeof(std::uint64_t));
      out.blob_.resize(slot.offset + sizeof(std::uint64_t));
      std::memcpy(out.blob_.data() + slot.offset, &h->id, sizeof(std::uint64_t));
    } else {
      const auto* v = std::get_if<Value>(&args[i]);
      if (!v) throw TypeMismatch(i, fmt::format("'{}' expects a {} scalar", p.name, to_string(p.type)));
      if (v->type() != p.type)
        throw TypeMismatch(i, fmt::format("'{}' expects {}, got {}", p.name, to_string(p.type), to_string(v->type())));
      const std::size_t n = sizeOf(p.type);
      slot.kind = SlotKind::Scalar;
      slot.offset = alignUp(out.blob_.size(), n);
      out.blob_.resize(slot.offset + n);
      const std::uint64_t bits = v->bits();
      if (n == 4) {
        const auto lo = static_cast<std::uint32_t>(bits);
        std::memcpy(out.blob_.data() + slot.offset, &lo, 4);
      } else {
        std::memcpy(out.blob_.data() + slot.offset, &bits, 8);
      }
    }
    out.slots_.push_back(slot);
  }
  return out;
}

std::vector<ArgValue> PackedArgs::unpack(std::span<const ast::Param> signature) const {
  if (signature.size() != slots_.size())
    throw TypeMismatch(std::min(signature.size(), slots_.size()),
                       fmt::format("packed {} arguments for a {}-parameter signature", slots_.size(), signature.size()));
  std::vector<ArgValue> out;
  out.reserve(slots_.size());
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    const Slot& s = slots_[i];
    const ast::Param& p = signature[i];
    if ((s.kind == SlotKind::Handle) != p.global || s.type != p.type)
      throw TypeMismatch(i, fmt::format("slot does not match parameter '{}'", p.name));
    if (s.kind == SlotKind::Handle) {
      BufferHandle h;
      std::memcpy(&h.id, blob_.data() + s.offset, sizeof(std::uint64_t));
      out.emplace_back(h);
    } else if (sizeOf(s.type) == 4) {
      std::uint32_t lo = 0;
      std::memcpy(&lo, blob_.data() + s.offset, 4);
      out.emplace_back(Value::fromBits(s.type, lo));
    } else {
      std::uint64_t bits = 0;
      std::memcpy(&bits, blob_.data() + s.offset, 8);
      out.emplace_back(Value::fromBits(s.type, bits));
    }
  }
  return out;
}

}  // namespace blockfuse
