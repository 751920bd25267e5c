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

// Global-memory access traces.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "blockfuse/common.hpp"

namespace blockfuse {

enum class AccessKind : std::uint8_t { Read = 0, Write = 1 };

struct MemEvent {
  AccessKind kind = AccessKind::Read;
  std::uint64_t address = 0;
  std::uint32_t size = 0;
  friend bool operator==(const MemEvent&, const MemEvent&) = default;
};

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void record(const MemEvent& e) = 0;
};

class MemoryTrace : public TraceSink {
 public:
  void record(const MemEvent& e) override { events_.push_back(e); }
  const std::vector<MemEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

 private:
  std::vector<MemEvent> events_;
};

class TraceFormatError : public Error {
 public:
  using Error::Error;
};

// Text form: one `R|W 0x<hex-address> <bytes>` event per line.
void writeTraceText(std::ostream& os, std::span<const MemEvent> events);
std::vector<MemEvent> readTraceText(std::istream& is);

// Binary form: per event u8 kind, u64 address, u32 size, little-endian.
void writeTraceBinary(std::ostream& os, std::span<const MemEvent> events);
std::vector<MemEvent> readTraceBinary(std::istream& is);

}  // namespace blockfuse
