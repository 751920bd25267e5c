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

#include "blockfuse/trace.hpp"

#include <array>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

namespace blockfuse {

void writeTraceText(std::ostream& os, std::span<const MemEvent> events) {
  for (const auto& e : events)
    os << fmt::format("{} 0x{:x} {}\n", e.kind == AccessKind::Read ? 'R' : 'W', e.address, e.size);
}

std::vector<MemEvent> readTraceText(std::istream& is) {
  std::vector<MemEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string kind, addr;
    std::uint64_t size = 0;
    if (!(ls >> kind >> addr >> size) || (kind != "R" && kind != "W"))
      throw TraceFormatError(fmt::format("trace line {}: expected 'R|W <hex-address> <bytes>'", lineno));
    MemEvent e;
    e.kind = kind == "R" ? AccessKind::Read : AccessKind::Write;
    try {
      std::size_t used = 0;
      e.address = std::stoull(addr, &used, 16);
      if (used != addr.size()) throw std::invalid_argument(addr);
    } catch (const std::exception&) {
      throw TraceFormatError(fmt::format("trace line {}: bad address '{}'", lineno, addr));
    }
    if (size > 0xffffffffULL) throw TraceFormatError(fmt::format("trace line {}: size out of range", lineno));
    e.size = static_cast<std::uint32_t>(size);
    out.push_back(e);
  }
  return out;
}

namespace {

template <std::size_t N>
void putLE(std::ostream& os, std::uint64_t v) {
  std::array<char, N> b{};
  for (std::size_t i = 0; i < N; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b.data(), N);
}

template <std::size_t N>
bool getLE(std::istream& is, std::uint64_t& v) {
  std::array<unsigned char, N> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), N)) return false;
  v = 0;
  for (std::size_t i = 0; i < N; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return true;
}

}  // namespace

void writeTraceBinary(std::ostream& os, std::span<const MemEvent> events) {
  for (const auto& e : events) {
    putLE<1>(os, static_cast<std::uint8_t>(e.kind));
    putLE<8>(os, e.address);
    putLE<4>(os, e.size);
  }
}

std::vector<MemEvent> readTraceBinary(std::istream& is) {
  std::vector<MemEvent> out;
  for (;;) {
    std::uint64_t kind = 0, addr = 0, size = 0;
    if (!getLE<1>(is, kind)) break;
    if (!getLE<8>(is, addr) || !getLE<4>(is, size))
      throw TraceFormatError(fmt::format("truncated binary trace after {} events", out.size()));
    if (kind > 1) throw TraceFormatError(fmt::format("bad event kind {} at event {}", kind, out.size()));
    out.push_back(MemEvent{static_cast<AccessKind>(kind), addr, static_cast<std::uint32_t>(size)});
  }
  return out;
}

}  // namespace blockfuse
