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

#include "blockfuse/cachesim.hpp"

#include <bit>

#include <fmt/format.h>

namespace blockfuse::cachesim {

void CacheConfig::validate() const {
  if (line_size == 0 || !std::has_single_bit(line_size))
    throw ConfigError(fmt::format("line size {} is not a power of two", line_size));
  if (ways == 0) throw ConfigError("associativity must be at least 1");
  if (capacity == 0 || capacity % (line_size * ways) != 0)
    throw ConfigError(
        fmt::format("capacity {} is not a positive multiple of line size {} x {} ways", capacity, line_size, ways));
}

CacheSimulator::CacheSimulator(const CacheConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  line_shift_ = static_cast<unsigned>(std::countr_zero(cfg_.line_size));
  ways_.resize(cfg_.sets() * cfg_.ways);
}

bool CacheSimulator::touchLine(std::uint64_t line, bool write) {
  const std::uint64_t set = line % cfg_.sets();
  const std::uint64_t tag = line / cfg_.sets();
  Way* first = ways_.data() + set * cfg_.ways;
  Way* victim = first;
  ++clock_;
  for (Way* w = first; w != first + cfg_.ways; ++w) {
    if (w->valid && w->tag == tag) {
      w->last_use = clock_;
      w->dirty = w->dirty || write;
      return true;
    }
    if (!w->valid) {
      if (victim->valid) victim = w;
    } else if (victim->valid && w->last_use < victim->last_use) {
      victim = w;
    }
  }
  if (victim->valid && victim->dirty) ++report_.writebacks;
  *victim = Way{tag, clock_, true, write};
  return false;
}

bool CacheSimulator::access(const MemEvent& e) {
  const bool write = e.kind == AccessKind::Write;
  const std::uint64_t first = e.address >> line_shift_;
  const std::uint64_t last = (e.address + std::max<std::uint32_t>(e.size, 1) - 1) >> line_shift_;
  bool hit = true;
  for (std::uint64_t l = first; l <= last; ++l) hit = touchLine(l, write) && hit;
  if (write) {
    ++report_.stores;
    if (!hit) ++report_.store_misses;
  } else {
    ++report_.loads;
    if (!hit) ++report_.load_misses;
  }
  return hit;
}

CacheReport simulate(std::span<const MemEvent> trace, const CacheConfig& cfg) {
  CacheSimulator sim(cfg);
  for (const auto& e : trace) sim.access(e);
  return sim.report();
}

nlohmann::json toJson(const CacheReport& r) {
  return {{"loads", r.loads},
          {"load_misses", r.load_misses},
          {"stores", r.stores},
          {"store_misses", r.store_misses},
          {"writebacks", r.writebacks}};
}

nlohmann::json toJson(const CacheConfig& c) {
  return {{"capacity", c.capacity}, {"line_size", c.line_size}, {"ways", c.ways}, {"sets", c.sets()}};
}

std::string table(const CacheReport& r) {
  auto rate = [](std::uint64_t m, std::uint64_t n) { return n == 0 ? 0.0 : 100.0 * static_cast<double>(m) / n; };
  std::string s = fmt::format("{:<8} {:>14} {:>14} {:>9}\n", "kind", "accesses", "misses", "miss %");
  s += fmt::format("{:<8} {:>14} {:>14} {:>8.2f}%\n", "load", r.loads, r.load_misses, rate(r.load_misses, r.loads));
  s += fmt::format("{:<8} {:>14} {:>14} {:>8.2f}%\n", "store", r.stores, r.store_misses,
                   rate(r.store_misses, r.stores));
  s += fmt::format("writebacks {}\n", r.writebacks);
  return s;
}

}  // namespace blockfuse::cachesim
