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

// Single-level set-associative LRU cache model.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockfuse/trace.hpp"

namespace blockfuse::cachesim {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct CacheConfig {
  std::uint64_t capacity = 32 * 1024;
  std::uint64_t line_size = 64;
  std::uint64_t ways = 8;

  std::uint64_t sets() const { return capacity / (line_size * ways); }
  /// Throws ConfigError unless line_size is a power of two, ways >= 1 and
  /// capacity is a positive multiple of line_size * ways.
  void validate() const;
};

struct CacheReport {
  std::uint64_t loads = 0;
  std::uint64_t load_misses = 0;
  std::uint64_t stores = 0;
  std::uint64_t store_misses = 0;
  std::uint64_t writebacks = 0;  // dirty lines evicted

  std::uint64_t accesses() const { return loads + stores; }
  std::uint64_t misses() const { return load_misses + store_misses; }
  friend bool operator==(const CacheReport&, const CacheReport&) = default;
};

/// Write-allocate, write-back. An access spanning several lines misses if
/// any of them misses; each event counts once.
class CacheSimulator : public TraceSink {
 public:
  explicit CacheSimulator(const CacheConfig& cfg);

  void record(const MemEvent& e) override { access(e); }
  // Returns true on a hit.
  bool access(const MemEvent& e);
  const CacheReport& report() const { return report_; }
  const CacheConfig& config() const { return cfg_; }

 private:
  struct Way {
    std::uint64_t tag = 0;
    std::uint64_t last_use = 0;
    bool valid = false;
    bool dirty = false;
  };
  bool touchLine(std::uint64_t line, bool write);

  CacheConfig cfg_;
  unsigned line_shift_ = 0;
  std::vector<Way> ways_;  // sets() * ways, set-major
  std::uint64_t clock_ = 0;
  CacheReport report_;
};

CacheReport simulate(std::span<const MemEvent> trace, const CacheConfig& cfg);

nlohmann::json toJson(const CacheReport& r);
nlohmann::json toJson(const CacheConfig& c);
std::string table(const CacheReport& r);

}  // namespace blockfuse::cachesim
