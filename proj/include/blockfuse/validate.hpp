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

#include <string>
#include <string_view>
#include <vector>

#include "blockfuse/ast.hpp"

namespace blockfuse {

enum class DiagKind : std::uint8_t {
  UndefinedName,
  Redeclaration,
  TypeError,
  ReadOnlyAssign,
  BarrierInDivergentContext,
  ShuffleWithoutWarpMode,
  WarpIntrinsicInDivergentContext,
  DuplicateDynamicShared,
  InvalidSharedDecl,
};

std::string_view to_string(DiagKind k);

struct Diagnostic {
  DiagKind kind;
  Span span;
  std::string message;
};

std::string to_string(const Diagnostic& d);

/// Type-checks `k` and enforces the synchronization placement rules.
///
/// A barrier is accepted only at the top level of the kernel body or
/// directly inside a `for` whose bounds are block-uniform (no thread index,
/// no locals, no memory loads), recursively. Warp intrinsics follow the same
/// placement rule and are rejected outright unless `warp_mode` is set.
/// Diagnostics come back in source traversal order.
std::vector<Diagnostic> validate(const ast::KernelProgram& k, bool warp_mode);

}  // namespace blockfuse
