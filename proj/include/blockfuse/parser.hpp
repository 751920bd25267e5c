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

class ParseError : public Error {
 public:
  enum class Kind { Syntax, Arity, Semantic };

  ParseError(Span where, std::string message, std::vector<std::string> expected = {}, Kind kind = Kind::Syntax);

  Span where() const { return where_; }
  Kind kind() const { return kind_; }
  // Tokens that would have been accepted at `where`.
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  Span where_;
  std::vector<std::string> expected_;
  Kind kind_;
};

// Parses a source holding exactly one kernel.
ast::KernelProgram parse(std::string_view source);

// Parses a compilation unit of one or more kernels with unique names.
std::vector<ast::KernelProgram> parseUnit(std::string_view source);

}  // namespace blockfuse
