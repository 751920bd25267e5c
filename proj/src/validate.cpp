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

#include "blockfuse/validate.hpp"

#include <map>

#include <fmt/format.h>

namespace blockfuse {

namespace {

using namespace ast;

std::string_view kindName(DiagKind k) {
  switch (k) {
    case DiagKind::UndefinedName: return "undefined-name";
    case DiagKind::Redeclaration: return "redeclaration";
    case DiagKind::TypeError: return "type-error";
    case DiagKind::ReadOnlyAssign: return "read-only-assign";
    case DiagKind::BarrierInDivergentContext: return "barrier-in-divergent-context";
    case DiagKind::ShuffleWithoutWarpMode: return "shuffle-without-warp-mode";
    case DiagKind::WarpIntrinsicInDivergentContext: return "warp-intrinsic-in-divergent-context";
    case DiagKind::DuplicateDynamicShared: return "duplicate-dynamic-shared";
    case DiagKind::InvalidSharedDecl: return "invalid-shared-decl";
  }
  return "?";
}

enum class SymKind { ScalarParam, GlobalArray, SharedArray, Local, Counter };

struct Symbol {
  SymKind kind;
  ScalarType type;
  bool uniform = false;  // counters only
};

class Checker {
 public:
  Checker(const KernelProgram& k, bool warp_mode) : k_(k), warp_mode_(warp_mode) {}

  std::vector<Diagnostic> run() {
    scopes_.emplace_back();
    for (const auto& p : k_.params)
      declare(p.name, Symbol{p.global ? SymKind::GlobalArray : SymKind::ScalarParam, p.type}, p.span);
    bool seen_dynamic = false;
    for (const auto& d : k_.shared) {
      if (d.isDynamic()) {
        if (seen_dynamic)
          report(DiagKind::DuplicateDynamicShared, d.span,
                 fmt::format("second extern shared array '{}'; at most one is allowed", d.name));
        seen_dynamic = true;
      } else if (*d.length == 0) {
        report(DiagKind::InvalidSharedDecl, d.span, fmt::format("shared array '{}' has zero length", d.name));
      }
      declare(d.name, Symbol{SymKind::SharedArray, d.type}, d.span);
    }
    block(k_.body, Ctx{});
    return std::move(diags_);
  }

 private:
  // Control context of the statement being checked.
  struct Ctx {
    bool divergent = false;  // inside an if or a thread-dependent loop
  };

  void report(DiagKind kind, Span at, std::string msg) { diags_.push_back({kind, at, std::move(msg)}); }

  const Symbol* lookup(std::string_view name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return &f->second;
    }
    return nullptr;
  }

  void declare(const std::string& name, Symbol sym, Span at) {
    if (lookup(name)) {
      report(DiagKind::Redeclaration, at, fmt::format("'{}' is already declared", name));
      return;
    }
    scopes_.back().emplace(name, sym);
  }

  // Block-uniform: identical for every thread of a block.
  bool uniform(const Expr& e) const {
    return std::visit(
        [&](const auto& n) -> bool {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, IntLit> || std::is_same_v<T, FloatLit>) {
            return true;
          } else if constexpr (std::is_same_v<T, VarRef>) {
            const Symbol* s = lookup(n.name);
            return s && (s->kind == SymKind::ScalarParam || (s->kind == SymKind::Counter && s->uniform));
          } else if constexpr (std::is_same_v<T, BuiltinRef>) {
            return n.which != Builtin::ThreadIdx;
          } else if constexpr (std::is_same_v<T, Index>) {
            return false;
          } else if constexpr (std::is_same_v<T, Unary> || std::is_same_v<T, Cast>) {
            return uniform(*n.operand);
          } else if constexpr (std::is_same_v<T, Binary>) {
            return uniform(*n.lhs) && uniform(*n.rhs);
          } else if constexpr (std::is_same_v<T, Call>) {
            if (isWarpIntrinsic(n.fn)) return false;
            for (const auto& a : n.args)
              if (!uniform(a)) return false;
            return true;
          }
        },
        e.node);
  }

  // `warp_ok`: a warp intrinsic may appear here.
  std::optional<ScalarType> expr(const Expr& e, bool warp_ok) {
    return std::visit(
        [&](const auto& n) -> std::optional<ScalarType> {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, IntLit>) {
            const bool fits = n.value >= INT32_MIN && n.value <= INT32_MAX;
            return fits ? ScalarType::I32 : ScalarType::I64;
          } else if constexpr (std::is_same_v<T, FloatLit>) {
            return n.single ? ScalarType::F32 : ScalarType::F64;
          } else if constexpr (std::is_same_v<T, VarRef>) {
            const Symbol* s = lookup(n.name);
            if (!s) {
              report(DiagKind::UndefinedName, e.span, fmt::format("undefined name '{}'", n.name));
              return std::nullopt;
            }
            if (s->kind == SymKind::GlobalArray || s->kind == SymKind::SharedArray) {
              report(DiagKind::TypeError, e.span, fmt::format("array '{}' used as a scalar", n.name));
              return std::nullopt;
            }
            return s->type;
          } else if constexpr (std::is_same_v<T, BuiltinRef>) {
            return ScalarType::I32;
          } else if constexpr (std::is_same_v<T, Index>) {
            const auto elem = arrayElem(n.array, e.span);
            index(*n.index, warp_ok);
            return elem;
          } else if constexpr (std::is_same_v<T, Unary>) {
            const auto t = expr(*n.operand, warp_ok);
            if (!t) return std::nullopt;
            const auto r = unaryResultType(n.op, *t);
            if (!r)
              report(DiagKind::TypeError, e.span,
                     fmt::format("operator '{}' does not accept {}", spelling(n.op), to_string(*t)));
            return r;
          } else if constexpr (std::is_same_v<T, Binary>) {
            // Short-circuit operands are conditionally evaluated.
            const bool inner_ok = warp_ok && !isLogical(n.op);
            const auto l = expr(*n.lhs, inner_ok);
            const auto r = expr(*n.rhs, inner_ok);
            if (!l || !r) return std::nullopt;
            const auto t = binaryResultType(n.op, *l, *r);
            if (!t)
              report(DiagKind::TypeError, e.span,
                     fmt::format("operator '{}' does not accept {} and {}", spelling(n.op), to_string(*l),
                                 to_string(*r)));
            return t;
          } else if constexpr (std::is_same_v<T, Cast>) {
            if (!expr(*n.operand, warp_ok)) return std::nullopt;
            return n.to;
          } else if constexpr (std::is_same_v<T, Call>) {
            return call(n, e.span, warp_ok);
          }
        },
        e.node);
  }

  std::optional<ScalarType> call(const Call& c, Span at, bool warp_ok) {
    if (c.args.size() != arity(c.fn)) {
      report(DiagKind::TypeError, at,
             fmt::format("'{}' takes {} argument(s), got {}", spelling(c.fn), arity(c.fn), c.args.size()));
      for (const auto& a : c.args) expr(a, false);
      return std::nullopt;
    }
    if (isWarpIntrinsic(c.fn)) {
      if (!warp_mode_) {
        report(DiagKind::ShuffleWithoutWarpMode, at,
               fmt::format("'{}' requires warp mode", spelling(c.fn)));
      } else if (!warp_ok) {
        report(DiagKind::WarpIntrinsicInDivergentContext, at,
               fmt::format("'{}' must be reached by every lane of the warp", spelling(c.fn)));
      }
      std::vector<std::optional<ScalarType>> ts;
      for (const auto& a : c.args) ts.push_back(expr(a, false));
      if (c.fn == Intrinsic::ShflDown) {
        if (ts[1] && isFloat(*ts[1])) {
          report(DiagKind::TypeError, c.args[1].span, "shfl_down delta must be an integer");
          return std::nullopt;
        }
        return ts[0];
      }
      return ScalarType::I32;
    }
    std::vector<ScalarType> ts;
    bool ok = true;
    for (const auto& a : c.args) {
      const auto t = expr(a, warp_ok);
      if (t) ts.push_back(*t);
      else ok = false;
    }
    if (!ok) return std::nullopt;
    return mathResultType(c.fn, ts);
  }

  std::optional<ScalarType> arrayElem(const std::string& name, Span at) {
    const Symbol* s = lookup(name);
    if (!s) {
      report(DiagKind::UndefinedName, at, fmt::format("undefined array '{}'", name));
      return std::nullopt;
    }
    if (s->kind != SymKind::GlobalArray && s->kind != SymKind::SharedArray) {
      report(DiagKind::TypeError, at, fmt::format("'{}' is not an array", name));
      return std::nullopt;
    }
    return s->type;
  }

  void index(const Expr& e, bool warp_ok) {
    const auto t = expr(e, warp_ok);
    if (t && isFloat(*t)) report(DiagKind::TypeError, e.span, "array index must be an integer");
  }

  // Returns the element or variable type of an assignable location.
  std::optional<ScalarType> lvalue(const LValue& lv, bool warp_ok) {
    if (lv.index) {
      const auto elem = arrayElem(lv.name, lv.span);
      index(**lv.index, warp_ok);
      return elem;
    }
    const Symbol* s = lookup(lv.name);
    if (!s) {
      report(DiagKind::UndefinedName, lv.span, fmt::format("undefined name '{}'", lv.name));
      return std::nullopt;
    }
    switch (s->kind) {
      case SymKind::Local:
        return s->type;
      case SymKind::ScalarParam:
      case SymKind::Counter:
        report(DiagKind::ReadOnlyAssign, lv.span, fmt::format("'{}' is read-only", lv.name));
        return std::nullopt;
      default:
        report(DiagKind::TypeError, lv.span, fmt::format("array '{}' assigned without an index", lv.name));
        return std::nullopt;
    }
  }

  void block(const Block& b, Ctx ctx) {
    scopes_.emplace_back();
    for (const auto& s : b.stmts) stmt(s, ctx);
    scopes_.pop_back();
  }

  void stmt(const Stmt& s, Ctx ctx) {
    const bool warp_ok = !ctx.divergent;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, LocalDecl>) {
            expr(n.init, warp_ok);
            declare(n.name, Symbol{SymKind::Local, n.type}, s.span);
          } else if constexpr (std::is_same_v<T, Assign>) {
            lvalue(n.target, warp_ok);
            expr(n.value, warp_ok);
          } else if constexpr (std::is_same_v<T, If>) {
            expr(n.cond, false);
            block(n.then_block, Ctx{true});
            if (n.else_block) block(*n.else_block, Ctx{true});
          } else if constexpr (std::is_same_v<T, For>) {
            for (const Expr* b : {&n.lo, &n.hi, &n.step}) {
              const auto t = expr(*b, false);
              if (t && isFloat(*t)) report(DiagKind::TypeError, b->span, "loop bounds must be integers");
            }
            const bool uni = uniform(n.lo) && uniform(n.hi) && uniform(n.step);
            scopes_.emplace_back();
            declare(n.counter, Symbol{SymKind::Counter, ScalarType::I32, uni && !ctx.divergent}, s.span);
            block(n.body, Ctx{ctx.divergent || !uni});
            scopes_.pop_back();
          } else if constexpr (std::is_same_v<T, Barrier>) {
            if (ctx.divergent)
              report(DiagKind::BarrierInDivergentContext, s.span,
                     "barrier must be at top level or inside a loop with block-uniform bounds");
          } else if constexpr (std::is_same_v<T, Atomic>) {
            const auto elem = n.target.index ? lvalue(n.target, warp_ok) : std::nullopt;
            if (!n.target.index)
              report(DiagKind::TypeError, n.target.span, "atomic target must be an array element");
            expr(n.operand, warp_ok);
            if (n.compare) expr(*n.compare, warp_ok);
            if (n.kind == AtomicKind::Cas && elem && isFloat(*elem))
              report(DiagKind::TypeError, s.span, "atomic_cas requires an integer array");
            if (n.result) declare(n.result->name, Symbol{SymKind::Local, n.result->type}, s.span);
          }
        },
        s.node);
  }

  const KernelProgram& k_;
  bool warp_mode_;
  std::vector<std::map<std::string, Symbol, std::less<>>> scopes_;
  std::vector<Diagnostic> diags_;
};

}  // namespace

std::string_view to_string(DiagKind k) { return kindName(k); }

std::string to_string(const Diagnostic& d) {
  return fmt::format("{}: {}: {}", to_string(d.span), kindName(d.kind), d.message);
}

std::vector<Diagnostic> validate(const ast::KernelProgram& k, bool warp_mode) {
  return Checker(k, warp_mode).run();
}

}  // namespace blockfuse
