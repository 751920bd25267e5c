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

// Passes over the block-fused form: memory classification and grid-stride
// reordering.

#include <functional>
#include <map>
#include <set>
#include <span>

#include <fmt/format.h>

#include "blockfuse/mpmd.hpp"

namespace blockfuse::mpmd {

namespace {

// Calls `fn` on every statement list reachable from the kernel's sections.
template <class F>
void forEachStmtList(std::vector<Step>& steps, F& fn);

template <class F>
void forEachStmtList(std::span<LStmt> stmts, F& fn) {
  fn(stmts);
  for (auto& s : stmts) {
    if (auto* i = std::get_if<SIf>(&s.node)) {
      forEachStmtList(i->then_body, fn);
      forEachStmtList(i->else_body, fn);
    } else if (auto* f = std::get_if<SFor>(&s.node)) {
      forEachStmtList(f->body, fn);
    }
  }
}

template <class F>
void forEachStmtList(std::vector<Step>& steps, F& fn) {
  for (auto& st : steps) {
    if (auto* p = std::get_if<LanePhase>(&st.node)) {
      forEachStmtList(p->stmts, fn);
    } else if (auto* x = std::get_if<LaneExchange>(&st.node)) {
      forEachStmtList(std::span<LStmt>(&x->apply, 1), fn);
    } else if (auto* w = std::get_if<WarpLoop>(&st.node)) {
      forEachStmtList(w->body, fn);
    }
  }
}

template <class E, class F>
void forEachExprIn(E& e, F& fn) {
  fn(e);
  std::visit(
      [&](auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ELoad>) forEachExprIn(*n.index, fn);
        else if constexpr (std::is_same_v<T, EUnary> || std::is_same_v<T, ECast>) forEachExprIn(*n.operand, fn);
        else if constexpr (std::is_same_v<T, EBinary>) {
          forEachExprIn(*n.lhs, fn);
          forEachExprIn(*n.rhs, fn);
        } else if constexpr (std::is_same_v<T, ECall>) {
          for (auto& a : n.args) forEachExprIn(a, fn);
        }
      },
      e.node);
}

// Expressions owned directly by a statement (not by nested statements).
template <class F>
void forEachOwnExpr(LStmt& s, F& fn) {
  std::visit(
      [&](auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, SSet>) {
          forEachExprIn(n.value, fn);
        } else if constexpr (std::is_same_v<T, SStore>) {
          forEachExprIn(n.index, fn);
          forEachExprIn(n.value, fn);
        } else if constexpr (std::is_same_v<T, SIf>) {
          forEachExprIn(n.cond, fn);
        } else if constexpr (std::is_same_v<T, SFor>) {
          forEachExprIn(n.lo, fn);
          forEachExprIn(n.hi, fn);
          forEachExprIn(n.step, fn);
        } else if constexpr (std::is_same_v<T, SAtomic>) {
          forEachExprIn(n.index, fn);
          forEachExprIn(n.operand, fn);
          if (n.compare) forEachExprIn(*n.compare, fn);
        }
      },
      s.node);
}

template <class F>
void forEachArrayRef(MpmdKernel& k, F&& fn) {
  auto onExpr = [&](LExpr& e) {
    if (auto* l = std::get_if<ELoad>(&e.node)) fn(l->array);
  };
  auto onList = [&](std::span<LStmt> list) {
    for (auto& s : list) {
      if (auto* st = std::get_if<SStore>(&s.node)) fn(st->array);
      else if (auto* a = std::get_if<SAtomic>(&s.node)) fn(a->array);
      forEachOwnExpr(s, onExpr);
    }
  };
  for (auto& sec : k.sections) {
    forEachStmtList(sec.steps, onList);
    std::function<void(std::vector<Step>&)> gathers = [&](std::vector<Step>& steps) {
      for (auto& st : steps) {
        if (auto* x = std::get_if<LaneExchange>(&st.node)) {
          for (auto& g : x->gathers) {
            forEachExprIn(g.value, onExpr);
            if (g.delta) forEachExprIn(*g.delta, onExpr);
          }
        } else if (auto* w = std::get_if<WarpLoop>(&st.node)) {
          gathers(w->body);
        }
      }
    };
    gathers(sec.steps);
  }
}

}  // namespace

MpmdKernel mapMemory(MpmdKernel k) {
  std::map<std::string, std::pair<MemSpace, std::uint32_t>, std::less<>> where;
  for (std::uint32_t i = 0; i < k.params.size(); ++i)
    if (k.params[i].global) where[k.params[i].name] = {MemSpace::Global, i};
  for (std::uint32_t i = 0; i < k.static_shared.size(); ++i)
    where[k.static_shared[i].name] = {MemSpace::SharedStatic, i};
  if (k.dynamic_shared) where[k.dynamic_shared->name] = {MemSpace::SharedDynamic, 0};
  forEachArrayRef(k, [&](ArrayRef& a) {
    auto it = where.find(a.name);
    if (it == where.end()) throw TransformError(fmt::format("array '{}' has no storage", a.name));
    a.space = it->second.first;
    a.id = it->second.second;
  });
  return k;
}

MpmdKernel compile(const ast::KernelProgram& k, const TransformOptions& opts) { return mapMemory(transform(k, opts)); }

// ---------------------------------------------------------------------------
// Grid-stride reordering
// ---------------------------------------------------------------------------

namespace {

using VarKey = std::pair<VarClass, std::uint32_t>;
VarKey key(const VarLoc& v) { return {v.cls, v.slot}; }

bool isIntConst(const LExpr& e, std::int64_t v) {
  if (const auto* c = std::get_if<ECast>(&e.node)) return isIntConst(*c->operand, v);
  const auto* k = std::get_if<EConst>(&e.node);
  return k && isInteger(k->value.type()) && k->value.toInt64() == v;
}

bool isBuiltin(const LExpr& e, ast::Builtin b) {
  const auto* x = std::get_if<EBuiltin>(&e.node);
  return x && x->which == b && x->axis == ast::Axis::X;
}

bool isVar(const LExpr& e, const VarLoc& v) {
  const auto* x = std::get_if<EVar>(&e.node);
  return x && x->loc == v;
}

class GridStride {
 public:
  explicit GridStride(MpmdKernel& k) : k_(k) {}

  bool run() {
    collectAliases();
    bool any = false;
    auto onList = [&](std::span<LStmt> list) {
      for (auto& s : list)
        if (auto* f = std::get_if<SFor>(&s.node); f && isIntConst(f->lo, 0) && isIntConst(f->step, 1))
          any = rewriteLoop(*f) || any;
    };
    for (auto& sec : k_.sections) forEachStmtList(sec.steps, onList);
    return any;
  }

 private:
  struct Site {
    std::string array;
    LExpr* index;
    bool write;
  };

  void collectAliases() {
    std::map<VarKey, int> defs;
    std::map<VarKey, const LExpr*> value;
    auto onList = [&](std::span<LStmt> list) {
      for (auto& s : list) {
        if (auto* x = std::get_if<SSet>(&s.node)) {
          ++defs[key(x->var)];
          value[key(x->var)] = &x->value;
        } else if (auto* f = std::get_if<SFor>(&s.node)) {
          defs[key(f->var)] += 2;
        } else if (auto* a = std::get_if<SAtomic>(&s.node); a && a->result) {
          defs[key(a->result->var)] += 2;
        }
      }
    };
    for (auto& sec : k_.sections) forEachStmtList(sec.steps, onList);
    for (const auto& [k, n] : defs)
      if (n == 1 && isBuiltin(*value[k], ast::Builtin::ThreadIdx)) aliases_.insert(k);
  }

  bool isTid(const LExpr& e) const {
    if (isBuiltin(e, ast::Builtin::ThreadIdx)) return true;
    const auto* v = std::get_if<EVar>(&e.node);
    return v && aliases_.contains(key(v->loc));
  }

  bool invariant(const LExpr& e, const std::set<VarKey>& variant) const {
    bool ok = true;
    auto check = [&](const LExpr& x) {
      if (auto* v = std::get_if<EVar>(&x.node); v && variant.contains(key(v->loc))) ok = false;
      if (std::holds_alternative<ELoad>(x.node) || std::holds_alternative<ELaneRead>(x.node)) ok = false;
    };
    forEachExprIn(e, check);
    return ok;
  }

  // Same value in every thread: parameters, non-thread builtins, constants
  // and uniform loop counters only.
  static bool threadInvariant(const LExpr& e) {
    bool ok = true;
    auto check = [&](const LExpr& x) {
      if (auto* v = std::get_if<EVar>(&x.node); v && v->loc.cls != VarClass::Uniform) ok = false;
      if (auto* b = std::get_if<EBuiltin>(&x.node); b && b->which == ast::Builtin::ThreadIdx) ok = false;
      if (std::holds_alternative<ELoad>(x.node) || std::holds_alternative<ELaneRead>(x.node)) ok = false;
    };
    forEachExprIn(e, check);
    return ok;
  }

  // True if `e`, outside the subtrees in `skip`, mentions the loop counter,
  // the thread index, or a per-thread variable defined before the loop.
  bool leaks(const LExpr& e, const SFor& loop, const std::set<const LExpr*>& skip,
             const std::set<VarKey>& inner) const {
    if (skip.contains(&e)) return false;
    if (isVar(e, loop.var) || isTid(e)) return true;
    if (const auto* v = std::get_if<EVar>(&e.node); v && v->loc.cls != VarClass::Uniform && !inner.contains(key(v->loc)))
      return true;
    if (const auto* b = std::get_if<EBuiltin>(&e.node); b && b->which == ast::Builtin::ThreadIdx) return true;
    bool out = false;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, ELoad>) out = leaks(*n.index, loop, skip, inner);
          else if constexpr (std::is_same_v<T, EUnary> || std::is_same_v<T, ECast>) out = leaks(*n.operand, loop, skip, inner);
          else if constexpr (std::is_same_v<T, EBinary>) out = leaks(*n.lhs, loop, skip, inner) || leaks(*n.rhs, loop, skip, inner);
          else if constexpr (std::is_same_v<T, ECall>) {
            for (const auto& a : n.args) out = out || leaks(a, loop, skip, inner);
          }
        },
        e.node);
    return out;
  }

  static void flatten(const LExpr& e, ScalarType t, std::vector<const LExpr*>& terms) {
    if (const auto* b = std::get_if<EBinary>(&e.node); b && b->op == BinOp::Add && e.type == t) {
      flatten(*b->lhs, t, terms);
      flatten(*b->rhs, t, terms);
    } else {
      terms.push_back(&e);
    }
  }

  static LExpr binary(BinOp op, LExpr l, LExpr r, Span at) {
    LExpr e;
    e.span = at;
    e.type = ScalarType::I32;
    e.node = EBinary{op, Box<LExpr>(std::move(l)), Box<LExpr>(std::move(r))};
    return e;
  }

  std::optional<LExpr> match(const LExpr& idx, const SFor& loop, const std::set<VarKey>& variant) const {
    if (idx.type != ScalarType::I32) return std::nullopt;
    const auto* top = std::get_if<EBinary>(&idx.node);
    if (!top || top->op != BinOp::Add) return std::nullopt;
    std::vector<const LExpr*> terms;
    flatten(idx, idx.type, terms);
    const LExpr* stride = nullptr;
    const LExpr* tid = nullptr;
    std::vector<const LExpr*> rest;
    for (const LExpr* t : terms) {
      const auto* m = std::get_if<EBinary>(&t->node);
      const bool is_stride = m && m->op == BinOp::Mul &&
                             ((isVar(*m->lhs, loop.var) && isBuiltin(*m->rhs, ast::Builtin::BlockDim)) ||
                              (isBuiltin(*m->lhs, ast::Builtin::BlockDim) && isVar(*m->rhs, loop.var)));
      if (is_stride) {
        if (stride) return std::nullopt;
        stride = t;
      } else if (isTid(*t)) {
        if (tid) return std::nullopt;
        tid = t;
      } else {
        if (!invariant(*t, variant) || !threadInvariant(*t)) return std::nullopt;
        rest.push_back(t);
      }
    }
    if (!stride || !tid) return std::nullopt;

    const Span at = idx.span;
    LExpr j;
    j.span = at;
    j.type = ScalarType::I32;
    j.node = EVar{loop.counter, loop.var};
    LExpr chunk = binary(BinOp::Mul, *tid, loop.hi, at);
    std::optional<LExpr> acc;
    for (const LExpr* r : rest) acc = acc ? binary(BinOp::Add, std::move(*acc), *r, at) : *r;
    LExpr out = acc ? binary(BinOp::Add, std::move(*acc), std::move(chunk), at) : std::move(chunk);
    return binary(BinOp::Add, std::move(out), std::move(j), at);
  }

  bool rewriteLoop(SFor& loop) {
    std::set<VarKey> variant{key(loop.var)};
    std::vector<Site> sites;
    auto onExpr = [&](LExpr& e) {
      if (auto* l = std::get_if<ELoad>(&e.node)) sites.push_back({l->array.name, l->index.get(), false});
    };
    auto onList = [&](std::span<LStmt> list) {
      for (auto& s : list) {
        if (auto* x = std::get_if<SSet>(&s.node)) variant.insert(key(x->var));
        else if (auto* f = std::get_if<SFor>(&s.node)) variant.insert(key(f->var));
        else if (auto* st = std::get_if<SStore>(&s.node)) sites.push_back({st->array.name, &st->index, true});
        else if (auto* a = std::get_if<SAtomic>(&s.node)) {
          sites.push_back({a->array.name, &a->index, true});
          if (a->result) variant.insert(key(a->result->var));
        }
        forEachOwnExpr(s, onExpr);
      }
    };
    forEachStmtList(std::span<LStmt>(loop.body), onList);
    if (!invariant(loop.hi, variant) || !threadInvariant(loop.hi)) return false;

    std::vector<std::pair<LExpr*, LExpr>> rewrites;
    std::set<std::string> affected;
    for (const Site& s : sites) {
      if (auto m = match(*s.index, loop, variant)) {
        rewrites.emplace_back(s.index, std::move(*m));
        affected.insert(s.array);
      }
    }
    if (rewrites.empty()) return false;

    for (const std::string& a : affected) {
      bool written = false;
      const LExpr* first = nullptr;
      bool uniform_index = true;
      for (const Site& s : sites) {
        if (s.array != a) continue;
        written = written || s.write;
        if (!first) first = s.index;
        else if (!(*first == *s.index)) uniform_index = false;
      }
      if (written && !uniform_index)
        throw DependenceError(fmt::format("array '{}' is written and accessed with differing indices in loop '{}'",
                                          a, loop.counter));
    }
    // Reordering changes which thread and trip handle an element, so
    // neither may be observed except through a rewritten index.
    std::set<const LExpr*> skip;
    for (const auto& r : rewrites) skip.insert(r.first);
    bool leaked = false;
    auto onTop = [&](LStmt& s) {
      std::visit(
          [&](auto& n) {
            using T = std::decay_t<decltype(n)>;
            auto check = [&](const LExpr& e) { leaked = leaked || leaks(e, loop, skip, variant); };
            if constexpr (std::is_same_v<T, SSet>) check(n.value);
            else if constexpr (std::is_same_v<T, SStore>) {
              check(n.index);
              check(n.value);
            } else if constexpr (std::is_same_v<T, SIf>) check(n.cond);
            else if constexpr (std::is_same_v<T, SFor>) {
              check(n.lo);
              check(n.hi);
              check(n.step);
            } else if constexpr (std::is_same_v<T, SAtomic>) {
              check(n.index);
              check(n.operand);
              if (n.compare) check(*n.compare);
            }
          },
          s.node);
    };
    auto onBody = [&](std::span<LStmt> list) {
      for (auto& s : list) onTop(s);
    };
    forEachStmtList(std::span<LStmt>(loop.body), onBody);
    if (leaked)
      throw DependenceError(fmt::format(
          "loop '{}' uses its counter or the thread index outside a reorderable array index", loop.counter));
    for (auto& [where, replacement] : rewrites) *where = std::move(replacement);
    return true;
  }

  MpmdKernel& k_;
  std::set<VarKey> aliases_;
};

}  // namespace

MpmdKernel reorderGridStride(MpmdKernel k) {
  if (!GridStride(k).run())
    throw PatternNotFound(fmt::format("kernel '{}' has no grid-stride loop to reorder", k.name));
  return k;
}

}  // namespace blockfuse::mpmd
