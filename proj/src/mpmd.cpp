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

#include "blockfuse/mpmd.hpp"

#include <map>
#include <set>

#include <fmt/format.h>

#include "blockfuse/validate.hpp"

namespace blockfuse::mpmd {

std::string_view to_string(VarClass c) {
  switch (c) {
    case VarClass::Local: return "local";
    case VarClass::Expanded: return "expanded";
    case VarClass::Uniform: return "uniform";
  }
  return "?";
}

std::string_view to_string(MemSpace s) {
  switch (s) {
    case MemSpace::Unclassified: return "unclassified";
    case MemSpace::Global: return "global";
    case MemSpace::SharedStatic: return "shared-static";
    case MemSpace::SharedDynamic: return "shared-dynamic";
  }
  return "?";
}

std::uint64_t MpmdKernel::staticSharedBytes() const {
  std::uint64_t n = 0;
  for (const auto& s : static_shared) n += s.bytes();
  return n;
}

namespace {

std::size_t countBarrierPoints(const std::vector<Region>& rs) {
  std::size_t n = 0;
  for (const auto& r : rs) {
    if (std::holds_alternative<BarrierPoint>(r.node)) ++n;
    else if (const auto* l = std::get_if<UniformLoop>(&r.node)) n += countBarrierPoints(l->body);
  }
  return n;
}

}  // namespace

std::size_t MpmdKernel::barrierPoints() const { return countBarrierPoints(schedule); }

namespace {

using namespace ast;

constexpr std::uint32_t kNoUnit = 0xffffffffu;

LExpr castTo(LExpr e, ScalarType t) {
  if (e.type == t) return e;
  LExpr c;
  c.span = e.span;
  c.type = t;
  c.node = ECast{Box<LExpr>(std::move(e))};
  return c;
}

LExpr constant(Value v, Span at) {
  LExpr e;
  e.span = at;
  e.type = v.type();
  e.node = EConst{v};
  return e;
}

std::uint64_t countNodes(const Expr& e) {
  return 1 + std::visit(
                 [](const auto& n) -> std::uint64_t {
                   using T = std::decay_t<decltype(n)>;
                   if constexpr (std::is_same_v<T, Index>) return countNodes(*n.index);
                   else if constexpr (std::is_same_v<T, Unary> || std::is_same_v<T, Cast>) return countNodes(*n.operand);
                   else if constexpr (std::is_same_v<T, Binary>) return countNodes(*n.lhs) + countNodes(*n.rhs);
                   else if constexpr (std::is_same_v<T, Call>) {
                     std::uint64_t s = 0;
                     for (const auto& a : n.args) s += countNodes(a);
                     return s;
                   } else return 0;
                 },
                 e.node);
}

std::uint64_t countNodes(const Block& b) {
  std::uint64_t n = 0;
  for (const auto& s : b.stmts) {
    n += 1;
    std::visit(
        [&](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, LocalDecl>) n += countNodes(x.init);
          else if constexpr (std::is_same_v<T, Assign>) {
            n += countNodes(x.value);
            if (x.target.index) n += countNodes(**x.target.index);
          } else if constexpr (std::is_same_v<T, If>) {
            n += countNodes(x.cond) + countNodes(x.then_block);
            if (x.else_block) n += countNodes(*x.else_block);
          } else if constexpr (std::is_same_v<T, For>) {
            n += countNodes(x.lo) + countNodes(x.hi) + countNodes(x.step) + countNodes(x.body);
          } else if constexpr (std::is_same_v<T, Atomic>) {
            n += countNodes(x.operand);
            if (x.compare) n += countNodes(*x.compare);
            if (x.target.index) n += countNodes(**x.target.index);
          }
        },
        s.node);
  }
  return n;
}

class Lowering {
 public:
  Lowering(const KernelProgram& k, const TransformOptions& opts) : k_(k), opts_(opts) {}

  MpmdKernel run() {
    out_.name = k_.name;
    out_.params = k_.params;
    out_.warp_mode = opts_.warp_mode;
    out_.warp_size = opts_.warp_size;
    out_.uses_atomics = usesAtomics(k_.body);
    out_.instruction_estimate = countNodes(k_.body);
    for (const auto& d : k_.shared) {
      if (d.isDynamic()) out_.dynamic_shared = DynamicShared{d.name, d.type};
      else out_.static_shared.push_back(StaticShared{d.name, d.type, *d.length});
    }

    scopes_.emplace_back();
    for (std::uint32_t i = 0; i < k_.params.size(); ++i) {
      const Param& p = k_.params[i];
      scopes_.back()[p.name] = Binding{p.global ? Binding::Array : Binding::Param, i, p.type};
    }
    for (const auto& d : k_.shared) scopes_.back()[d.name] = Binding{Binding::Array, 0, d.type};

    scopes_.emplace_back();
    regions(k_.body, out_.schedule, true);
    // A trailing barrier still closes over a (possibly empty) section.
    const bool ends_in_loop =
        !out_.schedule.empty() && std::holds_alternative<UniformLoop>(out_.schedule.back().node);
    flush(out_.schedule, !ends_in_loop);
    scopes_.clear();

    assignSlots();
    return std::move(out_);
  }

 private:
  struct Binding {
    enum Kind { Param, Array, Decl, Uniform } kind;
    std::uint32_t id;
    ScalarType type;
  };

  struct DeclInfo {
    std::string name;
    ScalarType type;
    std::set<std::uint32_t> units;
  };

  // Where a lowered expression is evaluated.
  struct ExprCtx {
    std::uint32_t unit = kNoUnit;
    LaneExchange* exchange = nullptr;
    std::uint32_t gather_unit = kNoUnit;
  };

  // Appends statements to a list of steps, opening lane phases on demand.
  struct StepSink {
    std::vector<Step>* steps;
    bool phase_open = false;
    std::uint32_t phase_unit = kNoUnit;
  };

  struct OpenSection {
    Section section;
    StepSink sink;
  };

  // --- scopes ------------------------------------------------------------

  const Binding& lookup(const std::string& name, Span at) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return f->second;
    }
    throw TransformError(fmt::format("{}: unresolved name '{}'", to_string(at), name));
  }

  std::uint32_t declare(const std::string& name, ScalarType t) {
    const auto id = static_cast<std::uint32_t>(decls_.size());
    decls_.push_back(DeclInfo{name, t, {}});
    scopes_.back()[name] = Binding{Binding::Decl, id, t};
    return id;
  }

  std::uint32_t declareUniform(const std::string& name) {
    const auto slot = static_cast<std::uint32_t>(out_.uniforms.size());
    out_.uniforms.push_back(VarInfo{name, ScalarType::I32});
    scopes_.back()[name] = Binding{Binding::Uniform, slot, ScalarType::I32};
    return slot;
  }

  VarLoc touch(const Binding& b, std::uint32_t unit, Span at) {
    if (b.kind == Binding::Uniform) return VarLoc{VarClass::Uniform, b.id};
    if (unit == kNoUnit)
      throw TransformError(fmt::format("{}: thread-private variable in a block-uniform expression", to_string(at)));
    decls_[b.id].units.insert(unit);
    return VarLoc{VarClass::Local, b.id};  // decl id until assignSlots
  }

  // --- expressions -------------------------------------------------------

  ArrayRef arrayRef(const std::string& name, Span at) const {
    const Binding& b = lookup(name, at);
    if (b.kind != Binding::Array) throw TransformError(fmt::format("{}: '{}' is not an array", to_string(at), name));
    return ArrayRef{name, MemSpace::Unclassified, 0, b.type};
  }

  LExpr expr(const Expr& e, const ExprCtx& ctx) {
    LExpr out;
    out.span = e.span;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, IntLit>) {
            const bool fits = n.value >= INT32_MIN && n.value <= INT32_MAX;
            out = constant(fits ? Value::i32(static_cast<std::int32_t>(n.value)) : Value::i64(n.value), e.span);
          } else if constexpr (std::is_same_v<T, FloatLit>) {
            out = constant(n.single ? Value::f32(static_cast<float>(n.value)) : Value::f64(n.value), e.span);
          } else if constexpr (std::is_same_v<T, VarRef>) {
            const Binding& b = lookup(n.name, e.span);
            out.type = b.type;
            if (b.kind == Binding::Param) out.node = EParam{b.id};
            else if (b.kind == Binding::Array)
              throw TransformError(fmt::format("{}: array '{}' used as a scalar", to_string(e.span), n.name));
            else out.node = EVar{n.name, touch(b, ctx.unit, e.span)};
          } else if constexpr (std::is_same_v<T, BuiltinRef>) {
            if (ctx.unit == kNoUnit && n.which == Builtin::ThreadIdx)
              throw TransformError(fmt::format("{}: threadIdx in a block-uniform expression", to_string(e.span)));
            out.type = ScalarType::I32;
            out.node = EBuiltin{n.which, n.axis};
          } else if constexpr (std::is_same_v<T, Index>) {
            if (ctx.unit == kNoUnit)
              throw TransformError(fmt::format("{}: memory load in a block-uniform expression", to_string(e.span)));
            ArrayRef a = arrayRef(n.array, e.span);
            out.type = a.elem;
            out.node = ELoad{std::move(a), Box<LExpr>(expr(*n.index, ctx))};
          } else if constexpr (std::is_same_v<T, Unary>) {
            LExpr v = expr(*n.operand, ctx);
            const auto t = unaryResultType(n.op, v.type);
            if (!t) throw TransformError(fmt::format("{}: ill-typed unary operator", to_string(e.span)));
            out.type = *t;
            out.node = EUnary{n.op, Box<LExpr>(std::move(v))};
          } else if constexpr (std::is_same_v<T, Binary>) {
            LExpr l = expr(*n.lhs, ctx);
            LExpr r = expr(*n.rhs, ctx);
            const auto t = binaryResultType(n.op, l.type, r.type);
            if (!t) throw TransformError(fmt::format("{}: ill-typed binary operator", to_string(e.span)));
            if (!isLogical(n.op)) {
              const ScalarType ot = operandType(n.op, l.type, r.type);
              l = castTo(std::move(l), ot);
              if (n.op != BinOp::Shl && n.op != BinOp::Shr) r = castTo(std::move(r), ot);
            }
            out.type = *t;
            out.node = EBinary{n.op, Box<LExpr>(std::move(l)), Box<LExpr>(std::move(r))};
          } else if constexpr (std::is_same_v<T, Cast>) {
            out = castTo(expr(*n.operand, ctx), n.to);
            out.span = e.span;
          } else if constexpr (std::is_same_v<T, Call>) {
            out = call(n, e.span, ctx);
          }
        },
        e.node);
    return out;
  }

  LExpr call(const Call& c, Span at, const ExprCtx& ctx) {
    LExpr out;
    out.span = at;
    if (isWarpIntrinsic(c.fn)) {
      if (!ctx.exchange)
        throw TransformError(fmt::format("{}: '{}' outside a lane exchange", to_string(at), spelling(c.fn)));
      const ExprCtx gctx{ctx.gather_unit, nullptr, kNoUnit};
      Gather g;
      g.fn = c.fn;
      g.value = expr(c.args.at(0), gctx);
      if (c.fn == Intrinsic::ShflDown) {
        g.delta = castTo(expr(c.args.at(1), gctx), ScalarType::I32);
        out.type = g.value.type;
      } else {
        out.type = ScalarType::I32;
      }
      out.node = ELaneRead{static_cast<std::uint32_t>(ctx.exchange->gathers.size())};
      ctx.exchange->gathers.push_back(std::move(g));
      return out;
    }
    std::vector<LExpr> args;
    std::vector<ScalarType> types;
    for (const auto& a : c.args) {
      args.push_back(expr(a, ctx));
      types.push_back(args.back().type);
    }
    const auto t = mathResultType(c.fn, types);
    if (!t) throw TransformError(fmt::format("{}: ill-typed call to '{}'", to_string(at), spelling(c.fn)));
    for (auto& a : args) a = castTo(std::move(a), *t);
    out.type = *t;
    out.node = ECall{c.fn, std::move(args)};
    return out;
  }

  // --- per-thread statements ---------------------------------------------

  std::vector<LStmt> stmts(const Block& b, const ExprCtx& ctx) {
    scopes_.emplace_back();
    std::vector<LStmt> out;
    for (const auto& s : b.stmts) lowerInto(out, s, ctx);
    scopes_.pop_back();
    return out;
  }

  void lowerInto(std::vector<LStmt>& out, const Stmt& s, const ExprCtx& ctx) {
    if (auto l = stmt(s, ctx)) out.push_back(std::move(*l));
  }

  std::optional<LStmt> stmt(const Stmt& s, const ExprCtx& ctx) {
    LStmt out;
    out.span = s.span;
    bool emitted = true;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, LocalDecl>) {
            LExpr init = castTo(expr(n.init, ctx), n.type);
            const std::uint32_t id = declare(n.name, n.type);
            decls_[id].units.insert(ctx.unit);
            out.node = SSet{n.name, VarLoc{VarClass::Local, id}, std::move(init)};
          } else if constexpr (std::is_same_v<T, Assign>) {
            if (n.target.index) {
              ArrayRef a = arrayRef(n.target.name, n.target.span);
              LExpr idx = expr(**n.target.index, ctx);
              LExpr val = castTo(expr(n.value, ctx), a.elem);
              out.node = SStore{std::move(a), std::move(idx), std::move(val)};
            } else {
              const Binding& b = lookup(n.target.name, n.target.span);
              if (b.kind != Binding::Decl)
                throw TransformError(fmt::format("{}: '{}' is not assignable", to_string(s.span), n.target.name));
              LExpr val = castTo(expr(n.value, ctx), b.type);
              out.node = SSet{n.target.name, touch(b, ctx.unit, s.span), std::move(val)};
            }
          } else if constexpr (std::is_same_v<T, If>) {
            SIf x;
            x.cond = expr(n.cond, ctx);
            x.then_body = stmts(n.then_block, ctx);
            if (n.else_block) x.else_body = stmts(*n.else_block, ctx);
            out.node = std::move(x);
          } else if constexpr (std::is_same_v<T, For>) {
            if (containsBarrier(n.body))
              throw TransformError(fmt::format("{}: barrier inside a thread-dependent loop", to_string(s.span)));
            SFor f;
            f.counter = n.counter;
            f.lo = castTo(expr(n.lo, ctx), ScalarType::I32);
            f.hi = castTo(expr(n.hi, ctx), ScalarType::I32);
            f.step = castTo(expr(n.step, ctx), ScalarType::I32);
            scopes_.emplace_back();
            const std::uint32_t id = declare(n.counter, ScalarType::I32);
            decls_[id].units.insert(ctx.unit);
            f.var = VarLoc{VarClass::Local, id};
            f.body = stmts(n.body, ctx);
            scopes_.pop_back();
            out.node = std::move(f);
          } else if constexpr (std::is_same_v<T, Barrier>) {
            throw TransformError(fmt::format("{}: barrier in a divergent context", to_string(s.span)));
          } else if constexpr (std::is_same_v<T, Atomic>) {
            if (!n.target.index)
              throw TransformError(fmt::format("{}: atomic target must be an array element", to_string(s.span)));
            SAtomic a;
            a.kind = n.kind;
            a.array = arrayRef(n.target.name, n.target.span);
            a.index = expr(**n.target.index, ctx);
            if (n.compare) a.compare = castTo(expr(*n.compare, ctx), a.array.elem);
            a.operand = castTo(expr(n.operand, ctx), a.array.elem);
            if (n.result) {
              const std::uint32_t id = declare(n.result->name, n.result->type);
              decls_[id].units.insert(ctx.unit);
              a.result = AtomicResult{n.result->name, VarLoc{VarClass::Local, id}, n.result->type};
            }
            out.node = std::move(a);
          } else {
            emitted = false;
          }
        },
        s.node);
    if (!emitted) return std::nullopt;
    return out;
  }

  // --- sections ----------------------------------------------------------

  std::uint32_t newUnit() { return next_unit_++; }

  LanePhase& phase(StepSink& sink) {
    if (!sink.phase_open) {
      sink.steps->push_back(Step{LanePhase{}});
      sink.phase_open = true;
      sink.phase_unit = newUnit();
    }
    return std::get<LanePhase>(sink.steps->back().node);
  }

  OpenSection& openSection() {
    if (!open_) {
      open_.emplace();
      open_->section.shape = opts_.warp_mode ? LoopShape::WarpLaneLoops : LoopShape::SingleThreadLoop;
    }
    // Re-seat: `open_` may have been moved into place.
    open_->sink.steps = &open_->section.steps;
    return *open_;
  }

  void flush(std::vector<Region>& regions, bool force) {
    if (!open_ && !force) return;
    OpenSection& os = openSection();
    if (os.section.shape == LoopShape::SingleThreadLoop) phase(os.sink);
    const auto idx = static_cast<std::uint32_t>(out_.sections.size());
    out_.sections.push_back(std::move(os.section));
    open_.reset();
    regions.push_back(Region{RunSection{idx}});
  }

  LExpr uniformExpr(const Expr& e) { return castTo(expr(e, ExprCtx{}), ScalarType::I32); }

  void append(const Stmt& s, StepSink& sink) {
    if (!opts_.warp_mode) {
      LanePhase& p = phase(sink);
      lowerInto(p.stmts, s, ExprCtx{sink.phase_unit});
      return;
    }
    if (hasDirectWarpIntrinsic(s)) {
      sink.phase_open = false;
      LaneExchange ex;
      const ExprCtx ctx{newUnit(), &ex, newUnit()};
      auto apply = stmt(s, ctx);
      if (!apply) throw TransformError(fmt::format("{}: empty lane exchange", to_string(s.span)));
      ex.apply = std::move(*apply);
      sink.steps->push_back(Step{std::move(ex)});
      return;
    }
    if (const auto* f = std::get_if<For>(&s.node); f && containsWarpIntrinsic(f->body)) {
      sink.phase_open = false;
      WarpLoop w;
      w.counter = f->counter;
      w.lo = uniformExpr(f->lo);
      w.hi = uniformExpr(f->hi);
      w.step = uniformExpr(f->step);
      scopes_.emplace_back();
      w.var = VarLoc{VarClass::Uniform, declareUniform(f->counter)};
      scopes_.emplace_back();
      StepSink inner{&w.body};
      for (const auto& b : f->body.stmts) append(b, inner);
      scopes_.pop_back();
      scopes_.pop_back();
      sink.steps->push_back(Step{std::move(w)});
      return;
    }
    if (std::holds_alternative<If>(s.node) && containsWarpIntrinsic(s))
      throw TransformError(fmt::format("{}: warp intrinsic under divergent control flow", to_string(s.span)));
    LanePhase& p = phase(sink);
    lowerInto(p.stmts, s, ExprCtx{sink.phase_unit});
  }

  void regions(const Block& b, std::vector<Region>& out, bool top_level) {
    for (const auto& s : b.stmts) {
      if (std::holds_alternative<Barrier>(s.node)) {
        flush(out, top_level);
        out.push_back(Region{BarrierPoint{}});
      } else if (const auto* f = std::get_if<For>(&s.node); f && containsBarrier(f->body)) {
        flush(out, false);
        UniformLoop loop;
        loop.counter = f->counter;
        loop.lo = uniformExpr(f->lo);
        loop.hi = uniformExpr(f->hi);
        loop.step = uniformExpr(f->step);
        scopes_.emplace_back();
        loop.var = VarLoc{VarClass::Uniform, declareUniform(f->counter)};
        scopes_.emplace_back();
        regions(f->body, loop.body, false);
        flush(loop.body, false);
        scopes_.pop_back();
        scopes_.pop_back();
        out.push_back(Region{std::move(loop)});
      } else if (containsBarrier(s)) {
        throw TransformError(fmt::format("{}: barrier in a divergent context", to_string(s.span)));
      } else {
        append(s, openSection().sink);
      }
    }
  }

  // --- slot assignment ---------------------------------------------------

  void assignSlots() {
    std::vector<VarLoc> final_loc(decls_.size());
    for (std::size_t i = 0; i < decls_.size(); ++i) {
      const DeclInfo& d = decls_[i];
      if (d.units.size() > 1) {
        final_loc[i] = VarLoc{VarClass::Expanded, static_cast<std::uint32_t>(out_.expanded_vars.size())};
        out_.expanded_vars.push_back(VarInfo{d.name, d.type});
      } else {
        final_loc[i] = VarLoc{VarClass::Local, static_cast<std::uint32_t>(out_.locals.size())};
        out_.locals.push_back(VarInfo{d.name, d.type});
      }
    }
    auto fix = [&](VarLoc& v) {
      if (v.cls == VarClass::Local) v = final_loc.at(v.slot);
    };
    for (auto& sec : out_.sections)
      for (auto& st : sec.steps) fixStep(st, fix);
  }

  template <class F>
  static void fixExpr(LExpr& e, F& fix) {
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, EVar>) fix(n.loc);
          else if constexpr (std::is_same_v<T, ELoad>) fixExpr(*n.index, fix);
          else if constexpr (std::is_same_v<T, EUnary> || std::is_same_v<T, ECast>) fixExpr(*n.operand, fix);
          else if constexpr (std::is_same_v<T, EBinary>) {
            fixExpr(*n.lhs, fix);
            fixExpr(*n.rhs, fix);
          } else if constexpr (std::is_same_v<T, ECall>) {
            for (auto& a : n.args) fixExpr(a, fix);
          }
        },
        e.node);
  }

  template <class F>
  static void fixStmt(LStmt& s, F& fix) {
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, SSet>) {
            fix(n.var);
            fixExpr(n.value, fix);
          } else if constexpr (std::is_same_v<T, SStore>) {
            fixExpr(n.index, fix);
            fixExpr(n.value, fix);
          } else if constexpr (std::is_same_v<T, SIf>) {
            fixExpr(n.cond, fix);
            for (auto& x : n.then_body) fixStmt(x, fix);
            for (auto& x : n.else_body) fixStmt(x, fix);
          } else if constexpr (std::is_same_v<T, SFor>) {
            fix(n.var);
            fixExpr(n.lo, fix);
            fixExpr(n.hi, fix);
            fixExpr(n.step, fix);
            for (auto& x : n.body) fixStmt(x, fix);
          } else if constexpr (std::is_same_v<T, SAtomic>) {
            fixExpr(n.index, fix);
            fixExpr(n.operand, fix);
            if (n.compare) fixExpr(*n.compare, fix);
            if (n.result) fix(n.result->var);
          }
        },
        s.node);
  }

  template <class F>
  static void fixStep(Step& st, F& fix) {
    std::visit(
        [&](auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, LanePhase>) {
            for (auto& s : n.stmts) fixStmt(s, fix);
          } else if constexpr (std::is_same_v<T, LaneExchange>) {
            for (auto& g : n.gathers) {
              fixExpr(g.value, fix);
              if (g.delta) fixExpr(*g.delta, fix);
            }
            fixStmt(n.apply, fix);
          } else {
            for (auto& s : n.body) fixStep(s, fix);
          }
        },
        st.node);
  }

  const KernelProgram& k_;
  TransformOptions opts_;
  MpmdKernel out_;
  std::vector<std::map<std::string, Binding>> scopes_;
  std::vector<DeclInfo> decls_;
  std::uint32_t next_unit_ = 0;
  std::optional<OpenSection> open_;
};

}  // namespace

MpmdKernel transform(const ast::KernelProgram& k, const TransformOptions& opts) {
  if (opts.warp_size == 0) throw TransformError("warp size must be positive");
  const auto diags = validate(k, opts.warp_mode);
  if (!diags.empty())
    throw TransformError(fmt::format("kernel '{}' does not validate: {}", k.name, to_string(diags.front())));
  return Lowering(k, opts).run();
}

}  // namespace blockfuse::mpmd
