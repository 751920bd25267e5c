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

#include "blockfuse/executor.hpp"

#include <fmt/format.h>

namespace blockfuse {

BlockStats& BlockStats::operator+=(const BlockStats& o) {
  barrier_events += o.barrier_events;
  sections_run += o.sections_run;
  thread_iterations += o.thread_iterations;
  warp_iterations += o.warp_iterations;
  lane_iterations += o.lane_iterations;
  if (o.outer_trip_count) outer_trip_count = o.outer_trip_count;
  if (o.inner_trip_count) inner_trip_count = o.inner_trip_count;
  return *this;
}

BlockContext::BlockContext(const mpmd::MpmdKernel& k, const LaunchShape& shape, Dim3 index)
    : block_index(index),
      block_dim(shape.block),
      grid_dim(shape.grid),
      dynamic_shared(k.dynamic_shared ? k.dynamic_shared->type : ScalarType::I32,
                     k.dynamic_shared ? shape.dynamic_shared_bytes / sizeOf(k.dynamic_shared->type) : 0),
      dynamic_shared_bytes(shape.dynamic_shared_bytes),
      expanded(k.expanded_vars.size()),
      uniforms(k.uniforms.size()) {
  static_shared.reserve(k.static_shared.size());
  for (const auto& s : k.static_shared) static_shared.emplace_back(s.type, s.length);
  const auto threads = static_cast<std::size_t>(shape.block.volume());
  for (std::size_t i = 0; i < expanded.size(); ++i) expanded[i].assign(threads, Value::zero(k.expanded_vars[i].type));
}

namespace {

using namespace mpmd;

std::uint32_t axisOf(const Dim3& d, ast::Axis a) {
  return a == ast::Axis::X ? d.x : a == ast::Axis::Y ? d.y : d.z;
}

struct LoopBounds {
  std::int64_t lo, hi, step;
};

class BlockRunner {
 public:
  BlockRunner(const MpmdKernel& k, BlockContext& ctx, std::span<const ArgValue> args, const DeviceArena& arena)
      : k_(k), ctx_(ctx), args_(args), block_size_(ctx.block_dim.volume()), locals_(k.locals.size()) {
    if (args.size() != k.params.size())
      throw Error(fmt::format("kernel '{}' expects {} arguments, got {}", k.name, k.params.size(), args.size()));
    globals_.resize(k.params.size());
    for (std::size_t i = 0; i < k.params.size(); ++i) {
      const ast::Param& p = k.params[i];
      if (p.global) {
        const auto* h = std::get_if<BufferHandle>(&args[i]);
        if (!h) throw TypeMismatch(i, "expected a buffer handle");
        globals_[i] = arena.get(*h);
        if (globals_[i]->type() != p.type)
          throw TypeMismatch(i, fmt::format("buffer of {} bound to '{}: global {}[]'",
                                            to_string(globals_[i]->type()), p.name, to_string(p.type)));
      } else if (!std::holds_alternative<Value>(args[i])) {
        throw TypeMismatch(i, "expected a scalar");
      }
    }
  }

  void run() {
    section_ = "schedule";
    try {
      schedule(k_.schedule);
    } catch (const Trap& t) {
      if (t.location()) throw;
      throw t.located(TrapLocation{k_.name, section_, tid_, span_});
    }
  }

 private:
  // --- schedule ------------------------------------------------------------

  void schedule(const std::vector<Region>& rs) {
    for (const auto& r : rs) {
      if (const auto* s = std::get_if<RunSection>(&r.node)) {
        section(*s);
      } else if (std::holds_alternative<BarrierPoint>(r.node)) {
        ++ctx_.stats.barrier_events;
      } else {
        const auto& l = std::get<UniformLoop>(r.node);
        const LoopBounds b = uniformBounds(l.lo, l.hi, l.step);
        for (std::int64_t c = b.lo; c < b.hi; c += b.step) {
          ctx_.uniforms[l.var.slot] = Value::i32(static_cast<std::int32_t>(c));
          schedule(l.body);
        }
      }
    }
  }

  LoopBounds uniformBounds(const LExpr& lo, const LExpr& hi, const LExpr& step) {
    setThread(0);
    span_ = lo.span;
    return bounds(lo, hi, step);
  }

  LoopBounds bounds(const LExpr& lo, const LExpr& hi, const LExpr& step) {
    LoopBounds b{eval(lo).toInt64(), eval(hi).toInt64(), eval(step).toInt64()};
    if (b.step <= 0 && b.lo < b.hi)
      throw Trap(TrapKind::TypeFault, fmt::format("loop step {} is not positive", b.step));
    return b;
  }

  void section(const RunSection& rs) {
    const Section& sec = k_.sections.at(rs.index);
    section_ = fmt::format("section {}", rs.index);
    ++ctx_.stats.sections_run;
    if (sec.shape == LoopShape::SingleThreadLoop) {
      const auto& phase = std::get<LanePhase>(sec.steps.at(0).node);
      for (std::uint64_t t = 0; t < block_size_; ++t) {
        setThread(t);
        stmts(phase.stmts);
      }
      ctx_.stats.thread_iterations += block_size_;
    } else {
      const std::uint64_t ws = k_.warp_size;
      const std::uint64_t warps = (block_size_ + ws - 1) / ws;
      for (std::uint64_t w = 0; w < warps; ++w) {
        ++ctx_.stats.warp_iterations;
        steps(sec.steps, w);
      }
      ctx_.stats.outer_trip_count = static_cast<std::uint32_t>(warps);
      ctx_.stats.inner_trip_count = static_cast<std::uint32_t>(ws);
    }
  }

  void steps(const std::vector<Step>& ss, std::uint64_t warp) {
    const std::uint64_t ws = k_.warp_size;
    for (const auto& st : ss) {
      if (const auto* p = std::get_if<LanePhase>(&st.node)) {
        for (std::uint64_t lane = 0; lane < ws; ++lane) {
          ++ctx_.stats.lane_iterations;
          const std::uint64_t t = warp * ws + lane;
          if (t >= block_size_) continue;
          setThread(t);
          stmts(p->stmts);
        }
      } else if (const auto* x = std::get_if<LaneExchange>(&st.node)) {
        exchange(*x, warp);
      } else {
        const auto& wl = std::get<WarpLoop>(st.node);
        const LoopBounds b = uniformBounds(wl.lo, wl.hi, wl.step);
        for (std::int64_t c = b.lo; c < b.hi; c += b.step) {
          ctx_.uniforms[wl.var.slot] = Value::i32(static_cast<std::int32_t>(c));
          steps(wl.body, warp);
        }
      }
    }
  }

  void exchange(const LaneExchange& x, std::uint64_t warp) {
    const std::uint64_t ws = k_.warp_size;
    const std::size_t ng = x.gathers.size();
    std::vector<std::vector<Value>> vals(ng, std::vector<Value>(ws));
    std::vector<std::vector<std::int64_t>> deltas(ng, std::vector<std::int64_t>(ws, 0));
    auto active = [&](std::uint64_t lane) { return warp * ws + lane < block_size_; };

    for (std::uint64_t lane = 0; lane < ws; ++lane) {
      ++ctx_.stats.lane_iterations;
      if (!active(lane)) continue;
      setThread(warp * ws + lane);
      for (std::size_t g = 0; g < ng; ++g) {
        span_ = x.gathers[g].value.span;
        vals[g][lane] = eval(x.gathers[g].value);
        if (x.gathers[g].delta) deltas[g][lane] = eval(*x.gathers[g].delta).toInt64();
      }
    }

    std::vector<std::vector<Value>> results(ng, std::vector<Value>(ws));
    for (std::size_t g = 0; g < ng; ++g) {
      const Intrinsic fn = x.gathers[g].fn;
      if (fn == Intrinsic::ShflDown) {
        for (std::uint64_t lane = 0; lane < ws; ++lane) {
          if (!active(lane)) continue;
          const std::int64_t d = deltas[g][lane];
          const std::uint64_t src = lane + static_cast<std::uint64_t>(d);
          const bool ok = d >= 0 && src < ws && active(src);
          results[g][lane] = ok ? vals[g][src] : vals[g][lane];
        }
      } else {
        bool any = false;
        bool all = true;
        for (std::uint64_t lane = 0; lane < ws; ++lane) {
          if (!active(lane)) continue;
          const bool v = vals[g][lane].truthy();
          any = any || v;
          all = all && v;
        }
        const Value r = Value::i32((fn == Intrinsic::VoteAny ? any : all) ? 1 : 0);
        for (std::uint64_t lane = 0; lane < ws; ++lane) results[g][lane] = r;
      }
    }

    lane_results_ = &results;
    for (std::uint64_t lane = 0; lane < ws; ++lane) {
      ++ctx_.stats.lane_iterations;
      if (!active(lane)) continue;
      setThread(warp * ws + lane);
      lane_ = lane;
      stmt(x.apply);
    }
    lane_results_ = nullptr;
  }

  // --- threads -------------------------------------------------------------

  void setThread(std::uint64_t t) {
    tid_ = t;
    thread_idx_ = ctx_.block_dim.delinearize(t);
  }

  Value& var(const VarLoc& v) {
    switch (v.cls) {
      case VarClass::Local: return locals_.at(v.slot);
      case VarClass::Expanded: return ctx_.expanded.at(v.slot).at(tid_);
      case VarClass::Uniform: return ctx_.uniforms.at(v.slot);
    }
    throw Error("bad variable class");
  }

  TypedBuffer& buffer(const ArrayRef& a) {
    switch (a.space) {
      case MemSpace::Global: return *globals_.at(a.id);
      case MemSpace::SharedStatic: return ctx_.static_shared.at(a.id);
      case MemSpace::SharedDynamic: return ctx_.dynamic_shared;
      case MemSpace::Unclassified: break;
    }
    throw Error(fmt::format("array '{}' is not memory-mapped", a.name));
  }

  std::size_t checkedIndex(const ArrayRef& a, const TypedBuffer& b, const Value& idx) {
    const std::int64_t i = idx.toInt64();
    if (!b.inBounds(i))
      throw Trap(TrapKind::OutOfBounds, fmt::format("index {} outside {}[0, {})", i, a.name, b.length()));
    return static_cast<std::size_t>(i);
  }

  void traceAccess(const ArrayRef& a, const TypedBuffer& b, std::size_t i, AccessKind kind) {
    if (ctx_.trace && a.space == MemSpace::Global) {
      const auto size = static_cast<std::uint32_t>(sizeOf(b.type()));
      ctx_.trace->record(MemEvent{kind, b.base() + i * size, size});
    }
  }

  // --- expressions ---------------------------------------------------------

  Value eval(const LExpr& e) {
    switch (e.node.index()) {
      case 0: return std::get<EConst>(e.node).value;
      case 1: return var(std::get<EVar>(e.node).loc);
      case 2: return std::get<Value>(args_[std::get<EParam>(e.node).index]);
      case 3: {
        const auto& b = std::get<EBuiltin>(e.node);
        switch (b.which) {
          case ast::Builtin::ThreadIdx: return Value::i32(static_cast<std::int32_t>(axisOf(thread_idx_, b.axis)));
          case ast::Builtin::BlockIdx: return Value::i32(static_cast<std::int32_t>(axisOf(ctx_.block_index, b.axis)));
          case ast::Builtin::BlockDim: return Value::i32(static_cast<std::int32_t>(axisOf(ctx_.block_dim, b.axis)));
          case ast::Builtin::GridDim: return Value::i32(static_cast<std::int32_t>(axisOf(ctx_.grid_dim, b.axis)));
        }
        break;
      }
      case 4: {
        const auto& l = std::get<ELoad>(e.node);
        const Value idx = eval(*l.index);
        TypedBuffer& b = buffer(l.array);
        const std::size_t i = checkedIndex(l.array, b, idx);
        traceAccess(l.array, b, i, AccessKind::Read);
        return b.load(i);
      }
      case 5: {
        const auto& u = std::get<EUnary>(e.node);
        return applyUnary(u.op, eval(*u.operand));
      }
      case 6: {
        const auto& b = std::get<EBinary>(e.node);
        if (isLogical(b.op)) {
          const bool l = eval(*b.lhs).truthy();
          if (b.op == BinOp::LogAnd && !l) return Value::i32(0);
          if (b.op == BinOp::LogOr && l) return Value::i32(1);
          return Value::i32(eval(*b.rhs).truthy() ? 1 : 0);
        }
        const Value l = eval(*b.lhs);
        return applyBinary(b.op, l, eval(*b.rhs));
      }
      case 7: {
        const auto& c = std::get<ECall>(e.node);
        std::vector<Value> vs;
        vs.reserve(c.args.size());
        for (const auto& a : c.args) vs.push_back(eval(a));
        return applyMath(c.fn, vs);
      }
      case 8: return eval(*std::get<ECast>(e.node).operand).convert(e.type);
      case 9: {
        if (!lane_results_) throw Error("lane read outside a lane exchange");
        return (*lane_results_)[std::get<ELaneRead>(e.node).index][lane_];
      }
    }
    throw Error("bad expression node");
  }

  // --- statements ----------------------------------------------------------

  void stmts(const std::vector<LStmt>& ss) {
    for (const auto& s : ss) stmt(s);
  }

  void stmt(const LStmt& s) {
    span_ = s.span;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, SSet>) {
            var(n.var) = eval(n.value);
          } else if constexpr (std::is_same_v<T, SStore>) {
            const Value idx = eval(n.index);
            const Value v = eval(n.value);
            span_ = s.span;
            TypedBuffer& b = buffer(n.array);
            const std::size_t i = checkedIndex(n.array, b, idx);
            traceAccess(n.array, b, i, AccessKind::Write);
            b.store(i, v);
          } else if constexpr (std::is_same_v<T, SIf>) {
            if (eval(n.cond).truthy()) stmts(n.then_body);
            else stmts(n.else_body);
          } else if constexpr (std::is_same_v<T, SFor>) {
            const LoopBounds b = bounds(n.lo, n.hi, n.step);
            for (std::int64_t c = b.lo; c < b.hi; c += b.step) {
              var(n.var) = Value::i32(static_cast<std::int32_t>(c));
              stmts(n.body);
            }
          } else if constexpr (std::is_same_v<T, SAtomic>) {
            const Value idx = eval(n.index);
            const std::optional<Value> cmp = n.compare ? std::optional(eval(*n.compare)) : std::nullopt;
            const Value operand = eval(n.operand);
            span_ = s.span;
            TypedBuffer& b = buffer(n.array);
            const std::size_t i = checkedIndex(n.array, b, idx);
            traceAccess(n.array, b, i, AccessKind::Read);
            const Value old = n.kind == AtomicKind::Add ? b.atomicAdd(i, operand) : b.atomicCas(i, *cmp, operand);
            traceAccess(n.array, b, i, AccessKind::Write);
            if (n.result) var(n.result->var) = old.convert(n.result->type);
          }
        },
        s.node);
  }

  const MpmdKernel& k_;
  BlockContext& ctx_;
  std::span<const ArgValue> args_;
  std::uint64_t block_size_;
  std::vector<std::shared_ptr<TypedBuffer>> globals_;
  std::vector<Value> locals_;
  const std::vector<std::vector<Value>>* lane_results_ = nullptr;
  std::uint64_t lane_ = 0;
  std::uint64_t tid_ = 0;
  Dim3 thread_idx_{0, 0, 0};
  Span span_;
  std::string section_;
};

}  // namespace

void runBlock(const mpmd::MpmdKernel& k, BlockContext& ctx, std::span<const ArgValue> args, const DeviceArena& arena) {
  BlockRunner(k, ctx, args, arena).run();
}

BlockStats runAllBlocks(const mpmd::MpmdKernel& k, const LaunchShape& shape, std::span<const ArgValue> args,
                        const DeviceArena& arena, TraceSink* trace) {
  if (!shape.grid.valid() || !shape.block.valid()) throw Error("launch dimensions must be positive");
  BlockStats total;
  const std::uint64_t n = shape.grid.volume();
  for (std::uint64_t b = 0; b < n; ++b) {
    BlockContext ctx(k, shape, shape.grid.delinearize(b));
    ctx.trace = trace;
    runBlock(k, ctx, args, arena);
    total += ctx.stats;
  }
  return total;
}

MemoryTrace traceAccesses(const mpmd::MpmdKernel& k, const LaunchShape& shape, std::span<const ArgValue> args,
                          const DeviceArena& arena) {
  const auto copy = arena.clone();
  MemoryTrace trace;
  runAllBlocks(k, shape, args, *copy, &trace);
  return trace;
}

}  // namespace blockfuse
