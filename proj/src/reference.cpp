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

// Per-thread reference interpreter over the syntax tree.

#include <map>

#include <fmt/format.h>

#include "blockfuse/executor.hpp"

namespace blockfuse {

namespace {

using namespace ast;

// Shared array storage for one block.
struct SharedArray {
  ScalarType type;
  std::vector<Value> data;
};

class Thread {
 public:
  std::uint64_t tid = 0;
  Dim3 idx{0, 0, 0};
  std::vector<std::map<std::string, Value, std::less<>>> scopes;

  Value* find(std::string_view name) {
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      auto f = it->find(name);
      if (f != it->end()) return &f->second;
    }
    return nullptr;
  }
  void define(const std::string& name, Value v) { scopes.back()[name] = v; }
};

class ReferenceBlock {
 public:
  ReferenceBlock(const KernelProgram& k, const LaunchShape& shape, std::span<const ArgValue> args,
                 const DeviceArena& arena, std::uint32_t warp_size, Dim3 block_index)
      : k_(k), shape_(shape), warp_size_(warp_size), block_index_(block_index) {
    for (std::size_t i = 0; i < k.params.size(); ++i) {
      const Param& p = k.params[i];
      if (p.global) globals_[p.name] = arena.get(std::get<BufferHandle>(args[i]));
      else scalars_[p.name] = std::get<Value>(args[i]);
    }
    for (const auto& d : k.shared) {
      const std::size_t n = d.isDynamic() ? shape.dynamic_shared_bytes / sizeOf(d.type) : *d.length;
      shared_[d.name] = SharedArray{d.type, std::vector<Value>(n, Value::zero(d.type))};
    }
    const std::uint64_t n = shape.block.volume();
    threads_.resize(n);
    for (std::uint64_t t = 0; t < n; ++t) {
      threads_[t].tid = t;
      threads_[t].idx = shape.block.delinearize(t);
      threads_[t].scopes.emplace_back();
    }
  }

  std::uint64_t run() {
    try {
      lockstep(k_.body);
    } catch (const Trap& t) {
      if (t.location()) throw;
      throw t.located(TrapLocation{k_.name, "reference", current_, span_});
    }
    return barriers_;
  }

 private:
  // --- lockstep phases -----------------------------------------------------

  void pushAll() {
    for (auto& t : threads_) t.scopes.emplace_back();
  }
  void popAll() {
    for (auto& t : threads_) t.scopes.pop_back();
  }

  static bool needsLockstep(const For& f) { return containsBarrier(f.body) || containsWarpIntrinsic(f.body); }

  void lockstep(const Block& b) {
    pushAll();
    for (const auto& s : b.stmts) {
      span_ = s.span;
      if (std::holds_alternative<Barrier>(s.node)) {
        ++barriers_;
      } else if (const auto* f = std::get_if<For>(&s.node); f && needsLockstep(*f)) {
        lockstepFor(*f, s.span);
      } else if (hasDirectWarpIntrinsic(s)) {
        warpStatement(s);
      } else {
        for (auto& t : threads_) exec(s, t);
      }
    }
    popAll();
  }

  void lockstepFor(const For& f, Span at) {
    std::optional<std::array<std::int64_t, 3>> common;
    for (auto& t : threads_) {
      current_ = t.tid;
      const std::array<std::int64_t, 3> b{loopValue(f.lo, t), loopValue(f.hi, t), loopValue(f.step, t)};
      if (common && *common != b)
        throw Trap(TrapKind::NonUniformTrip,
                   fmt::format("threads disagree on the bounds of loop '{}'", f.counter));
      common = b;
    }
    span_ = at;
    const auto [lo, hi, step] = *common;
    if (step <= 0 && lo < hi) throw Trap(TrapKind::TypeFault, fmt::format("loop step {} is not positive", step));
    for (std::int64_t c = lo; c < hi; c += step) {
      pushAll();
      for (auto& t : threads_) t.define(f.counter, Value::i32(static_cast<std::int32_t>(c)));
      lockstep(f.body);
      popAll();
    }
  }

  static void collectWarpCalls(const Expr& e, std::vector<const Call*>& out) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Call>) {
            if (isWarpIntrinsic(n.fn)) out.push_back(&n);
            else
              for (const auto& a : n.args) collectWarpCalls(a, out);
          } else if constexpr (std::is_same_v<T, Index>) {
            collectWarpCalls(*n.index, out);
          } else if constexpr (std::is_same_v<T, Unary> || std::is_same_v<T, Cast>) {
            collectWarpCalls(*n.operand, out);
          } else if constexpr (std::is_same_v<T, Binary>) {
            collectWarpCalls(*n.lhs, out);
            collectWarpCalls(*n.rhs, out);
          }
        },
        e.node);
  }

  static std::vector<const Call*> warpCalls(const Stmt& s) {
    std::vector<const Call*> out;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, LocalDecl>) {
            collectWarpCalls(n.init, out);
          } else if constexpr (std::is_same_v<T, Assign>) {
            if (n.target.index) collectWarpCalls(**n.target.index, out);
            collectWarpCalls(n.value, out);
          } else if constexpr (std::is_same_v<T, Atomic>) {
            if (n.target.index) collectWarpCalls(**n.target.index, out);
            if (n.compare) collectWarpCalls(*n.compare, out);
            collectWarpCalls(n.operand, out);
          }
        },
        s.node);
    return out;
  }

  // Every lane of every warp evaluates the intrinsic operands, the results
  // are exchanged, then the statement runs per thread.
  void warpStatement(const Stmt& s) {
    const auto calls = warpCalls(s);
    const std::uint64_t n = threads_.size();
    const std::uint64_t ws = warp_size_;
    for (const Call* c : calls) {
      std::vector<Value> value(n);
      std::vector<std::int64_t> delta(n, 0);
      for (auto& t : threads_) {
        current_ = t.tid;
        value[t.tid] = eval(c->args.at(0), t);
        if (c->fn == Intrinsic::ShflDown) delta[t.tid] = eval(c->args.at(1), t).convert(ScalarType::I32).toInt64();
      }
      std::vector<Value> result(n);
      for (std::uint64_t base = 0; base < n; base += ws) {
        const std::uint64_t end = std::min(n, base + ws);
        if (c->fn == Intrinsic::ShflDown) {
          for (std::uint64_t t = base; t < end; ++t) {
            const std::int64_t d = delta[t];
            const bool inside = d >= 0 && (t - base) + static_cast<std::uint64_t>(d) < ws &&
                                t + static_cast<std::uint64_t>(d) < end;
            result[t] = inside ? value[t + static_cast<std::uint64_t>(d)] : value[t];
          }
        } else {
          std::uint64_t yes = 0;
          for (std::uint64_t t = base; t < end; ++t) yes += value[t].truthy() ? 1 : 0;
          const bool r = c->fn == Intrinsic::VoteAny ? yes > 0 : yes == end - base;
          for (std::uint64_t t = base; t < end; ++t) result[t] = Value::i32(r ? 1 : 0);
        }
      }
      exchanged_[c] = std::move(result);
    }
    for (auto& t : threads_) exec(s, t);
    exchanged_.clear();
  }

  // --- per-thread execution ----------------------------------------------

  std::int64_t loopValue(const Expr& e, Thread& t) { return eval(e, t).convert(ScalarType::I32).toInt64(); }

  void block(const Block& b, Thread& t) {
    t.scopes.emplace_back();
    for (const auto& s : b.stmts) exec(s, t);
    t.scopes.pop_back();
  }

  struct Element {
    TypedBuffer* global = nullptr;
    SharedArray* shared = nullptr;
    std::size_t index = 0;
    ScalarType type() const { return global ? global->type() : shared->type; }
  };

  Element element(const std::string& name, const Expr& index, Thread& t) {
    const std::int64_t i = eval(index, t).toInt64();
    Element el;
    std::size_t length = 0;
    if (auto g = globals_.find(name); g != globals_.end()) {
      el.global = g->second.get();
      length = el.global->length();
    } else if (auto s = shared_.find(name); s != shared_.end()) {
      el.shared = &s->second;
      length = el.shared->data.size();
    } else {
      throw Error(fmt::format("unknown array '{}'", name));
    }
    if (i < 0 || static_cast<std::uint64_t>(i) >= length)
      throw Trap(TrapKind::OutOfBounds, fmt::format("index {} outside {}[0, {})", i, name, length));
    el.index = static_cast<std::size_t>(i);
    return el;
  }

  Value read(const Element& el) { return el.global ? el.global->load(el.index) : el.shared->data[el.index]; }

  void write(const Element& el, const Value& v) {
    if (el.global) el.global->store(el.index, v);
    else el.shared->data[el.index] = v.convert(el.shared->type);
  }

  void exec(const Stmt& s, Thread& t) {
    current_ = t.tid;
    span_ = s.span;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, LocalDecl>) {
            t.define(n.name, eval(n.init, t).convert(n.type));
          } else if constexpr (std::is_same_v<T, Assign>) {
            if (n.target.index) {
              const Element el = element(n.target.name, **n.target.index, t);
              write(el, eval(n.value, t));
            } else {
              Value* slot = t.find(n.target.name);
              if (!slot) throw Error(fmt::format("assignment to undeclared '{}'", n.target.name));
              *slot = eval(n.value, t).convert(slot->type());
            }
          } else if constexpr (std::is_same_v<T, If>) {
            if (eval(n.cond, t).truthy()) block(n.then_block, t);
            else if (n.else_block) block(*n.else_block, t);
          } else if constexpr (std::is_same_v<T, For>) {
            const std::int64_t lo = loopValue(n.lo, t);
            const std::int64_t hi = loopValue(n.hi, t);
            const std::int64_t step = loopValue(n.step, t);
            if (step <= 0 && lo < hi) throw Trap(TrapKind::TypeFault, fmt::format("loop step {} is not positive", step));
            for (std::int64_t c = lo; c < hi; c += step) {
              t.scopes.emplace_back();
              t.define(n.counter, Value::i32(static_cast<std::int32_t>(c)));
              block(n.body, t);
              t.scopes.pop_back();
            }
          } else if constexpr (std::is_same_v<T, Atomic>) {
            const Element el = element(n.target.name, **n.target.index, t);
            const ScalarType et = el.type();
            const Value cmp = n.compare ? eval(*n.compare, t).convert(et) : Value::zero(et);
            const Value operand = eval(n.operand, t).convert(et);
            const Value old = read(el);
            if (n.kind == AtomicKind::Add) {
              write(el, applyBinary(BinOp::Add, old, operand));
            } else {
              if (isFloat(et)) throw Trap(TrapKind::TypeFault, "atomic_cas on a floating-point array");
              if (old == cmp) write(el, operand);
            }
            if (n.result) t.define(n.result->name, old.convert(n.result->type));
          } else if constexpr (std::is_same_v<T, Barrier>) {
            throw Error("barrier reached outside a lockstep phase");
          }
        },
        s.node);
  }

  Value eval(const Expr& e, Thread& t) {
    return std::visit(
        [&](const auto& n) -> Value {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, IntLit>) {
            if (n.value >= INT32_MIN && n.value <= INT32_MAX) return Value::i32(static_cast<std::int32_t>(n.value));
            return Value::i64(n.value);
          } else if constexpr (std::is_same_v<T, FloatLit>) {
            return n.single ? Value::f32(static_cast<float>(n.value)) : Value::f64(n.value);
          } else if constexpr (std::is_same_v<T, VarRef>) {
            if (const Value* v = t.find(n.name)) return *v;
            if (auto s = scalars_.find(n.name); s != scalars_.end()) return s->second;
            throw Error(fmt::format("undefined '{}'", n.name));
          } else if constexpr (std::is_same_v<T, BuiltinRef>) {
            const Dim3& d = n.which == Builtin::ThreadIdx  ? t.idx
                            : n.which == Builtin::BlockIdx ? block_index_
                            : n.which == Builtin::BlockDim ? shape_.block
                                                           : shape_.grid;
            const std::uint32_t v = n.axis == Axis::X ? d.x : n.axis == Axis::Y ? d.y : d.z;
            return Value::i32(static_cast<std::int32_t>(v));
          } else if constexpr (std::is_same_v<T, Index>) {
            return read(element(n.array, *n.index, t));
          } else if constexpr (std::is_same_v<T, Unary>) {
            return applyUnary(n.op, eval(*n.operand, t));
          } else if constexpr (std::is_same_v<T, Binary>) {
            if (n.op == BinOp::LogAnd) {
              if (!eval(*n.lhs, t).truthy()) return Value::i32(0);
              return Value::i32(eval(*n.rhs, t).truthy() ? 1 : 0);
            }
            if (n.op == BinOp::LogOr) {
              if (eval(*n.lhs, t).truthy()) return Value::i32(1);
              return Value::i32(eval(*n.rhs, t).truthy() ? 1 : 0);
            }
            const Value l = eval(*n.lhs, t);
            return applyBinary(n.op, l, eval(*n.rhs, t));
          } else if constexpr (std::is_same_v<T, Cast>) {
            return eval(*n.operand, t).convert(n.to);
          } else if constexpr (std::is_same_v<T, Call>) {
            if (isWarpIntrinsic(n.fn)) {
              auto it = exchanged_.find(&n);
              if (it == exchanged_.end()) throw Error("warp intrinsic evaluated outside a warp statement");
              return it->second[t.tid];
            }
            std::vector<Value> vs;
            for (const auto& a : n.args) vs.push_back(eval(a, t));
            return applyMath(n.fn, vs);
          }
        },
        e.node);
  }

  const KernelProgram& k_;
  const LaunchShape& shape_;
  std::uint32_t warp_size_;
  Dim3 block_index_;
  std::map<std::string, std::shared_ptr<TypedBuffer>, std::less<>> globals_;
  std::map<std::string, Value, std::less<>> scalars_;
  std::map<std::string, SharedArray, std::less<>> shared_;
  std::vector<Thread> threads_;
  std::map<const Call*, std::vector<Value>> exchanged_;
  std::uint64_t barriers_ = 0;
  std::uint64_t current_ = 0;
  Span span_;
};

}  // namespace

ReferenceStats runReference(const ast::KernelProgram& k, const LaunchShape& shape, std::span<const ArgValue> args,
                            const DeviceArena& arena, std::uint32_t warp_size) {
  if (!shape.grid.valid() || !shape.block.valid()) throw Error("launch dimensions must be positive");
  if (args.size() != k.params.size())
    throw Error(fmt::format("kernel '{}' expects {} arguments, got {}", k.name, k.params.size(), args.size()));
  ReferenceStats stats;
  const std::uint64_t n = shape.grid.volume();
  for (std::uint64_t b = 0; b < n; ++b) {
    ReferenceBlock blk(k, shape, args, arena, warp_size, shape.grid.delinearize(b));
    stats.barrier_events += blk.run();
    ++stats.blocks;
  }
  return stats;
}

}  // namespace blockfuse
