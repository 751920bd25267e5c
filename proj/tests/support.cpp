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

#include "support.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "blockfuse/parser.hpp"

#ifndef BLOCKFUSE_CORPUS_DIR
#error "BLOCKFUSE_CORPUS_DIR must be defined"
#endif

namespace blockfuse::testing {

std::filesystem::path corpusDir() { return BLOCKFUSE_CORPUS_DIR; }

std::string readText(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ast::KernelProgram corpusKernel(const std::string& name) { return parse(readText(corpusDir() / (name + ".kn"))); }

BufferHandle upload(DeviceArena& arena, ScalarType type, const std::vector<Value>& values) {
  const BufferHandle h = arena.alloc(type, values.size());
  const auto buf = arena.get(h);
  for (std::size_t i = 0; i < values.size(); ++i) buf->store(i, values[i]);
  return h;
}

std::vector<Value> ints(std::initializer_list<std::int64_t> v, ScalarType t) {
  std::vector<Value> out;
  for (auto x : v) out.push_back(Value::i64(x).convert(t));
  return out;
}

std::vector<std::int64_t> asInts(const std::vector<Value>& v) {
  std::vector<std::int64_t> out;
  for (const auto& x : v) out.push_back(x.toInt64());
  return out;
}

std::vector<double> asDoubles(const std::vector<Value>& v) {
  std::vector<double> out;
  for (const auto& x : v) out.push_back(x.toDouble());
  return out;
}

std::vector<Value> randomValues(std::mt19937_64& rng, ScalarType t, std::size_t n, std::int64_t int_range) {
  std::vector<Value> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (isInteger(t)) out.push_back(Value::i64(static_cast<std::int64_t>(rng() % int_range)).convert(t));
    else out.push_back(Value::f64(static_cast<double>(rng() >> 11) * 0x1.0p-53).convert(t));
  }
  return out;
}

runtime::LaunchRecord runOnRuntime(const ast::KernelProgram& k, const LaunchShape& shape,
                                   const std::vector<ArgValue>& args, const DeviceArena& arena,
                                   const runtime::RuntimeOptions& opts, bool warp_mode, std::uint32_t warp_size) {
  auto kernel = std::make_shared<const mpmd::MpmdKernel>(mpmd::compile(k, {warp_mode, warp_size}));
  runtime::Runtime rt(opts);
  const auto id = rt.launch(kernel, shape, PackedArgs::pack(k.params, args), arena);
  rt.deviceSynchronize();
  return rt.record(id);
}

namespace {

class KernelGen {
 public:
  KernelGen(std::mt19937_64& rng, const KernelGenOptions& o) : rng_(rng), o_(o) {}

  std::string run(const std::string& name) {
    out_ = fmt::format(
        "kernel {}(in: global i32[], out: global i32[], fout: global f32[], acc: global i32[], scale: i32) {{\n"
        "  extern shared i32 s[];\n"
        "  let t: i32 = (threadIdx.z * blockDim.y + threadIdx.y) * blockDim.x + threadIdx.x;\n"
        "  let bsz: i32 = blockDim.x * blockDim.y * blockDim.z;\n"
        "  let gid: i32 = ((blockIdx.z * gridDim.y + blockIdx.y) * gridDim.x + blockIdx.x) * bsz + t;\n"
        "  let v0: i32 = in[gid];\n"
        "  let v1: i32 = t * scale + blockIdx.x;\n",
        name);
    vars_ = {"v0", "v1"};
    for (int i = 0; i < o_.statements; ++i) topStatement();
    std::string mix = "v0";
    for (std::size_t i = 1; i < vars_.size(); ++i) mix = fmt::format("({} ^ {})", mix, vars_[i]);
    out_ += fmt::format("  out[gid] = {};\n", mix);
    out_ += fmt::format("  fout[gid] = f32({}) * 0.5f + f32(v0);\n", vars_.back());
    out_ += "}\n";
    return out_;
  }

 private:
  int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  const std::string& var() { return vars_[pick(static_cast<int>(vars_.size()))]; }
  std::string fresh(char prefix) { return fmt::format("{}{}", prefix, next_++); }

  std::string expr(int depth) {
    if (depth <= 0 || pick(4) == 0) {
      switch (pick(5)) {
        case 0: return std::to_string(pick(100));
        case 1: return "t";
        case 2: return "scale";
        case 3: return "blockIdx.x";
        default: return var();
      }
    }
    static constexpr const char* kOps[] = {"+", "-", "*", "&", "|", "^"};
    switch (pick(9)) {
      case 0: return fmt::format("({} % {})", expr(depth - 1), 1 + pick(17));
      case 1: return fmt::format("({} / {})", expr(depth - 1), 1 + pick(9));
      case 2: return fmt::format("({} << {})", expr(depth - 1), pick(8));
      case 3: return fmt::format("({} >> {})", expr(depth - 1), pick(8));
      case 4: return fmt::format("min({}, {})", expr(depth - 1), expr(depth - 1));
      case 5: return fmt::format("max({}, {})", expr(depth - 1), expr(depth - 1));
      case 6: return fmt::format("abs({})", expr(depth - 1));
      case 7: return fmt::format("({} < {})", expr(depth - 1), expr(depth - 1));
      default: return fmt::format("({} {} {})", expr(depth - 1), kOps[pick(6)], expr(depth - 1));
    }
  }

  // Statements legal anywhere, including divergent code.
  std::string simple(const std::string& indent) {
    if (pick(3) == 0) return fmt::format("{}let {}: i32 = {};\n", indent, fresh('w'), expr(2));
    return fmt::format("{}{} = {};\n", indent, var(), expr(3));
  }

  void topStatement() {
    const int kinds = o_.barriers ? 9 : 6;
    const int k = pick(kinds + (o_.warp_intrinsics ? 3 : 0));
    if (k >= kinds) {
      warpStatement(k - kinds);
      return;
    }
    switch (k) {
      case 0:
      case 1: {
        const std::string v = fresh('v');
        out_ += fmt::format("  let {}: i32 = {};\n", v, expr(3));
        vars_.push_back(v);
        break;
      }
      case 2: out_ += fmt::format("  {} = {};\n", var(), expr(3)); break;
      case 3:
        out_ += fmt::format("  if ({} < {}) {{\n{}{}  }} else {{\n{}  }}\n", expr(2), expr(2), simple("    "),
                            simple("    "), simple("    "));
        break;
      case 4: {
        const std::string q = fresh('q');
        out_ += fmt::format("  for ({0} = 0; {0} < (t % {1}); {0} += 1) {{\n    {2} = {2} + {0} * {3};\n{4}  }}\n", q,
                            1 + pick(4), var(), 1 + pick(5), simple("    "));
        break;
      }
      case 5: out_ += fmt::format("  atomic_add(acc[({} & 7)], {});\n", var(), 1 + pick(3)); break;
      case 6:
      case 7:
        out_ += fmt::format("  s[t] = {};\n  barrier;\n  {} = s[(t + {}) % bsz];\n  barrier;\n", expr(2), var(),
                            pick(40));
        break;
      default: {
        const std::string u = fresh('u');
        const std::string& a = var();
        const std::string& b = var();
        out_ += fmt::format(
            "  for ({0} = 0; {0} < {1}; {0} += 1) {{\n    s[t] = {2} + {0};\n    barrier;\n"
            "    {3} = {3} ^ s[(t + {0} + 1) % bsz];\n    barrier;\n  }}\n",
            u, 1 + pick(3), a, b);
        break;
      }
    }
  }

  void warpStatement(int k) {
    switch (k) {
      case 0: out_ += fmt::format("  {} = {} + shfl_down({}, {});\n", var(), var(), expr(2), pick(9)); break;
      case 1:
        out_ += fmt::format("  {} = {} + {}({} > {});\n", var(), var(), pick(2) ? "vote_any" : "vote_all", expr(2),
                            pick(100));
        break;
      default: {
        const std::string u = fresh('u');
        const std::string& a = var();
        out_ += fmt::format("  for ({0} = 0; {0} < {1}; {0} += 1) {{\n    {2} = {2} + shfl_down({2}, 1 << {0});\n  }}\n",
                            u, 1 + pick(4), a);
        break;
      }
    }
  }

  std::mt19937_64& rng_;
  KernelGenOptions o_;
  std::string out_;
  std::vector<std::string> vars_;
  int next_ = 2;
};

class SyntaxGen {
 public:
  explicit SyntaxGen(std::mt19937_64& rng) : rng_(rng) {}

  std::string run() {
    std::string s = "kernel k";
    s += std::to_string(pick(1000));
    s += "(";
    const int params = pick(4);
    for (int i = 0; i < params; ++i) {
      if (i) s += ", ";
      s += fmt::format("p{}: {}", i, pick(2) ? "global " + scalar() + "[]" : scalar());
    }
    s += ") {\n";
    if (pick(2)) s += fmt::format("  shared {} sh[{}];\n", scalar(), 1 + pick(64));
    if (pick(2)) s += fmt::format("  extern shared {} dyn[];\n", scalar());
    block(s, 2, "  ");
    s += "}\n";
    return s;
  }

 private:
  int pick(int n) { return static_cast<int>(rng_() % static_cast<std::uint64_t>(n)); }
  std::string scalar() {
    static constexpr const char* kTypes[] = {"i32", "i64", "f32", "f64"};
    return kTypes[pick(4)];
  }
  std::string name() { return fmt::format("x{}", pick(6)); }

  std::string expr(int depth) {
    if (depth <= 0 || pick(3) == 0) {
      switch (pick(6)) {
        case 0: return std::to_string(pick(100000));
        case 1: return fmt::format("{}.{}{}", pick(100), pick(1000), pick(2) ? "f" : "");
        case 2: {
          static constexpr const char* kB[] = {"threadIdx", "blockIdx", "blockDim", "gridDim"};
          static constexpr const char* kA[] = {"x", "y", "z"};
          return fmt::format("{}.{}", kB[pick(4)], kA[pick(3)]);
        }
        default: return name();
      }
    }
    static constexpr const char* kOps[] = {"+", "-", "*", "/", "%", "<<", ">>", "&", "|", "^",
                                           "<", "<=", ">", ">=", "==", "!=", "&&", "||"};
    static constexpr const char* kUn[] = {"-", "!", "~"};
    static constexpr const char* kFn[] = {"min", "max", "abs", "sqrt", "shfl_down", "vote_any", "vote_all"};
    switch (pick(6)) {
      case 0: return fmt::format("{}{}", kUn[pick(3)], expr(depth - 1));
      case 1: return fmt::format("{}[{}]", name(), expr(depth - 1));
      case 2: {
        const int f = pick(7);
        if (f == 0 || f == 1 || f == 4)
          return fmt::format("{}({}, {})", kFn[f], expr(depth - 1), expr(depth - 1));
        return fmt::format("{}({})", kFn[f], expr(depth - 1));
      }
      case 3: return fmt::format("{}({})", scalar(), expr(depth - 1));
      default: return fmt::format("({} {} {})", expr(depth - 1), kOps[pick(18)], expr(depth - 1));
    }
  }

  std::string lvalue() { return pick(2) ? name() : fmt::format("{}[{}]", name(), expr(1)); }

  void block(std::string& s, int depth, const std::string& ind) {
    const int n = pick(5);
    for (int i = 0; i < n; ++i) stmt(s, depth, ind);
  }

  void stmt(std::string& s, int depth, const std::string& ind) {
    switch (pick(depth > 0 ? 9 : 6)) {
      case 0: s += fmt::format("{}let {}: {} = {};\n", ind, name(), scalar(), expr(3)); break;
      case 1: s += fmt::format("{}{} = {};\n", ind, lvalue(), expr(3)); break;
      case 2: s += ind + "barrier;\n"; break;
      case 3: s += fmt::format("{}atomic_add({}[{}], {});\n", ind, name(), expr(1), expr(2)); break;
      case 4:
        s += fmt::format("{}let {}: {} = atomic_cas({}[{}], {}, {});\n", ind, name(), scalar(), name(), expr(1),
                         expr(1), expr(1));
        break;
      case 5: s += fmt::format("{}let {}: {} = atomic_add({}[{}], {});\n", ind, name(), scalar(), name(), expr(1), expr(1)); break;
      case 6:
      case 7: {
        s += fmt::format("{}if ({}) {{\n", ind, expr(2));
        block(s, depth - 1, ind + "  ");
        if (pick(2)) {
          s += ind + "} else {\n";
          block(s, depth - 1, ind + "  ");
        }
        s += ind + "}\n";
        break;
      }
      default: {
        const std::string c = name();
        s += fmt::format("{}for ({} = {}; {} < {}; {} += {}) {{\n", ind, c, expr(1), c, expr(2), c, expr(1));
        block(s, depth - 1, ind + "  ");
        s += ind + "}\n";
        break;
      }
    }
  }

  std::mt19937_64& rng_;
};

}  // namespace

std::string randomKernel(std::mt19937_64& rng, const std::string& name, const KernelGenOptions& opts) {
  return KernelGen(rng, opts).run(name);
}

std::string randomSyntax(std::mt19937_64& rng) { return SyntaxGen(rng).run(); }

std::vector<ast::Param> randomSignature(std::mt19937_64& rng, std::size_t n) {
  static constexpr ScalarType kTypes[] = {ScalarType::I32, ScalarType::I64, ScalarType::F32, ScalarType::F64};
  std::vector<ast::Param> sig;
  for (std::size_t i = 0; i < n; ++i) {
    ast::Param p;
    p.name = fmt::format("p{}", i);
    p.type = kTypes[rng() % 4];
    p.global = rng() % 2 == 0;
    sig.push_back(p);
  }
  return sig;
}

std::vector<ArgValue> randomArgs(std::mt19937_64& rng, const std::vector<ast::Param>& sig) {
  std::vector<ArgValue> args;
  for (const auto& p : sig) {
    if (p.global) {
      args.emplace_back(BufferHandle{1 + rng() % 1000000});
      continue;
    }
    const std::uint64_t bits = rng();
    args.emplace_back(Value::fromBits(p.type, sizeOf(p.type) == 4 ? bits & 0xffffffffu : bits));
  }
  return args;
}

std::string hostKernelSource() {
  return R"(kernel copy(src: global i32[], dst: global i32[], n: i32) {
  let g: i32 = blockIdx.x * blockDim.x + threadIdx.x;
  if (g < n) { dst[g] = src[g] * 3 + 1; }
}
kernel inc(a: global i32[], n: i32) {
  let g: i32 = blockIdx.x * blockDim.x + threadIdx.x;
  if (g < n) { a[g] = a[g] + g; }
}
kernel count(a: global i32[], c: global i32[], n: i32) {
  let g: i32 = blockIdx.x * blockDim.x + threadIdx.x;
  if (g < n) { atomic_add(c[a[g] & 63], 1); }
}
kernel fill(a: global i32[], v: i32, n: i32) {
  let g: i32 = blockIdx.x * blockDim.x + threadIdx.x;
  if (g < n) { a[g] = v + g; }
}
)";
}

HostScript randomHostScript(std::mt19937_64& rng, const HostScriptOptions& opts) {
  constexpr int kLen = 64;
  HostScript s;
  auto line = [&](std::string text, ScriptAccess a) {
    s.text += text + "\n";
    s.ops.push_back(std::move(a));
  };
  auto buf = [](std::size_t i) { return fmt::format("b{}", i); };
  const std::size_t nbuf = std::max<std::size_t>(opts.buffers, 2);
  for (std::size_t i = 0; i < nbuf; ++i) line(fmt::format("alloc {} i32 {}", buf(i), kLen), {{}, {buf(i)}});
  for (std::size_t i = 0; i < nbuf; ++i)
    line(fmt::format("upload {} fill:rand:{}", buf(i), rng() % 1000), {{}, {buf(i)}});
  const std::string shape = "grid 8 1 1 block 8 1 1 shmem 0";
  auto launch = [&](const std::string& k, const std::vector<std::string>& rd, const std::vector<std::string>& wr,
                    const std::string& args) {
    ScriptAccess a{{rd.begin(), rd.end()}, {wr.begin(), wr.end()}, true};
    line(fmt::format("launch {} {} args {}", k, shape, args), std::move(a));
  };

  if (opts.disjoint) {
    // b0 is a shared read-only input; every launch writes its own buffer.
    std::size_t next = 1;
    for (std::size_t i = 0; i < opts.ops && next < nbuf; ++i) {
      const std::string out = buf(next++);
      switch (rng() % 3) {
        case 0: launch("copy", {"b0"}, {out}, fmt::format("b0 {} {}", out, kLen)); break;
        case 1: launch("count", {"b0"}, {out}, fmt::format("b0 {} {}", out, kLen)); break;
        default: launch("fill", {}, {out}, fmt::format("{} {} {}", out, rng() % 100, kLen)); break;
      }
    }
    for (std::size_t i = next; i < nbuf; ++i) line(fmt::format("download {} {}.bin", buf(i), buf(i)), {{buf(i)}, {}});
    return s;
  }

  for (std::size_t i = 0; i < opts.ops; ++i) {
    const std::size_t x = rng() % nbuf;
    std::size_t y = rng() % (nbuf - 1);
    if (y >= x) ++y;
    const std::string bx = buf(x), by = buf(y);
    switch (rng() % 8) {
      case 0:
      case 1: launch("copy", {bx}, {by}, fmt::format("{} {} {}", bx, by, kLen)); break;
      case 2: launch("inc", {bx}, {bx}, fmt::format("{} {}", bx, kLen)); break;
      case 3: launch("count", {bx}, {by}, fmt::format("{} {} {}", bx, by, kLen)); break;
      case 4: launch("fill", {}, {bx}, fmt::format("{} {} {}", bx, rng() % 100, kLen)); break;
      case 5: line(fmt::format("download {} {}.bin", bx, bx), {{bx}, {}}); break;
      case 6: line(fmt::format("upload {} fill:rand:{}", bx, rng() % 1000), {{}, {bx}}); break;
      default:
        if (rng() % 3 == 0) line("sync", {{}, {}, false, true});
        else line(fmt::format("download {} {}.bin", bx, bx), {{bx}, {}});
        break;
    }
  }
  for (std::size_t i = 0; i < nbuf; ++i) line(fmt::format("download {} {}.bin", buf(i), buf(i)), {{buf(i)}, {}});
  return s;
}

bool sameBits(const std::vector<Value>& a, const std::vector<Value>& b) { return a == b; }

}  // namespace blockfuse::testing
