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

#include "blockfuse/host.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "blockfuse/executor.hpp"
#include "blockfuse/mpmd.hpp"

namespace blockfuse::host {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

struct Token {
  std::string_view text;
  Span span;
};

std::vector<Token> tokenize(std::string_view line, std::uint32_t line_no) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == '#') break;
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#') ++i;
    out.push_back({line.substr(start, i - start), Span{line_no, static_cast<std::uint32_t>(start + 1)}});
  }
  return out;
}

Value parseLiteral(std::string_view text, ScalarType target, Span at) {
  std::string_view body = text;
  for (ScalarType t : {ScalarType::I32, ScalarType::I64, ScalarType::F32, ScalarType::F64}) {
    const std::string_view suffix = to_string(t);
    if (body.size() > suffix.size() && body.ends_with(suffix)) {
      if (t != target)
        throw ParseError(at, fmt::format("literal '{}' has type {} but {} is expected", text, suffix, to_string(target)),
                         {}, ParseError::Kind::Semantic);
      body.remove_suffix(suffix.size());
      break;
    }
  }
  const char* first = body.data();
  const char* last = body.data() + body.size();
  if (isInteger(target)) {
    std::int64_t v = 0;
    const auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last)
      throw ParseError(at, fmt::format("'{}' is not an integer literal", text), {"integer literal"},
                       ParseError::Kind::Semantic);
    if (target == ScalarType::I32) {
      if (v < INT32_MIN || v > INT32_MAX)
        throw ParseError(at, fmt::format("literal '{}' does not fit in i32", text), {}, ParseError::Kind::Semantic);
      return Value::i32(static_cast<std::int32_t>(v));
    }
    return Value::i64(v);
  }
  double d = 0;
  const auto [p, ec] = std::from_chars(first, last, d);
  if (ec != std::errc{} || p != last)
    throw ParseError(at, fmt::format("'{}' is not a numeric literal", text), {"numeric literal"},
                     ParseError::Kind::Semantic);
  return target == ScalarType::F32 ? Value::f32(static_cast<float>(d)) : Value::f64(d);
}

template <class T>
T parseNumber(const Token& t, std::string_view what) {
  T v{};
  const auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
  if (ec != std::errc{} || p != t.text.data() + t.text.size())
    throw ParseError(t.span, fmt::format("expected {} but found '{}'", what, t.text), {std::string(what)});
  return v;
}

class HostParser {
 public:
  explicit HostParser(const KernelTable& kernels) : kernels_(kernels) {}

  HostProgram run(std::string_view source) {
    HostProgram p;
    std::uint32_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
      const std::size_t nl = source.find('\n', pos);
      const std::string_view line = source.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
      ++line_no;
      line_end_ = Span{line_no, static_cast<std::uint32_t>(line.size() + 1)};
      toks_ = tokenize(line, line_no);
      if (!toks_.empty()) p.ops.push_back(op());
      if (nl == std::string_view::npos) break;
      pos = nl + 1;
    }
    return p;
  }

 private:
  const Token& need(std::size_t i, std::string_view what) {
    if (i >= toks_.size()) throw ParseError(line_end_, fmt::format("expected {}", what), {std::string(what)});
    return toks_[i];
  }

  void keyword(std::size_t i, std::string_view kw) {
    const Token& t = need(i, kw);
    if (t.text != kw) throw ParseError(t.span, fmt::format("expected '{}' but found '{}'", kw, t.text), {std::string(kw)});
  }

  void end(std::size_t i) {
    if (i < toks_.size())
      throw ParseError(toks_[i].span, fmt::format("unexpected '{}' at end of line", toks_[i].text), {"end of line"});
  }

  const Alloc& live(const Token& t) {
    auto it = live_.find(std::string(t.text));
    if (it == live_.end())
      throw ParseError(t.span, fmt::format("buffer '{}' is not allocated", t.text), {}, ParseError::Kind::Semantic);
    return it->second;
  }

  Dim3 dims(std::size_t i) {
    const auto x = parseNumber<std::uint32_t>(need(i, "dimension"), "dimension");
    const auto y = parseNumber<std::uint32_t>(need(i + 1, "dimension"), "dimension");
    const auto z = parseNumber<std::uint32_t>(need(i + 2, "dimension"), "dimension");
    const Dim3 d{x, y, z};
    if (!d.valid())
      throw ParseError(toks_[i].span, "dimensions must be positive with a product below 2^31", {},
                       ParseError::Kind::Semantic);
    return d;
  }

  HostOp op() {
    const Token& head = toks_[0];
    HostOp op{head.span, Sync{}};
    if (head.text == "alloc") {
      const Token& name = need(1, "buffer name");
      if (live_.contains(std::string(name.text)))
        throw ParseError(name.span, fmt::format("buffer '{}' is already allocated", name.text), {},
                         ParseError::Kind::Semantic);
      const Token& ty = need(2, "scalar type");
      const auto type = parseScalarType(ty.text);
      if (!type) throw ParseError(ty.span, fmt::format("unknown scalar type '{}'", ty.text), {"i32", "i64", "f32", "f64"});
      const auto len = parseNumber<std::size_t>(need(3, "length"), "length");
      end(4);
      Alloc a{std::string(name.text), *type, len};
      live_[a.buf] = a;
      op.node = a;
    } else if (head.text == "upload") {
      const Alloc& a = live(need(1, "buffer name"));
      const Token& src = need(2, "source");
      end(3);
      op.node = Upload{a.buf, source(src, a.type)};
    } else if (head.text == "launch") {
      op.node = launch();
    } else if (head.text == "download") {
      const Alloc& a = live(need(1, "buffer name"));
      const Token& path = need(2, "path");
      end(3);
      op.node = Download{a.buf, std::string(path.text)};
    } else if (head.text == "sync") {
      end(1);
      op.node = Sync{};
    } else if (head.text == "free") {
      const Alloc& a = live(need(1, "buffer name"));
      end(2);
      Free f{a.buf};
      live_.erase(f.buf);
      op.node = f;
    } else {
      throw ParseError(head.span, fmt::format("unknown operation '{}'", head.text),
                       {"alloc", "upload", "launch", "download", "sync", "free"});
    }
    return op;
  }

  Source source(const Token& t, ScalarType type) {
    Source s;
    std::string_view text = t.text;
    if (text.starts_with("file:")) {
      s.kind = Source::Kind::File;
      s.path = std::string(text.substr(5));
      if (s.path.empty()) throw ParseError(t.span, "empty file path", {"path"});
    } else if (text == "fill:seq") {
      s.kind = Source::Kind::Seq;
    } else if (text.starts_with("fill:const:")) {
      s.kind = Source::Kind::Const;
      s.constant = parseLiteral(text.substr(11), type, t.span);
    } else if (text.starts_with("fill:rand:")) {
      s.kind = Source::Kind::Rand;
      s.seed = parseNumber<std::uint64_t>(Token{text.substr(10), t.span}, "seed");
    } else {
      throw ParseError(t.span, fmt::format("unknown source '{}'", text),
                       {"file:<path>", "fill:seq", "fill:const:<value>", "fill:rand:<seed>"});
    }
    return s;
  }

  Launch launch() {
    Launch l;
    const Token& name = need(1, "kernel name");
    auto k = kernels_.find(name.text);
    if (k == kernels_.end()) throw UnknownKernel(name.span, std::string(name.text));
    l.kernel = std::string(name.text);
    keyword(2, "grid");
    l.grid = dims(3);
    keyword(6, "block");
    l.block = dims(7);
    keyword(10, "shmem");
    l.shmem = parseNumber<std::size_t>(need(11, "byte count"), "byte count");
    keyword(12, "args");
    const auto& params = k->second.params;
    const std::size_t given = toks_.size() - 13;
    if (given != params.size())
      throw ParseError(toks_[0].span,
                       fmt::format("kernel '{}' takes {} arguments but {} were given", l.kernel, params.size(), given),
                       {}, ParseError::Kind::Arity);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Token& t = toks_[13 + i];
      const ast::Param& p = params[i];
      if (p.global) {
        const Alloc& a = live(t);
        if (a.type != p.type)
          throw ParseError(t.span,
                           fmt::format("argument {} of '{}': buffer '{}' holds {} but {} is expected", i, l.kernel,
                                       a.buf, to_string(a.type), to_string(p.type)),
                           {}, ParseError::Kind::Semantic);
        l.args.emplace_back(BufferArg{a.buf});
      } else {
        l.args.emplace_back(parseLiteral(t.text, p.type, t.span));
      }
    }
    return l;
  }

  const KernelTable& kernels_;
  std::map<std::string, Alloc> live_;
  std::vector<Token> toks_;
  Span line_end_;
};

std::string literal(const Value& v) { return fmt::format("{}{}", v.str(), to_string(v.type())); }

std::string sourceText(const Source& s) {
  switch (s.kind) {
    case Source::Kind::File: return "file:" + s.path;
    case Source::Kind::Seq: return "fill:seq";
    case Source::Kind::Const: return "fill:const:" + literal(s.constant);
    case Source::Kind::Rand: return fmt::format("fill:rand:{}", s.seed);
  }
  return "?";
}

std::string dimsText(const Dim3& d) { return fmt::format("{} {} {}", d.x, d.y, d.z); }

std::string opText(const HostOp& op) {
  return std::visit(overloaded{
                        [](const Alloc& a) { return fmt::format("alloc {} {} {}", a.buf, to_string(a.type), a.length); },
                        [](const Upload& u) { return fmt::format("upload {} {}", u.buf, sourceText(u.source)); },
                        [](const Launch& l) {
                          std::string s = fmt::format("launch {} grid {} block {} shmem {} args", l.kernel,
                                                      dimsText(l.grid), dimsText(l.block), l.shmem);
                          for (const auto& a : l.args)
                            s += " " + std::visit(overloaded{[](const Value& v) { return literal(v); },
                                                             [](const BufferArg& b) { return b.name; }},
                                                  a);
                          return s;
                        },
                        [](const Download& d) { return fmt::format("download {} {}", d.buf, d.path); },
                        [](const Sync& s) { return std::string(s.implicit ? "sync  # implicit" : "sync"); },
                        [](const Free& f) { return fmt::format("free {}", f.buf); },
                    },
                    op.node);
}

// Global-parameter reads and writes of a kernel body.
class AccessWalker {
 public:
  explicit AccessWalker(const ast::KernelProgram& k) : k_(k) {}
  AccessSummary summary;

  void block(const ast::Block& b) {
    for (const auto& s : b.stmts) stmt(s);
  }

 private:
  std::optional<std::size_t> global(const std::string& name) const {
    const auto i = k_.paramIndex(name);
    if (i && k_.params[*i].global) return i;
    return std::nullopt;
  }

  void target(const ast::LValue& lv) {
    if (!lv.index) return;
    expr(**lv.index);
    if (auto i = global(lv.name)) summary.writes.insert(*i);
  }

  void stmt(const ast::Stmt& s) {
    std::visit(overloaded{
                   [&](const ast::LocalDecl& d) { expr(d.init); },
                   [&](const ast::Assign& a) {
                     target(a.target);
                     expr(a.value);
                   },
                   [&](const ast::If& i) {
                     expr(i.cond);
                     block(i.then_block);
                     if (i.else_block) block(*i.else_block);
                   },
                   [&](const ast::For& f) {
                     expr(f.lo);
                     expr(f.hi);
                     expr(f.step);
                     block(f.body);
                   },
                   [&](const ast::Atomic& a) {
                     target(a.target);
                     expr(a.operand);
                     if (a.compare) expr(*a.compare);
                   },
                   [](const ast::Barrier&) {},
                   [](const ast::Noop&) {},
               },
               s.node);
  }

  void expr(const ast::Expr& e) {
    std::visit(overloaded{
                   [&](const ast::Index& x) {
                     if (auto i = global(x.array)) summary.reads.insert(*i);
                     expr(*x.index);
                   },
                   [&](const ast::Unary& x) { expr(*x.operand); },
                   [&](const ast::Cast& x) { expr(*x.operand); },
                   [&](const ast::Binary& x) {
                     expr(*x.lhs);
                     expr(*x.rhs);
                   },
                   [&](const ast::Call& x) {
                     for (const auto& a : x.args) expr(a);
                   },
                   [](const auto&) {},
               },
               e.node);
  }

  const ast::KernelProgram& k_;
};

void writeValues(const std::filesystem::path& path, ScalarType type, const std::vector<Value>& values) {
  TypedBuffer tmp(type, values.size());
  for (std::size_t i = 0; i < values.size(); ++i) tmp.store(i, values[i]);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  const auto raw = tmp.raw();
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace

UnknownKernel::UnknownKernel(Span where, const std::string& name)
    : ParseError(where, fmt::format("unknown kernel '{}'", name), {}, Kind::Semantic) {}

KernelTable makeKernelTable(std::vector<ast::KernelProgram> kernels) {
  KernelTable t;
  for (auto& k : kernels) {
    const std::string name = k.name;
    if (!t.emplace(name, std::move(k)).second) throw Error(fmt::format("kernel '{}' defined twice", name));
  }
  return t;
}

std::size_t HostProgram::implicitSyncs() const {
  std::size_t n = 0;
  for (const auto& op : ops)
    if (const auto* s = std::get_if<Sync>(&op.node); s && s->implicit) ++n;
  return n;
}

HostProgram parseHost(std::string_view source, const KernelTable& kernels) { return HostParser(kernels).run(source); }

std::string print(const HostProgram& p) {
  std::string out;
  for (const auto& op : p.ops) out += opText(op) + "\n";
  return out;
}

nlohmann::json toJson(const HostProgram& p) {
  auto ops = nlohmann::json::array();
  for (const auto& op : p.ops) {
    nlohmann::json j;
    j["line"] = op.span.line;
    j["text"] = opText(op);
    if (const auto* s = std::get_if<Sync>(&op.node)) j["implicit"] = s->implicit;
    ops.push_back(std::move(j));
  }
  return {{"ops", ops}, {"implicit_syncs", p.implicitSyncs()}};
}

AccessSummary summarizeAccess(const ast::KernelProgram& k) {
  AccessWalker w(k);
  w.block(k.body);
  return w.summary;
}

BufferAccess opAccess(const HostOp& op, const SummaryTable& summaries) {
  BufferAccess a;
  std::visit(overloaded{
                 [&](const Upload& u) { a.writes.insert(u.buf); },
                 [&](const Download& d) { a.reads.insert(d.buf); },
                 [&](const Free& f) { a.writes.insert(f.buf); },
                 [&](const Launch& l) {
                   auto s = summaries.find(l.kernel);
                   if (s == summaries.end()) throw Error(fmt::format("no access summary for kernel '{}'", l.kernel));
                   auto name = [&](std::size_t i) -> const std::string* {
                     if (i >= l.args.size()) return nullptr;
                     const auto* b = std::get_if<BufferArg>(&l.args[i]);
                     return b ? &b->name : nullptr;
                   };
                   for (std::size_t i : s->second.reads)
                     if (const auto* n = name(i)) a.reads.insert(*n);
                   for (std::size_t i : s->second.writes)
                     if (const auto* n = name(i)) a.writes.insert(*n);
                 },
                 [](const auto&) {},
             },
             op.node);
  return a;
}

std::string_view to_string(Hazard h) {
  switch (h) {
    case Hazard::ReadAfterWrite: return "RAW";
    case Hazard::WriteAfterRead: return "WAR";
    case Hazard::WriteAfterWrite: return "WAW";
  }
  return "?";
}

std::optional<std::pair<Hazard, std::string>> conflict(const BufferAccess& earlier, const BufferAccess& later) {
  for (const auto& b : later.writes) {
    if (earlier.writes.contains(b)) return std::pair{Hazard::WriteAfterWrite, b};
    if (earlier.reads.contains(b)) return std::pair{Hazard::WriteAfterRead, b};
  }
  for (const auto& b : later.reads)
    if (earlier.writes.contains(b)) return std::pair{Hazard::ReadAfterWrite, b};
  return std::nullopt;
}

HostProgram insertBarriers(const HostProgram& p, const SummaryTable& summaries) {
  HostProgram out;
  std::vector<BufferAccess> unsynced;
  for (const auto& op : p.ops) {
    if (std::holds_alternative<Sync>(op.node)) {
      unsynced.clear();
      out.ops.push_back(op);
      continue;
    }
    const BufferAccess acc = opAccess(op, summaries);
    const bool hazard =
        std::any_of(unsynced.begin(), unsynced.end(), [&](const BufferAccess& e) { return conflict(e, acc).has_value(); });
    if (hazard) {
      out.ops.push_back(HostOp{op.span, Sync{true}});
      unsynced.clear();
    }
    out.ops.push_back(op);
    if (std::holds_alternative<Launch>(op.node)) unsynced.push_back(acc);
  }
  return out;
}

PackedArgs packParams(const Launch& l, const ast::KernelProgram& k, const BufferMap& buffers,
                      const DeviceArena& arena) {
  if (l.args.size() != k.params.size())
    throw TypeMismatch(std::min(l.args.size(), k.params.size()),
                       fmt::format("kernel '{}' takes {} arguments, got {}", k.name, k.params.size(), l.args.size()));
  std::vector<ArgValue> args;
  for (std::size_t i = 0; i < l.args.size(); ++i) {
    if (const auto* b = std::get_if<BufferArg>(&l.args[i])) {
      auto it = buffers.find(b->name);
      if (it == buffers.end()) throw TypeMismatch(i, fmt::format("buffer '{}' is not allocated", b->name));
      if (!k.params[i].global) throw TypeMismatch(i, fmt::format("buffer '{}' passed for a scalar parameter", b->name));
      const auto buf = arena.get(it->second);
      if (buf->type() != k.params[i].type)
        throw TypeMismatch(i, fmt::format("buffer '{}' holds {} but {} is expected", b->name, to_string(buf->type()),
                                          to_string(k.params[i].type)));
      args.emplace_back(it->second);
    } else {
      args.emplace_back(std::get<Value>(l.args[i]));
    }
  }
  return PackedArgs::pack(k.params, args);
}

std::vector<Value> materialize(const Source& s, ScalarType type, std::size_t length,
                               const std::filesystem::path& base_dir) {
  std::vector<Value> out;
  out.reserve(length);
  switch (s.kind) {
    case Source::Kind::Seq:
      for (std::size_t i = 0; i < length; ++i) out.push_back(Value::i64(static_cast<std::int64_t>(i)).convert(type));
      break;
    case Source::Kind::Const: out.assign(length, s.constant.convert(type)); break;
    case Source::Kind::Rand: {
      std::mt19937_64 rng(s.seed);
      for (std::size_t i = 0; i < length; ++i) {
        if (isInteger(type)) out.push_back(Value::i64(static_cast<std::int64_t>(rng() % 1024)).convert(type));
        else out.push_back(Value::f64(static_cast<double>(rng() >> 11) * 0x1.0p-53).convert(type));
      }
      break;
    }
    case Source::Kind::File: {
      const std::filesystem::path path = base_dir.empty() ? std::filesystem::path(s.path) : base_dir / s.path;
      std::ifstream in(path, std::ios::binary);
      if (!in) throw Error(fmt::format("cannot read '{}'", path.string()));
      std::ostringstream ss;
      ss << in.rdbuf();
      const std::string bytes = ss.str();
      TypedBuffer tmp(type, length);
      if (bytes.size() != tmp.bytes())
        throw Error(fmt::format("'{}' holds {} bytes, expected {}", path.string(), bytes.size(), tmp.bytes()));
      std::memcpy(tmp.raw().data(), bytes.data(), bytes.size());
      out = tmp.values();
      break;
    }
  }
  return out;
}

HostRunner::HostRunner(const KernelTable& kernels, RunOptions options)
    : kernels_(kernels), options_(std::move(options)) {}

std::shared_ptr<const mpmd::MpmdKernel> HostRunner::compiled(const std::string& name) {
  auto it = compiled_.find(name);
  if (it != compiled_.end()) return it->second;
  const ast::KernelProgram& k = kernels_.at(name);
  mpmd::TransformOptions opts;
  opts.warp_mode = options_.warp_mode || ast::containsWarpIntrinsic(k.body);
  opts.warp_size = options_.warp_size;
  auto ptr = std::make_shared<const mpmd::MpmdKernel>(mpmd::compile(k, opts));
  compiled_.emplace(name, ptr);
  return ptr;
}

const AccessSummary& HostRunner::summary(const std::string& name) {
  auto it = summaries_.find(name);
  if (it == summaries_.end()) it = summaries_.emplace(name, summarizeAccess(kernels_.at(name))).first;
  return it->second;
}

RunResult HostRunner::run(const HostProgram& p) {
  for (const auto& op : p.ops)
    if (const auto* l = std::get_if<Launch>(&op.node)) {
      if (!kernels_.contains(l->kernel)) throw Error(fmt::format("unknown kernel '{}'", l->kernel));
      summary(l->kernel);
    }
  RunResult result;
  result.executed = options_.insert_barriers ? insertBarriers(p, summaries_) : p;

  DeviceArena arena;
  BufferMap buffers;
  std::optional<runtime::Runtime> rt;
  if (options_.mode == ExecMode::Runtime) rt.emplace(options_.runtime);
  std::vector<std::pair<std::uint64_t, BufferAccess>> issued;

  const auto& ops = result.executed.ops;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const HostOp& op = ops[i];
    if (rt && !std::holds_alternative<Sync>(op.node)) {
      const BufferAccess acc = opAccess(op, summaries_);
      bool hit = false;
      for (const auto& [id, earlier] : issued) {
        if (!rt->pending(id)) continue;
        if (auto c = conflict(earlier, acc)) {
          result.conflicts.push_back({i, id, c->first, c->second});
          hit = true;
        }
      }
      if (hit) rt->deviceSynchronize();
    }
    std::visit(overloaded{
                   [&](const Alloc& a) { buffers[a.buf] = arena.alloc(a.type, a.length); },
                   [&](const Upload& u) {
                     const auto buf = arena.get(buffers.at(u.buf));
                     const auto values = materialize(u.source, buf->type(), buf->length(), options_.base_dir);
                     for (std::size_t e = 0; e < values.size(); ++e) buf->store(e, values[e]);
                   },
                   [&](const Launch& l) {
                     const ast::KernelProgram& k = kernels_.at(l.kernel);
                     PackedArgs packed = packParams(l, k, buffers, arena);
                     const LaunchShape shape{l.grid, l.block, l.shmem};
                     if (rt) {
                       const auto id = rt->launch(compiled(l.kernel), shape, std::move(packed), arena);
                       issued.emplace_back(id, opAccess(op, summaries_));
                     } else {
                       const auto args = packed.unpack(k.params);
                       result.reference_barrier_events +=
                           runReference(k, shape, args, arena, options_.warp_size).barrier_events;
                     }
                   },
                   [&](const Download& d) {
                     const auto buf = arena.get(buffers.at(d.buf));
                     DownloadResult r{d.buf, buf->type(), buf->values()};
                     if (options_.write_downloads) writeValues(options_.base_dir / d.path, r.type, r.values);
                     result.downloads.push_back(std::move(r));
                   },
                   [&](const Sync&) {
                     if (rt) rt->deviceSynchronize();
                   },
                   [&](const Free& f) {
                     arena.free(buffers.at(f.buf));
                     buffers.erase(f.buf);
                   },
               },
               op.node);
  }
  if (rt) {
    rt->deviceSynchronize();
    result.counters = rt->counters();
    result.launches = rt->records();
  }
  return result;
}

}  // namespace blockfuse::host
