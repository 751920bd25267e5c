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

#include "blockfuse/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace blockfuse {

ParseError::ParseError(Span where, std::string message, std::vector<std::string> expected, Kind kind)
    : Error(expected.empty() ? fmt::format("{}: {}", to_string(where), message)
                             : fmt::format("{}: {} (expected one of: {})", to_string(where), message,
                                           fmt::join(expected, ", "))),
      where_(where),
      expected_(std::move(expected)),
      kind_(kind) {}

namespace {

using namespace ast;

enum class Tok { Ident, Int, Float, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Span span;
  std::int64_t int_value = 0;
  double float_value = 0;
  bool single = false;
};

constexpr std::array kPuncts = {"&&", "||", "==", "!=", "<=", ">=", "<<", ">>", "+=", "(", ")", "{", "}", "[",
                                "]",  ",",  ";",  ":",  ".",  "=",  "<",  ">",  "+",  "-", "*", "/", "%", "&",
                                "|",  "^",  "!",  "~"};

const std::set<std::string, std::less<>> kReserved = {
    "kernel", "let", "if", "else", "for", "barrier", "shared", "extern", "global", "atomic_add", "atomic_cas",
    "threadIdx", "blockIdx", "blockDim", "gridDim", "i32", "i64", "f32", "f64", "min", "max", "abs", "sqrt",
    "shfl_down", "vote_any", "vote_all"};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skipSpaceAndComments();
      Token t;
      t.span = {line_, col_};
      if (pos_ >= src_.size()) {
        t.kind = Tok::End;
        t.text = "end of input";
        out.push_back(std::move(t));
        return out;
      }
      const char c = src_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        lexNumber(t);
      } else {
        bool matched = false;
        for (std::string_view p : kPuncts) {
          if (src_.substr(pos_, p.size()) == p) {
            t.kind = Tok::Punct;
            t.text = std::string(p);
            for (std::size_t i = 0; i < p.size(); ++i) advance();
            matched = true;
            break;
          }
        }
        if (!matched) throw ParseError(t.span, fmt::format("unexpected character '{}'", c));
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skipSpaceAndComments() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (src_.substr(pos_, 2) == "//") {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (src_.substr(pos_, 2) == "/*") {
        const Span at{line_, col_};
        advance();
        advance();
        while (pos_ < src_.size() && src_.substr(pos_, 2) != "*/") advance();
        if (pos_ >= src_.size()) throw ParseError(at, "unterminated comment");
        advance();
        advance();
      } else {
        return;
      }
    }
  }

  void lexNumber(Token& t) {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    };
    digits();
    bool is_float = false;
    if (pos_ + 1 < src_.size() && src_[pos_] == '.' && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
      is_float = true;
      advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
      if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
        is_float = true;
        while (pos_ < look) advance();
        digits();
      }
    }
    const std::string_view body = src_.substr(start, pos_ - start);
    t.text = std::string(body);
    if (is_float) {
      t.kind = Tok::Float;
      if (pos_ < src_.size() && src_[pos_] == 'f') {
        t.single = true;
        advance();
      }
      if (t.single) {
        float f = 0;
        std::from_chars(body.data(), body.data() + body.size(), f);
        t.float_value = f;
      } else {
        std::from_chars(body.data(), body.data() + body.size(), t.float_value);
      }
    } else {
      t.kind = Tok::Int;
      const auto r = std::from_chars(body.data(), body.data() + body.size(), t.int_value);
      if (r.ec != std::errc{}) throw ParseError(t.span, fmt::format("integer literal '{}' out of range", body));
    }
    if (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      throw ParseError(t.span, fmt::format("malformed number near '{}'", body));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1;
  std::uint32_t col_ = 1;
};

const std::array<std::vector<std::pair<std::string_view, BinOp>>, 10> kLevels = {{
    {{"||", BinOp::LogOr}},
    {{"&&", BinOp::LogAnd}},
    {{"|", BinOp::BitOr}},
    {{"^", BinOp::BitXor}},
    {{"&", BinOp::BitAnd}},
    {{"==", BinOp::Eq}, {"!=", BinOp::Ne}},
    {{"<", BinOp::Lt}, {"<=", BinOp::Le}, {">", BinOp::Gt}, {">=", BinOp::Ge}},
    {{"<<", BinOp::Shl}, {">>", BinOp::Shr}},
    {{"+", BinOp::Add}, {"-", BinOp::Sub}},
    {{"*", BinOp::Mul}, {"/", BinOp::Div}, {"%", BinOp::Mod}},
}};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<KernelProgram> unit() {
    std::vector<KernelProgram> out;
    std::set<std::string, std::less<>> names;
    while (!atEnd()) {
      KernelProgram k = kernel();
      if (!names.insert(k.name).second)
        throw ParseError(k.span, fmt::format("duplicate kernel name '{}'", k.name), {}, ParseError::Kind::Semantic);
      out.push_back(std::move(k));
    }
    return out;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  bool atEnd() const { return peek().kind == Tok::End; }
  bool isPunct(std::string_view p, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Punct && peek(ahead).text == p;
  }
  bool isWord(std::string_view w, std::size_t ahead = 0) const {
    return peek(ahead).kind == Tok::Ident && peek(ahead).text == w;
  }
  const Token& take() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const Token& t = peek();
    throw ParseError(t.span, fmt::format("unexpected '{}'", t.text), std::move(expected));
  }

  const Token& expectPunct(std::string_view p) {
    if (!isPunct(p)) fail({std::string(p)});
    return take();
  }
  const Token& expectWord(std::string_view w) {
    if (!isWord(w)) fail({std::string(w)});
    return take();
  }
  std::string identifier() {
    if (peek().kind != Tok::Ident || kReserved.contains(peek().text)) fail({"identifier"});
    return take().text;
  }
  ScalarType scalar() {
    if (peek().kind == Tok::Ident) {
      if (auto t = parseScalarType(peek().text)) {
        take();
        return *t;
      }
    }
    fail({"i32", "i64", "f32", "f64"});
  }

  KernelProgram kernel() {
    KernelProgram k;
    k.span = peek().span;
    expectWord("kernel");
    k.name = identifier();
    expectPunct("(");
    if (!isPunct(")")) {
      for (;;) {
        Param p;
        p.span = peek().span;
        p.name = identifier();
        expectPunct(":");
        if (isWord("global")) {
          take();
          p.global = true;
          p.type = scalar();
          expectPunct("[");
          expectPunct("]");
        } else if (peek().kind == Tok::Ident && parseScalarType(peek().text)) {
          p.type = scalar();
        } else {
          fail({"i32", "i64", "f32", "f64", "global"});
        }
        k.params.push_back(std::move(p));
        if (isPunct(",")) {
          take();
          continue;
        }
        break;
      }
    }
    expectPunct(")");
    k.body.span = peek().span;
    expectPunct("{");
    while (!isPunct("}")) {
      if (isWord("shared") || isWord("extern")) {
        k.shared.push_back(sharedDecl());
      } else {
        k.body.stmts.push_back(statement());
      }
    }
    take();
    return k;
  }

  SharedDecl sharedDecl() {
    SharedDecl d;
    d.span = peek().span;
    const bool is_extern = isWord("extern");
    if (is_extern) take();
    expectWord("shared");
    d.type = scalar();
    d.name = identifier();
    expectPunct("[");
    if (is_extern) {
      expectPunct("]");
    } else {
      if (peek().kind != Tok::Int) fail({"integer length"});
      const Token& n = take();
      if (n.int_value < 0 || n.int_value > 0xffffffffLL) throw ParseError(n.span, "shared array length out of range");
      d.length = static_cast<std::uint32_t>(n.int_value);
      expectPunct("]");
    }
    expectPunct(";");
    return d;
  }

  Block block() {
    Block b;
    b.span = peek().span;
    expectPunct("{");
    while (!isPunct("}")) {
      if (isWord("shared") || isWord("extern"))
        throw ParseError(peek().span, "shared declarations are only allowed at kernel top level");
      if (atEnd()) fail({"}"});
      b.stmts.push_back(statement());
    }
    take();
    return b;
  }

  LValue lvalue() {
    LValue lv;
    lv.span = peek().span;
    lv.name = identifier();
    if (isPunct("[")) {
      take();
      lv.index = Box<Expr>(expr());
      expectPunct("]");
    }
    return lv;
  }

  Atomic atomicCall() {
    Atomic a;
    if (isWord("atomic_add")) {
      take();
      a.kind = AtomicKind::Add;
      expectPunct("(");
      a.target = lvalue();
      expectPunct(",");
      a.operand = expr();
      expectPunct(")");
    } else if (isWord("atomic_cas")) {
      take();
      a.kind = AtomicKind::Cas;
      expectPunct("(");
      a.target = lvalue();
      expectPunct(",");
      a.compare = expr();
      expectPunct(",");
      a.operand = expr();
      expectPunct(")");
    } else {
      fail({"atomic_add", "atomic_cas"});
    }
    return a;
  }

  Stmt statement() {
    Stmt s;
    s.span = peek().span;
    if (isWord("let")) {
      take();
      std::string name = identifier();
      expectPunct(":");
      const ScalarType t = scalar();
      expectPunct("=");
      if (isWord("atomic_add") || isWord("atomic_cas")) {
        Atomic a = atomicCall();
        a.result = ResultBinding{std::move(name), t};
        s.node = std::move(a);
      } else {
        s.node = LocalDecl{std::move(name), t, expr()};
      }
      expectPunct(";");
    } else if (isWord("if")) {
      take();
      expectPunct("(");
      If node{expr(), {}, std::nullopt};
      expectPunct(")");
      node.then_block = block();
      if (isWord("else")) {
        take();
        node.else_block = block();
      }
      s.node = std::move(node);
    } else if (isWord("for")) {
      take();
      expectPunct("(");
      For f;
      f.counter = identifier();
      expectPunct("=");
      f.lo = expr();
      expectPunct(";");
      forCounter(f.counter);
      expectPunct("<");
      f.hi = expr();
      expectPunct(";");
      forCounter(f.counter);
      expectPunct("+=");
      f.step = expr();
      expectPunct(")");
      f.body = block();
      s.node = std::move(f);
    } else if (isWord("barrier")) {
      take();
      expectPunct(";");
      s.node = Barrier{};
    } else if (isWord("atomic_add") || isWord("atomic_cas")) {
      s.node = atomicCall();
      expectPunct(";");
    } else if (isPunct(";")) {
      take();
      s.node = Noop{};
    } else if (peek().kind == Tok::Ident && !kReserved.contains(peek().text)) {
      LValue target = lvalue();
      expectPunct("=");
      s.node = Assign{std::move(target), expr()};
      expectPunct(";");
    } else {
      fail({"let", "if", "for", "barrier", "atomic_add", "atomic_cas", ";", "identifier"});
    }
    return s;
  }

  void forCounter(const std::string& name) {
    const Token& t = peek();
    if (t.kind != Tok::Ident || t.text != name)
      throw ParseError(t.span, fmt::format("for-loop header must use counter '{}'", name), {name});
    take();
  }

  Expr expr() { return binary(0); }

  Expr binary(std::size_t level) {
    if (level == kLevels.size()) return unary();
    Expr lhs = binary(level + 1);
    for (;;) {
      const Token& t = peek();
      if (t.kind != Tok::Punct) return lhs;
      const auto& ops = kLevels[level];
      auto it = std::find_if(ops.begin(), ops.end(), [&](const auto& p) { return p.first == t.text; });
      if (it == ops.end()) return lhs;
      const Span at = t.span;
      take();
      Expr rhs = binary(level + 1);
      Expr e;
      e.span = at;
      e.node = Binary{it->second, Box<Expr>(std::move(lhs)), Box<Expr>(std::move(rhs))};
      lhs = std::move(e);
    }
  }

  Expr unary() {
    const Span at = peek().span;
    std::optional<UnOp> op;
    if (isPunct("-")) op = UnOp::Neg;
    else if (isPunct("!")) op = UnOp::Not;
    else if (isPunct("~")) op = UnOp::BitNot;
    if (op) {
      take();
      Expr e;
      e.span = at;
      e.node = Unary{*op, Box<Expr>(unary())};
      return e;
    }
    return primary();
  }

  Expr primary() {
    Expr e;
    e.span = peek().span;
    const Token& t = peek();
    if (t.kind == Tok::Int) {
      e.node = IntLit{take().int_value};
      return e;
    }
    if (t.kind == Tok::Float) {
      const Token& f = take();
      e.node = FloatLit{f.float_value, f.single};
      return e;
    }
    if (isPunct("(")) {
      take();
      Expr inner = expr();
      expectPunct(")");
      return inner;
    }
    if (t.kind == Tok::Ident) {
      static const std::array<std::pair<std::string_view, Builtin>, 4> builtins = {{
          {"threadIdx", Builtin::ThreadIdx},
          {"blockIdx", Builtin::BlockIdx},
          {"blockDim", Builtin::BlockDim},
          {"gridDim", Builtin::GridDim},
      }};
      for (const auto& [name, which] : builtins) {
        if (t.text == name) {
          take();
          expectPunct(".");
          const Token& ax = peek();
          Axis axis;
          if (ax.kind == Tok::Ident && ax.text == "x") axis = Axis::X;
          else if (ax.kind == Tok::Ident && ax.text == "y") axis = Axis::Y;
          else if (ax.kind == Tok::Ident && ax.text == "z") axis = Axis::Z;
          else fail({"x", "y", "z"});
          take();
          e.node = BuiltinRef{which, axis};
          return e;
        }
      }
      if (auto st = parseScalarType(t.text)) {
        take();
        expectPunct("(");
        Expr operand = expr();
        expectPunct(")");
        e.node = Cast{*st, Box<Expr>(std::move(operand))};
        return e;
      }
      if (auto fn = parseIntrinsic(t.text)) {
        take();
        expectPunct("(");
        Call c{*fn, {}};
        if (!isPunct(")")) {
          c.args.push_back(expr());
          while (isPunct(",")) {
            take();
            c.args.push_back(expr());
          }
        }
        expectPunct(")");
        e.node = std::move(c);
        return e;
      }
      std::string name = identifier();
      if (isPunct("[")) {
        take();
        Expr idx = expr();
        expectPunct("]");
        e.node = Index{std::move(name), Box<Expr>(std::move(idx))};
      } else {
        e.node = VarRef{std::move(name)};
      }
      return e;
    }
    fail({"expression"});
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<ast::KernelProgram> parseUnit(std::string_view source) {
  Parser p(Lexer(source).run());
  auto unit = p.unit();
  if (unit.empty()) throw ParseError(Span{1, 1}, "no kernel in source", {"kernel"});
  return unit;
}

ast::KernelProgram parse(std::string_view source) {
  auto unit = parseUnit(source);
  if (unit.size() != 1)
    throw ParseError(unit[1].span, "expected a single kernel", {"end of input"}, ParseError::Kind::Semantic);
  return std::move(unit.front());
}

}  // namespace blockfuse
