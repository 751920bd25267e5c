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

#include "blockfuse/ast.hpp"

#include <charconv>
#include <sstream>

#include <fmt/format.h>

namespace blockfuse::ast {

std::string_view spelling(Builtin b) {
  switch (b) {
    case Builtin::ThreadIdx: return "threadIdx";
    case Builtin::BlockIdx: return "blockIdx";
    case Builtin::BlockDim: return "blockDim";
    case Builtin::GridDim: return "gridDim";
  }
  return "?";
}

char spelling(Axis a) { return a == Axis::X ? 'x' : a == Axis::Y ? 'y' : 'z'; }

std::vector<const SharedDecl*> KernelProgram::staticShared() const {
  std::vector<const SharedDecl*> out;
  for (const auto& d : shared)
    if (!d.isDynamic()) out.push_back(&d);
  return out;
}

const SharedDecl* KernelProgram::dynamicShared() const {
  for (const auto& d : shared)
    if (d.isDynamic()) return &d;
  return nullptr;
}

const Param* KernelProgram::findParam(std::string_view n) const {
  for (const auto& p : params)
    if (p.name == n) return &p;
  return nullptr;
}

std::optional<std::size_t> KernelProgram::paramIndex(std::string_view n) const {
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].name == n) return i;
  return std::nullopt;
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

std::size_t countBarriers(const Block& b) {
  std::size_t n = 0;
  for (const auto& s : b.stmts) {
    if (std::holds_alternative<Barrier>(s.node)) ++n;
    else if (const auto* i = std::get_if<If>(&s.node)) {
      n += countBarriers(i->then_block);
      if (i->else_block) n += countBarriers(*i->else_block);
    } else if (const auto* f = std::get_if<For>(&s.node)) {
      n += countBarriers(f->body);
    }
  }
  return n;
}

bool containsBarrier(const Stmt& s) {
  if (std::holds_alternative<Barrier>(s.node)) return true;
  if (const auto* i = std::get_if<If>(&s.node))
    return containsBarrier(i->then_block) || (i->else_block && containsBarrier(*i->else_block));
  if (const auto* f = std::get_if<For>(&s.node)) return containsBarrier(f->body);
  return false;
}

bool containsBarrier(const Block& b) {
  for (const auto& s : b.stmts)
    if (containsBarrier(s)) return true;
  return false;
}

bool containsWarpIntrinsic(const Expr& e) {
  return std::visit(overloaded{
                        [](const Index& x) { return containsWarpIntrinsic(*x.index); },
                        [](const Unary& x) { return containsWarpIntrinsic(*x.operand); },
                        [](const Binary& x) { return containsWarpIntrinsic(*x.lhs) || containsWarpIntrinsic(*x.rhs); },
                        [](const Cast& x) { return containsWarpIntrinsic(*x.operand); },
                        [](const Call& x) {
                          if (isWarpIntrinsic(x.fn)) return true;
                          for (const auto& a : x.args)
                            if (containsWarpIntrinsic(a)) return true;
                          return false;
                        },
                        [](const auto&) { return false; },
                    },
                    e.node);
}

namespace {

bool lvalueHasWarp(const LValue& lv) { return lv.index && containsWarpIntrinsic(**lv.index); }

}  // namespace

bool hasDirectWarpIntrinsic(const Stmt& s) {
  return std::visit(overloaded{
                        [](const LocalDecl& d) { return containsWarpIntrinsic(d.init); },
                        [](const Assign& a) { return lvalueHasWarp(a.target) || containsWarpIntrinsic(a.value); },
                        [](const If& i) { return containsWarpIntrinsic(i.cond); },
                        [](const For& f) {
                          return containsWarpIntrinsic(f.lo) || containsWarpIntrinsic(f.hi) ||
                                 containsWarpIntrinsic(f.step);
                        },
                        [](const Atomic& a) {
                          return lvalueHasWarp(a.target) || containsWarpIntrinsic(a.operand) ||
                                 (a.compare && containsWarpIntrinsic(*a.compare));
                        },
                        [](const auto&) { return false; },
                    },
                    s.node);
}

bool containsWarpIntrinsic(const Stmt& s) {
  if (hasDirectWarpIntrinsic(s)) return true;
  if (const auto* i = std::get_if<If>(&s.node))
    return containsWarpIntrinsic(i->then_block) || (i->else_block && containsWarpIntrinsic(*i->else_block));
  if (const auto* f = std::get_if<For>(&s.node)) return containsWarpIntrinsic(f->body);
  return false;
}

bool containsWarpIntrinsic(const Block& b) {
  for (const auto& s : b.stmts)
    if (containsWarpIntrinsic(s)) return true;
  return false;
}

bool usesAtomics(const Block& b) {
  for (const auto& s : b.stmts) {
    if (std::holds_alternative<Atomic>(s.node)) return true;
    if (const auto* i = std::get_if<If>(&s.node)) {
      if (usesAtomics(i->then_block) || (i->else_block && usesAtomics(*i->else_block))) return true;
    } else if (const auto* f = std::get_if<For>(&s.node)) {
      if (usesAtomics(f->body)) return true;
    }
  }
  return false;
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

std::string floatText(const FloatLit& f) {
  char buf[64];
  std::to_chars_result r = f.single ? std::to_chars(buf, buf + sizeof buf, static_cast<float>(f.value))
                                    : std::to_chars(buf, buf + sizeof buf, f.value);
  std::string s(buf, r.ptr);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  if (f.single) s += 'f';
  return s;
}

void printExpr(std::ostream& os, const Expr& e);

void printLValue(std::ostream& os, const LValue& lv) {
  os << lv.name;
  if (lv.index) {
    os << '[';
    printExpr(os, **lv.index);
    os << ']';
  }
}

void printExpr(std::ostream& os, const Expr& e) {
  std::visit(overloaded{
                 [&](const IntLit& x) { os << x.value; },
                 [&](const FloatLit& x) { os << floatText(x); },
                 [&](const VarRef& x) { os << x.name; },
                 [&](const BuiltinRef& x) { os << spelling(x.which) << '.' << spelling(x.axis); },
                 [&](const Index& x) {
                   os << x.array << '[';
                   printExpr(os, *x.index);
                   os << ']';
                 },
                 [&](const Unary& x) {
                   os << '(' << spelling(x.op);
                   printExpr(os, *x.operand);
                   os << ')';
                 },
                 [&](const Binary& x) {
                   os << '(';
                   printExpr(os, *x.lhs);
                   os << ' ' << spelling(x.op) << ' ';
                   printExpr(os, *x.rhs);
                   os << ')';
                 },
                 [&](const Call& x) {
                   os << spelling(x.fn) << '(';
                   for (std::size_t i = 0; i < x.args.size(); ++i) {
                     if (i) os << ", ";
                     printExpr(os, x.args[i]);
                   }
                   os << ')';
                 },
                 [&](const Cast& x) {
                   os << to_string(x.to) << '(';
                   printExpr(os, *x.operand);
                   os << ')';
                 },
             },
             e.node);
}

void printBlock(std::ostream& os, const Block& b, int indent);

void printAtomic(std::ostream& os, const Atomic& a) {
  os << spelling(a.kind) << '(';
  printLValue(os, a.target);
  os << ", ";
  if (a.compare) {
    printExpr(os, *a.compare);
    os << ", ";
  }
  printExpr(os, a.operand);
  os << ')';
}

void printStmt(std::ostream& os, const Stmt& s, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  os << pad;
  std::visit(overloaded{
                 [&](const LocalDecl& d) {
                   os << "let " << d.name << ": " << to_string(d.type) << " = ";
                   printExpr(os, d.init);
                   os << ";\n";
                 },
                 [&](const Assign& a) {
                   printLValue(os, a.target);
                   os << " = ";
                   printExpr(os, a.value);
                   os << ";\n";
                 },
                 [&](const If& i) {
                   os << "if (";
                   printExpr(os, i.cond);
                   os << ") ";
                   printBlock(os, i.then_block, indent);
                   if (i.else_block) {
                     os << pad << "else ";
                     printBlock(os, *i.else_block, indent);
                   }
                 },
                 [&](const For& f) {
                   os << "for (" << f.counter << " = ";
                   printExpr(os, f.lo);
                   os << "; " << f.counter << " < ";
                   printExpr(os, f.hi);
                   os << "; " << f.counter << " += ";
                   printExpr(os, f.step);
                   os << ") ";
                   printBlock(os, f.body, indent);
                 },
                 [&](const Barrier&) { os << "barrier;\n"; },
                 [&](const Atomic& a) {
                   if (a.result) os << "let " << a.result->name << ": " << to_string(a.result->type) << " = ";
                   printAtomic(os, a);
                   os << ";\n";
                 },
                 [&](const Noop&) { os << ";\n"; },
             },
             s.node);
}

void printBlock(std::ostream& os, const Block& b, int indent) {
  os << "{\n";
  for (const auto& s : b.stmts) printStmt(os, s, indent + 1);
  os << std::string(static_cast<std::size_t>(indent) * 2, ' ') << "}\n";
}

}  // namespace

std::string print(const Expr& e) {
  std::ostringstream os;
  printExpr(os, e);
  return os.str();
}

std::string print(const KernelProgram& k) {
  std::ostringstream os;
  os << "kernel " << k.name << '(';
  for (std::size_t i = 0; i < k.params.size(); ++i) {
    const Param& p = k.params[i];
    if (i) os << ", ";
    os << p.name << ": ";
    if (p.global) os << "global " << to_string(p.type) << "[]";
    else os << to_string(p.type);
  }
  os << ") {\n";
  for (const auto& d : k.shared) {
    if (d.isDynamic()) os << "  extern shared " << to_string(d.type) << ' ' << d.name << "[];\n";
    else os << "  shared " << to_string(d.type) << ' ' << d.name << '[' << *d.length << "];\n";
  }
  for (const auto& s : k.body.stmts) printStmt(os, s, 1);
  os << "}\n";
  return os.str();
}

}  // namespace blockfuse::ast
