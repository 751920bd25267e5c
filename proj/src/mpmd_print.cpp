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

#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "blockfuse/mpmd.hpp"

namespace blockfuse::mpmd {

namespace {

class Printer {
 public:
  explicit Printer(const MpmdKernel* k = nullptr) : k_(k) {}

  std::string expr(const LExpr& e) const {
    return std::visit(
        [&](const auto& n) -> std::string {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, EConst>) {
            const Value& v = n.value;
            return v.type() == ScalarType::I32 ? v.str() : fmt::format("{}{}", v.str(), to_string(v.type()));
          } else if constexpr (std::is_same_v<T, EVar>) {
            return var(n.name, n.loc);
          } else if constexpr (std::is_same_v<T, EParam>) {
            if (k_ && n.index < k_->params.size()) return k_->params[n.index].name;
            return fmt::format("param#{}", n.index);
          } else if constexpr (std::is_same_v<T, EBuiltin>) {
            return fmt::format("{}.{}", ast::spelling(n.which), ast::spelling(n.axis));
          } else if constexpr (std::is_same_v<T, ELoad>) {
            return fmt::format("{}[{}]", array(n.array), expr(*n.index));
          } else if constexpr (std::is_same_v<T, EUnary>) {
            return fmt::format("({}{})", spelling(n.op), expr(*n.operand));
          } else if constexpr (std::is_same_v<T, EBinary>) {
            return fmt::format("({} {} {})", expr(*n.lhs), spelling(n.op), expr(*n.rhs));
          } else if constexpr (std::is_same_v<T, ECall>) {
            std::string s = fmt::format("{}(", spelling(n.fn));
            for (std::size_t i = 0; i < n.args.size(); ++i) s += (i ? ", " : "") + expr(n.args[i]);
            return s + ")";
          } else if constexpr (std::is_same_v<T, ECast>) {
            return fmt::format("{}({})", to_string(e.type), expr(*n.operand));
          } else {
            return fmt::format("lane_read#{}", n.index);
          }
        },
        e.node);
  }

  std::string var(const std::string& name, const VarLoc& v) const {
    switch (v.cls) {
      case VarClass::Expanded: return fmt::format("{}[tid]", name);
      case VarClass::Uniform: return fmt::format("{}@u{}", name, v.slot);
      default: return name;
    }
  }

  static std::string array(const ArrayRef& a) {
    switch (a.space) {
      case MemSpace::Global: return fmt::format("{}@global#{}", a.name, a.id);
      case MemSpace::SharedStatic: return fmt::format("{}@shared#{}", a.name, a.id);
      case MemSpace::SharedDynamic: return fmt::format("{}@dynshared", a.name);
      default: return a.name;
    }
  }

  void stmt(std::ostream& os, const LStmt& s, int indent) const {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, SSet>) {
            os << pad << var(n.name, n.var) << " = " << expr(n.value) << ";\n";
          } else if constexpr (std::is_same_v<T, SStore>) {
            os << pad << array(n.array) << '[' << expr(n.index) << "] = " << expr(n.value) << ";\n";
          } else if constexpr (std::is_same_v<T, SIf>) {
            os << pad << "if (" << expr(n.cond) << ") {\n";
            for (const auto& x : n.then_body) stmt(os, x, indent + 1);
            if (!n.else_body.empty()) {
              os << pad << "} else {\n";
              for (const auto& x : n.else_body) stmt(os, x, indent + 1);
            }
            os << pad << "}\n";
          } else if constexpr (std::is_same_v<T, SFor>) {
            os << pad << "for (" << var(n.counter, n.var) << " = " << expr(n.lo) << "; < " << expr(n.hi) << "; += "
               << expr(n.step) << ") {\n";
            for (const auto& x : n.body) stmt(os, x, indent + 1);
            os << pad << "}\n";
          } else if constexpr (std::is_same_v<T, SAtomic>) {
            os << pad;
            if (n.result) os << var(n.result->name, n.result->var) << " = ";
            os << spelling(n.kind) << '(' << array(n.array) << '[' << expr(n.index) << "], ";
            if (n.compare) os << expr(*n.compare) << ", ";
            os << expr(n.operand) << ");\n";
          }
        },
        s.node);
  }

  void steps(std::ostream& os, const std::vector<Step>& steps, int indent, bool warp) const {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    for (const auto& st : steps) {
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, LanePhase>) {
              os << pad << (warp ? "for lane in [0, warp_size):\n" : "for tid in [0, block_size):\n");
              for (const auto& s : n.stmts) stmt(os, s, indent + 1);
            } else if constexpr (std::is_same_v<T, LaneExchange>) {
              os << pad << "for lane in [0, warp_size):  // gather\n";
              for (std::size_t i = 0; i < n.gathers.size(); ++i) {
                const Gather& g = n.gathers[i];
                os << pad << "  lane_buf#" << i << "[lane] = " << expr(g.value);
                if (g.delta) os << "  (" << spelling(g.fn) << " by " << expr(*g.delta) << ')';
                else os << "  (" << spelling(g.fn) << ')';
                os << ";\n";
              }
              os << pad << "for lane in [0, warp_size):  // apply\n";
              stmt(os, n.apply, indent + 1);
            } else {
              os << pad << "for (" << var(n.counter, n.var) << " = " << expr(n.lo) << "; < " << expr(n.hi)
                 << "; += " << expr(n.step) << "):  // warp-uniform\n";
              this->steps(os, n.body, indent + 1, warp);
            }
          },
          st.node);
    }
  }

  void schedule(std::ostream& os, const std::vector<Region>& rs, int indent) const {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    for (const auto& r : rs) {
      std::visit(
          [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, RunSection>) {
              os << pad << "section " << n.index << '\n';
            } else if constexpr (std::is_same_v<T, BarrierPoint>) {
              os << pad << "barrier\n";
            } else {
              os << pad << "for (" << var(n.counter, n.var) << " = " << expr(n.lo) << "; < " << expr(n.hi)
                 << "; += " << expr(n.step) << "):\n";
              schedule(os, n.body, indent + 1);
            }
          },
          r.node);
    }
  }

 private:
  const MpmdKernel* k_;
};

std::string joinVars(const std::vector<VarInfo>& vs) {
  std::string s;
  for (std::size_t i = 0; i < vs.size(); ++i) s += fmt::format("{}{}: {}", i ? ", " : "", vs[i].name, to_string(vs[i].type));
  return s.empty() ? "-" : s;
}

std::string paramText(const ast::Param& p) {
  return p.global ? fmt::format("global {}[]", to_string(p.type)) : std::string(to_string(p.type));
}

std::string_view shapeName(LoopShape s) {
  return s == LoopShape::SingleThreadLoop ? "thread-loop" : "warp-lane-loops";
}

nlohmann::json stmtsJson(const Printer& pr, const std::vector<LStmt>& stmts) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : stmts) {
    std::ostringstream os;
    pr.stmt(os, s, 0);
    std::string text = os.str();
    while (!text.empty() && text.back() == '\n') text.pop_back();
    out.push_back(text);
  }
  return out;
}

nlohmann::json stepsJson(const Printer& pr, const std::vector<Step>& steps) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& st : steps) {
    nlohmann::json j;
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, LanePhase>) {
            j["kind"] = "phase";
            j["stmts"] = stmtsJson(pr, n.stmts);
          } else if constexpr (std::is_same_v<T, LaneExchange>) {
            j["kind"] = "exchange";
            nlohmann::json gs = nlohmann::json::array();
            for (const auto& g : n.gathers) {
              nlohmann::json gj{{"fn", spelling(g.fn)}, {"value", pr.expr(g.value)}};
              if (g.delta) gj["delta"] = pr.expr(*g.delta);
              gs.push_back(gj);
            }
            j["gathers"] = gs;
            j["apply"] = stmtsJson(pr, {n.apply});
          } else {
            j["kind"] = "warp-loop";
            j["counter"] = n.counter;
            j["lo"] = pr.expr(n.lo);
            j["hi"] = pr.expr(n.hi);
            j["step"] = pr.expr(n.step);
            j["body"] = stepsJson(pr, n.body);
          }
        },
        st.node);
    out.push_back(j);
  }
  return out;
}

nlohmann::json scheduleJson(const Printer& pr, const std::vector<Region>& rs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rs) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, RunSection>) {
            out.push_back({{"kind", "section"}, {"index", n.index}});
          } else if constexpr (std::is_same_v<T, BarrierPoint>) {
            out.push_back({{"kind", "barrier"}});
          } else {
            out.push_back({{"kind", "uniform-loop"},
                           {"counter", n.counter},
                           {"lo", pr.expr(n.lo)},
                           {"hi", pr.expr(n.hi)},
                           {"step", pr.expr(n.step)},
                           {"body", scheduleJson(pr, n.body)}});
          }
        },
        r.node);
  }
  return out;
}

nlohmann::json varsJson(const std::vector<VarInfo>& vs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& v : vs) out.push_back({{"name", v.name}, {"type", to_string(v.type)}});
  return out;
}

}  // namespace

std::string print(const LExpr& e) { return Printer().expr(e); }

std::string listing(const MpmdKernel& k) {
  const Printer pr(&k);
  std::ostringstream os;
  os << "kernel " << k.name << "  warp_mode=" << (k.warp_mode ? "on" : "off");
  if (k.warp_mode) os << " warp_size=" << k.warp_size;
  os << '\n';
  os << "  params:";
  for (const auto& p : k.params) os << ' ' << p.name << ": " << paramText(p) << ';';
  os << '\n';
  os << "  shared:";
  for (const auto& s : k.static_shared) os << ' ' << s.name << ": " << to_string(s.type) << '[' << s.length << "] (" << s.bytes() << " bytes);";
  if (k.dynamic_shared) os << " extern " << k.dynamic_shared->name << ": " << to_string(k.dynamic_shared->type) << "[];";
  os << '\n';
  os << "  expanded vars: " << joinVars(k.expanded_vars) << '\n';
  os << "  locals: " << joinVars(k.locals) << '\n';
  os << "  uniforms: " << joinVars(k.uniforms) << '\n';
  os << "  schedule:\n";
  pr.schedule(os, k.schedule, 2);
  for (std::size_t i = 0; i < k.sections.size(); ++i) {
    const Section& s = k.sections[i];
    os << "section " << i << " [" << shapeName(s.shape) << "]\n";
    if (s.shape == LoopShape::WarpLaneLoops) {
      os << "  for warp in [0, ceil(block_size / " << k.warp_size << ")):\n";
      pr.steps(os, s.steps, 2, true);
    } else {
      pr.steps(os, s.steps, 1, false);
    }
  }
  return os.str();
}

std::string dumpJson(const MpmdKernel& k) {
  const Printer pr(&k);
  nlohmann::json j;
  j["name"] = k.name;
  j["warp_mode"] = k.warp_mode;
  j["warp_size"] = k.warp_size;
  j["uses_atomics"] = k.uses_atomics;
  j["instruction_estimate"] = k.instruction_estimate;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : k.params) params.push_back({{"name", p.name}, {"type", paramText(p)}});
  j["params"] = params;
  nlohmann::json shared = nlohmann::json::array();
  for (const auto& s : k.static_shared)
    shared.push_back({{"name", s.name}, {"type", to_string(s.type)}, {"length", s.length}, {"bytes", s.bytes()}});
  j["shared_layout"] = {{"static", shared}, {"static_bytes", k.staticSharedBytes()}};
  if (k.dynamic_shared)
    j["shared_layout"]["dynamic"] = {{"name", k.dynamic_shared->name}, {"type", to_string(k.dynamic_shared->type)}};
  else
    j["shared_layout"]["dynamic"] = nullptr;
  j["expanded_vars"] = varsJson(k.expanded_vars);
  j["locals"] = varsJson(k.locals);
  j["uniforms"] = varsJson(k.uniforms);
  j["schedule"] = scheduleJson(pr, k.schedule);
  nlohmann::json secs = nlohmann::json::array();
  for (std::size_t i = 0; i < k.sections.size(); ++i) {
    secs.push_back({{"index", i},
                    {"loop_shape", shapeName(k.sections[i].shape)},
                    {"steps", stepsJson(pr, k.sections[i].steps)}});
  }
  j["sections"] = secs;
  return j.dump(2);
}

}  // namespace blockfuse::mpmd
