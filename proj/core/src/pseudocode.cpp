//===- pseudocode.cpp - Rule-based pseudocode rendering -------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/pseudocode.hpp"

#include <fmt/format.h>

namespace spire {

namespace {

using x86::FlowKind;
using x86::Instruction;

std::string label(Address a) { return fmt::format("loc_{:x}", a); }

std::string operand(const Instruction& insn, std::size_t i) {
  Instruction single = insn;
  single.operands = {insn.operands.at(i)};
  return x86::render_operands(single);
}

struct Relation {
  std::string_view op;
  bool is_unsigned = false;
};

std::optional<Relation> relation_for(std::string_view jcc) {
  if (jcc == "je") return Relation{"=="};
  if (jcc == "jne") return Relation{"!="};
  if (jcc == "jl") return Relation{"<"};
  if (jcc == "jle") return Relation{"<="};
  if (jcc == "jg") return Relation{">"};
  if (jcc == "jge") return Relation{">="};
  if (jcc == "jb") return Relation{"<", true};
  if (jcc == "jbe") return Relation{"<=", true};
  if (jcc == "ja") return Relation{">", true};
  if (jcc == "jae") return Relation{">=", true};
  return std::nullopt;
}

// Condition text for `jcc` given the flag-setting instruction before it, or
// nullopt when the pair does not fold.
std::optional<std::string> folded_condition(const Instruction& setter, const Instruction& jcc) {
  auto rel = relation_for(jcc.mnemonic);
  if (!rel || setter.operands.size() != 2)
    return std::nullopt;
  const std::string a = operand(setter, 0);
  const std::string b = operand(setter, 1);
  if (setter.mnemonic == "cmp") {
    if (rel->is_unsigned)
      return fmt::format("(unsigned){} {} (unsigned){}", a, rel->op, b);
    return fmt::format("{} {} {}", a, rel->op, b);
  }
  if (setter.mnemonic == "test" && (rel->op == "==" || rel->op == "!=")) {
    if (a == b)
      return fmt::format("{} {} 0", a, rel->op);
    return fmt::format("({} & {}) {} 0", a, b, rel->op);
  }
  return std::nullopt;
}

bool sets_flags_for_fold(const Instruction& insn) { return insn.mnemonic == "cmp" || insn.mnemonic == "test"; }

class Renderer {
 public:
  Renderer(const FunctionRecord& fn, const NameLookup& names) : fn_(fn), names_(names) {}

  std::string run() {
    out_ += fmt::format("{}() {{\n", fn_.name);
    for (const BasicBlock& b : fn_.blocks) {
      out_ += label(b.start) + ":\n";
      const auto& insns = b.instructions;
      for (std::size_t i = 0; i < insns.size(); ++i) {
        const Instruction& insn = insns[i];
        if (sets_flags_for_fold(insn) && i + 1 < insns.size() && insns[i + 1].flow.kind == FlowKind::JumpCond &&
            folded_condition(insn, insns[i + 1])) {
          continue;  // rendered by the jump
        }
        const Instruction* setter = i > 0 && sets_flags_for_fold(insns[i - 1]) ? &insns[i - 1] : nullptr;
        line(statement(insn, setter));
      }
    }
    out_ += "}\n";
    return out_;
  }

 private:
  void line(const std::string& text) { out_ += "    " + text + "\n"; }

  std::string callee_name(Address target) const {
    if (names_)
      if (auto n = names_(target))
        return *n;
    return heuristic_name(target);
  }

  bool is_local(Address target) const { return fn_.block_at(target) != nullptr; }

  std::string goto_or_tail(Address target) const {
    if (is_local(target))
      return "goto " + label(target);
    return fmt::format("return {}()", callee_name(target));
  }

  std::string statement(const Instruction& insn, const Instruction* setter) const {
    const auto& m = insn.mnemonic;
    const std::size_t n = insn.operands.size();
    if ((m == "mov" || m == "movabs") && n == 2)
      return fmt::format("{} = {}", operand(insn, 0), operand(insn, 1));
    if (m == "lea" && n == 2)
      return fmt::format("{} = &{}", operand(insn, 0), operand(insn, 1));
    if (n == 2) {
      if (m == "add") return fmt::format("{} += {}", operand(insn, 0), operand(insn, 1));
      if (m == "sub") return fmt::format("{} -= {}", operand(insn, 0), operand(insn, 1));
      if (m == "xor") return fmt::format("{} ^= {}", operand(insn, 0), operand(insn, 1));
    }
    if (m == "push" && n == 1)
      return fmt::format("push({})", operand(insn, 0));
    if (m == "pop" && n == 1)
      return fmt::format("{} = pop()", operand(insn, 0));
    if (m == "syscall")
      return "syscall()";

    switch (insn.flow.kind) {
      case FlowKind::Call:
        if (insn.flow.target)
          return callee_name(*insn.flow.target) + "()";
        return fmt::format("(*{})()", operand(insn, 0));
      case FlowKind::JumpUncond:
        if (insn.flow.target)
          return goto_or_tail(*insn.flow.target);
        return fmt::format("goto *{}", operand(insn, 0));
      case FlowKind::JumpCond: {
        std::optional<std::string> cond;
        if (setter)
          cond = folded_condition(*setter, insn);
        if (!cond)
          cond = "flags." + m.substr(1);
        return fmt::format("if ({}) {}", *cond, goto_or_tail(*insn.flow.target));
      }
      case FlowKind::Return:
        return "return";
      default:
        break;
    }
    return x86::render(insn);
  }

  const FunctionRecord& fn_;
  const NameLookup& names_;
  std::string out_;
};

}  // namespace

std::string render_pseudocode(const FunctionRecord& fn, const NameLookup& names) {
  return Renderer(fn, names).run();
}

std::string render_pseudocode(const FunctionRecord& fn, const ProgramModel& model) {
  NameLookup lookup = [&model](Address a) -> std::optional<std::string> {
    if (const auto* f = model.at_entry(a))
      return f->name;
    return std::nullopt;
  };
  return render_pseudocode(fn, lookup);
}

}  // namespace spire
