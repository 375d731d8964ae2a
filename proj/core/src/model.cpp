//===- model.cpp - Function discovery, CFG and call-graph recovery --------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/model.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include <fmt/format.h>

#include "spire/capabilities.hpp"

namespace spire {

using x86::FlowKind;
using x86::Instruction;

std::size_t FunctionRecord::instruction_count() const noexcept {
  std::size_t n = 0;
  for (const auto& b : blocks)
    n += b.instructions.size();
  return n;
}

const BasicBlock* FunctionRecord::block_at(Address start) const noexcept {
  for (const auto& b : blocks)
    if (b.start == start)
      return &b;
  return nullptr;
}

const FunctionRecord* ProgramModel::find(FunctionId id) const noexcept {
  return id < functions.size() ? &functions[id] : nullptr;
}

FunctionRecord* ProgramModel::find(FunctionId id) noexcept {
  return id < functions.size() ? &functions[id] : nullptr;
}

const FunctionRecord* ProgramModel::at_entry(Address entry) const noexcept {
  auto it = std::lower_bound(functions.begin(), functions.end(), entry,
                             [](const FunctionRecord& f, Address a) { return f.entry < a; });
  return it != functions.end() && it->entry == entry ? &*it : nullptr;
}

const FunctionRecord& ProgramModel::get(FunctionId id) const {
  if (const auto* f = find(id))
    return *f;
  throw Error(ErrorCode::UnknownFunction, fmt::format("unknown function id {}", id));
}

std::string heuristic_name(Address entry) { return fmt::format("sub_{:x}", entry); }

namespace {

int symbol_rank(const SymbolEntry& s) {
  if (s.source == SymbolSource::Dynsym)
    return 3;
  switch (s.binding) {
    case SymbolBinding::Global: return 0;
    case SymbolBinding::Weak: return 1;
    case SymbolBinding::Local: return 2;
  }
  return 3;
}

// Best Func symbol name per address.
std::map<Address, std::string> function_symbol_names(const LoadedImage& image) {
  std::map<Address, std::pair<int, std::string>> best;
  for (const auto& s : image.symbols()) {
    if (s.kind != SymbolKind::Func || !s.defined || s.value == 0 || s.name.empty())
      continue;
    if (!image.executable_section_at(s.value))
      continue;
    auto candidate = std::make_pair(symbol_rank(s), s.name);
    auto [it, inserted] = best.emplace(s.value, candidate);
    if (!inserted && candidate < it->second)
      it->second = candidate;
  }
  std::map<Address, std::string> out;
  for (auto& [addr, ranked] : best)
    out.emplace(addr, std::move(ranked.second));
  return out;
}

void renumber(std::vector<FunctionRecord>& functions) {
  std::sort(functions.begin(), functions.end(),
            [](const FunctionRecord& a, const FunctionRecord& b) { return a.entry < b.entry; });
  for (std::size_t i = 0; i < functions.size(); ++i)
    functions[i].id = static_cast<FunctionId>(i);
}

bool is_prologue_pair(const Instruction& push, const Instruction& mov) {
  // 55 / 48 89 e5
  static const Bytes kPush{0x55};
  static const Bytes kMov{0x48, 0x89, 0xE5};
  return push.raw_bytes == kPush && mov.raw_bytes == kMov && push.end() == mov.address;
}

bool ends_block(FlowKind kind) {
  return kind == FlowKind::JumpCond || kind == FlowKind::JumpUncond || kind == FlowKind::Return ||
         kind == FlowKind::Halt;
}

}  // namespace

std::vector<FunctionRecord> discover_functions(const LoadedImage& image) {
  std::set<Address> entries;
  std::set<Address> heuristic;  // found only by sweep or prologue matching

  if (image.executable_section_at(image.header().entry_point))
    entries.insert(image.header().entry_point);
  const auto symbol_names = function_symbol_names(image);
  for (const auto& [addr, name] : symbol_names)
    entries.insert(addr);

  for (const Section& s : image.sections()) {
    if (!s.flags.executable || !s.flags.allocated || !s.file_backed)
      continue;
    const DecodedRegion region = linear_sweep(image, s);
    const auto& insns = region.instructions;
    for (std::size_t i = 0; i < insns.size(); ++i) {
      const Instruction& insn = insns[i];
      if (insn.flow.kind == FlowKind::Call && insn.flow.target && image.executable_section_at(*insn.flow.target))
        heuristic.insert(*insn.flow.target);
      if (i + 1 < insns.size() && is_prologue_pair(insn, insns[i + 1]))
        heuristic.insert(insn.address);
    }
  }
  entries.insert(heuristic.begin(), heuristic.end());

  std::vector<FunctionRecord> out;
  for (Address entry : entries) {
    FunctionRecord fn;
    fn.entry = entry;
    if (auto it = symbol_names.find(entry); it != symbol_names.end()) {
      fn.name = it->second;
      fn.name_origin = NameOrigin::Symbol;
    } else {
      fn.name = heuristic_name(entry);
      fn.name_origin = NameOrigin::Heuristic;
    }
    out.push_back(std::move(fn));
  }
  renumber(out);
  return out;
}

FunctionRecord build_cfg(const LoadedImage& image, FunctionRecord fn, const std::set<Address>& function_entries) {
  const Address entry = fn.entry;
  auto is_foreign_entry = [&](Address a) { return a != entry && function_entries.count(a) != 0; };
  DecodedRegion region = recursive_descent(image, entry, is_foreign_entry);
  auto& insns = region.instructions;

  std::set<Address> decoded;
  for (const auto& insn : insns)
    decoded.insert(insn.address);

  std::set<Address> leaders{entry};
  for (std::size_t i = 0; i < insns.size(); ++i) {
    const Instruction& insn = insns[i];
    if (insn.flow.kind == FlowKind::JumpCond || insn.flow.kind == FlowKind::JumpUncond) {
      if (insn.flow.target && decoded.count(*insn.flow.target))
        leaders.insert(*insn.flow.target);
    }
    if (ends_block(insn.flow.kind) && decoded.count(insn.end()))
      leaders.insert(insn.end());
    if (i > 0 && insns[i - 1].end() != insn.address)
      leaders.insert(insn.address);
  }

  std::vector<BasicBlock> blocks;
  for (std::size_t i = 0; i < insns.size(); ++i) {
    Instruction& insn = insns[i];
    if (blocks.empty() || leaders.count(insn.address))
      blocks.push_back(BasicBlock{insn.address, {}, {}, std::nullopt});
    blocks.back().instructions.push_back(std::move(insn));
  }

  for (BasicBlock& block : blocks) {
    const Instruction& last = block.instructions.back();
    const Address next = last.end();
    auto local = [&](Address a) { return leaders.count(a) != 0; };
    switch (last.flow.kind) {
      case FlowKind::JumpCond:
        if (last.flow.target) {
          if (local(*last.flow.target))
            block.successors.push_back({*last.flow.target, EdgeKind::Taken});
          else if (is_foreign_entry(*last.flow.target))
            block.tail_call = *last.flow.target;
        }
        if (local(next))
          block.successors.push_back({next, EdgeKind::FallThrough});
        break;
      case FlowKind::JumpUncond:
        if (last.flow.target) {
          if (local(*last.flow.target))
            block.successors.push_back({*last.flow.target, EdgeKind::Uncond});
          else if (is_foreign_entry(*last.flow.target))
            block.tail_call = *last.flow.target;
        }
        break;
      case FlowKind::Sequential:
      case FlowKind::Call:
        if (local(next))
          block.successors.push_back({next, EdgeKind::FallThrough});
        break;
      case FlowKind::Return:
      case FlowKind::Halt:
        break;
    }
  }

  std::stable_partition(blocks.begin(), blocks.end(), [&](const BasicBlock& b) { return b.start == entry; });
  fn.blocks = std::move(blocks);
  return fn;
}

namespace {

void build_all_cfgs(const LoadedImage& image, std::vector<FunctionRecord>& functions) {
  std::set<Address> entries;
  for (const auto& f : functions)
    entries.insert(f.entry);
  for (auto& f : functions)
    f = build_cfg(image, std::move(f), entries);
}

// A stub is a single `jmp qword ptr [rip+disp]` whose slot is bound to an
// import by a relocation.
void name_plt_stubs(const LoadedImage& image, std::vector<FunctionRecord>& functions) {
  for (auto& f : functions) {
    if (f.blocks.size() != 1 || f.blocks[0].instructions.size() != 1)
      continue;
    const Instruction& insn = f.blocks[0].instructions[0];
    if (insn.flow.kind != FlowKind::JumpUncond || insn.flow.target)
      continue;
    const auto slot = x86::rip_target(insn);
    if (!slot)
      continue;
    auto it = image.import_slots().find(*slot);
    if (it == image.import_slots().end())
      continue;
    f.import_name = import_base_name(it->second);
    if (f.name_origin == NameOrigin::Heuristic) {
      f.name = *f.import_name + "@plt";
      f.name_origin = NameOrigin::Symbol;
    }
  }
}

}  // namespace

CallGraph build_call_graph(const LoadedImage& image, std::vector<FunctionRecord>& functions) {
  // Calls discovered by descent but missed by the sweep (e.g. code after a
  // gap) introduce new functions; iterate until the set is closed.
  while (true) {
    std::set<Address> entries;
    for (const auto& f : functions)
      entries.insert(f.entry);
    std::set<Address> fresh;
    for (const auto& f : functions)
      for (const auto& b : f.blocks)
        for (const auto& insn : b.instructions)
          if (insn.flow.kind == FlowKind::Call && insn.flow.target && !entries.count(*insn.flow.target) &&
              image.executable_section_at(*insn.flow.target))
            fresh.insert(*insn.flow.target);
    if (fresh.empty())
      break;
    for (Address a : fresh) {
      FunctionRecord f;
      f.entry = a;
      f.name = heuristic_name(a);
      f.name_origin = NameOrigin::Heuristic;
      functions.push_back(std::move(f));
    }
    renumber(functions);
    build_all_cfgs(image, functions);
  }
  renumber(functions);
  name_plt_stubs(image, functions);

  std::map<Address, FunctionId> by_entry;
  for (const auto& f : functions)
    by_entry.emplace(f.entry, f.id);

  CallGraph graph;
  for (const auto& f : functions) {
    graph.nodes.push_back(f.id);
    for (const auto& b : f.blocks) {
      for (const auto& insn : b.instructions) {
        if (insn.flow.kind != FlowKind::Call)
          continue;
        auto it = insn.flow.target ? by_entry.find(*insn.flow.target) : by_entry.end();
        if (it != by_entry.end())
          graph.edges.push_back({f.id, it->second, insn.address, false});
        else
          graph.unresolved.push_back({f.id, insn.address});
      }
      if (b.tail_call) {
        if (auto it = by_entry.find(*b.tail_call); it != by_entry.end())
          graph.edges.push_back({f.id, it->second, b.instructions.back().address, true});
      }
    }
  }
  std::sort(graph.edges.begin(), graph.edges.end(), [](const CallEdge& a, const CallEdge& b) {
    return std::tie(a.caller, a.site, a.callee) < std::tie(b.caller, b.site, b.callee);
  });
  std::sort(graph.unresolved.begin(), graph.unresolved.end(), [](const UnresolvedCall& a, const UnresolvedCall& b) {
    return std::tie(a.caller, a.site) < std::tie(b.caller, b.site);
  });
  return graph;
}

ProgramModel analyze_program(const LoadedImage& image, const CapabilityRules& rules) {
  ProgramModel model;
  model.functions = discover_functions(image);
  build_all_cfgs(image, model.functions);
  model.call_graph = build_call_graph(image, model.functions);
  tag_capabilities(image, model, rules);
  return model;
}

bool is_valid_identifier(std::string_view name) noexcept {
  if (name.empty())
    return false;
  auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_'; };
  if (!alpha(name[0]))
    return false;
  return std::all_of(name.begin() + 1, name.end(), [&](char c) { return alpha(c) || (c >= '0' && c <= '9'); });
}

const FunctionRecord& rename_function(ProgramModel& model, FunctionId id, std::string_view new_name) {
  FunctionRecord* target = model.find(id);
  if (!target)
    throw Error(ErrorCode::UnknownFunction, fmt::format("unknown function id {}", id));
  if (!is_valid_identifier(new_name))
    throw Error(ErrorCode::InvalidIdentifier,
                fmt::format("'{}' is not an identifier ([A-Za-z_][A-Za-z0-9_]*)", new_name));
  for (const auto& f : model.functions)
    if (f.id != id && f.name == new_name)
      throw Error(ErrorCode::DuplicateName, fmt::format("function {} is already named '{}'", f.id, new_name));
  target->name = std::string(new_name);
  target->name_origin = NameOrigin::UserRename;
  return *target;
}

}  // namespace spire
