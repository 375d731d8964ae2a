//===- spire/model.hpp - Functions, blocks, CFGs, call graph ---*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "spire/disasm.hpp"
#include "spire/elf.hpp"

namespace spire {

using FunctionId = std::uint32_t;

enum class NameOrigin { Symbol, Heuristic, UserRename };
enum class EdgeKind { FallThrough, Taken, Uncond };

struct Successor {
  Address target = 0;
  EdgeKind kind = EdgeKind::FallThrough;
  bool operator==(const Successor&) const = default;
};

struct BasicBlock {
  Address start = 0;
  std::vector<x86::Instruction> instructions;
  /// Intra-function edges only; every target is a block start in the same
  /// function. Taken precedes FallThrough.
  std::vector<Successor> successors;
  /// Set when the block ends in a jump to another function's entry. The jump
  /// leaves the CFG and shows up as a call-graph edge flagged `tail`.
  std::optional<Address> tail_call;

  Address end() const noexcept { return instructions.empty() ? start : instructions.back().end(); }
  bool operator==(const BasicBlock&) const = default;
};

struct CapabilityEvidence {
  std::string callee;
  Address site = 0;
  bool operator==(const CapabilityEvidence&) const = default;
};

struct CapabilityTag {
  std::string tag;
  std::vector<CapabilityEvidence> evidence;  // never empty
  bool operator==(const CapabilityTag&) const = default;
};

struct FunctionRecord {
  FunctionId id = 0;
  Address entry = 0;
  std::string name;
  NameOrigin name_origin = NameOrigin::Heuristic;
  /// Entry block first, the rest by ascending start address.
  std::vector<BasicBlock> blocks;
  std::vector<CapabilityTag> capabilities;  // sorted by tag
  /// Imported symbol behind a PLT stub ("fopen" for "fopen@plt").
  std::optional<std::string> import_name;

  std::size_t instruction_count() const noexcept;
  const BasicBlock* block_at(Address start) const noexcept;
  bool operator==(const FunctionRecord&) const = default;
};

struct CallEdge {
  FunctionId caller = 0;
  FunctionId callee = 0;
  Address site = 0;
  bool tail = false;
  bool operator==(const CallEdge&) const = default;
};

struct UnresolvedCall {
  FunctionId caller = 0;
  Address site = 0;
  bool operator==(const UnresolvedCall&) const = default;
};

struct CallGraph {
  std::vector<FunctionId> nodes;
  std::vector<CallEdge> edges;            // ordered by (caller, site)
  std::vector<UnresolvedCall> unresolved;  // ordered by (caller, site)
  bool operator==(const CallGraph&) const = default;
};

/// Everything recovered for one binary. `functions` is sorted by entry and
/// functions[i].id == i.
struct ProgramModel {
  std::vector<FunctionRecord> functions;
  CallGraph call_graph;

  const FunctionRecord* find(FunctionId id) const noexcept;
  FunctionRecord* find(FunctionId id) noexcept;
  const FunctionRecord* at_entry(Address entry) const noexcept;
  /// Throws Error(UnknownFunction).
  const FunctionRecord& get(FunctionId id) const;

  bool operator==(const ProgramModel&) const = default;
};

/// "sub_401020".
std::string heuristic_name(Address entry);

/// Entry point, defined Func symbols, call targets seen by a linear sweep of
/// executable sections, and push rbp; mov rbp, rsp prologues. Deduplicated,
/// sorted by entry, ids assigned in that order, blocks left empty.
std::vector<FunctionRecord> discover_functions(const LoadedImage& image);

/// Populates `fn.blocks` by recursive descent from its entry. Jumps into any
/// address in `function_entries` other than fn.entry become tail calls and
/// are not followed. Propagates Error(EntryOutOfRange).
FunctionRecord build_cfg(const LoadedImage& image, FunctionRecord fn,
                         const std::set<Address>& function_entries = {});

/// Adds a Heuristic function for every direct call whose target is code but
/// not yet a function entry (repeating until no more appear), renumbers
/// `functions` by entry, names PLT stubs, and returns the call graph over
/// the final set. CFGs must already be built.
CallGraph build_call_graph(const LoadedImage& image, std::vector<FunctionRecord>& functions);

class CapabilityRules;

/// discover -> CFG -> call graph -> capabilities.
ProgramModel analyze_program(const LoadedImage& image, const CapabilityRules& rules);

bool is_valid_identifier(std::string_view name) noexcept;

/// Applies a user rename. Entries, blocks and edges are untouched. Throws
/// UnknownFunction, InvalidIdentifier, or DuplicateName.
const FunctionRecord& rename_function(ProgramModel& model, FunctionId id, std::string_view new_name);

}  // namespace spire
