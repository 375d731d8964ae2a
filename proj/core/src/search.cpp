//===- search.cpp ---------------------------------------------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/search.hpp"

#include <algorithm>

namespace spire {

std::vector<InstanceMatch> find_instances(const ProgramModel& model, const InstanceQuery& query) {
  if (query.empty())
    throw Error(ErrorCode::EmptyQuery, "search needs at least one of mnemonic, operand text, or bytes");

  std::vector<InstanceMatch> out;
  for (const FunctionRecord& f : model.functions) {
    std::vector<InstanceMatch> local;
    for (const BasicBlock& b : f.blocks) {
      for (const x86::Instruction& insn : b.instructions) {
        if (query.mnemonic && insn.mnemonic != *query.mnemonic)
          continue;
        if (query.operand_text && x86::render_operands(insn).find(*query.operand_text) == std::string::npos)
          continue;
        if (query.bytes && (query.bytes->empty() ||
                            std::search(insn.raw_bytes.begin(), insn.raw_bytes.end(), query.bytes->begin(),
                                        query.bytes->end()) == insn.raw_bytes.end()))
          continue;
        local.push_back({f.id, insn.address, x86::render(insn)});
      }
    }
    std::sort(local.begin(), local.end(), [](const auto& a, const auto& b) { return a.address < b.address; });
    out.insert(out.end(), local.begin(), local.end());
  }
  return out;
}

}  // namespace spire
