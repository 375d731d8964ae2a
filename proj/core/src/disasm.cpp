//===- disasm.cpp - Linear sweep and recursive descent drivers ------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/disasm.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>

namespace spire {

DecodedRegion linear_sweep(ByteView bytes, Address start) {
  DecodedRegion region;
  region.start = start;
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const Address addr = start + offset;
    auto result = x86::try_decode(bytes.subspan(offset), addr);
    if (auto* insn = std::get_if<x86::Instruction>(&result)) {
      offset += insn->length;
      region.instructions.push_back(std::move(*insn));
    } else {
      region.gaps.push_back({addr, bytes[offset]});
      ++offset;
    }
  }
  return region;
}

DecodedRegion linear_sweep(const LoadedImage& image, const Section& section) {
  return linear_sweep(image.section_bytes(section), section.virtual_address);
}

DecodedRegion recursive_descent(const LoadedImage& image, Address entry, const std::function<bool(Address)>& stop_at) {
  if (!image.executable_section_at(entry))
    throw Error(ErrorCode::EntryOutOfRange,
                fmt::format("entry {} is not inside an executable section", hex_address(entry)));

  DecodedRegion region;
  region.start = entry;
  std::set<Address> visited;
  std::set<Address> gap_addrs;
  std::vector<Address> worklist{entry};

  auto enqueue = [&](Address target) {
    if (visited.count(target) || gap_addrs.count(target))
      return;
    if (stop_at && stop_at(target))
      return;
    worklist.push_back(target);
  };

  while (!worklist.empty()) {
    Address addr = worklist.back();
    worklist.pop_back();
    while (true) {
      if (visited.count(addr) || gap_addrs.count(addr))
        break;
      const Section* section = image.executable_section_at(addr);
      if (!section)
        break;
      const ByteView window = image.section_bytes(*section).subspan(addr - section->virtual_address);
      auto result = x86::try_decode(window, addr);
      if (auto* failure = std::get_if<x86::DecodeFailure>(&result)) {
        (void)failure;
        gap_addrs.insert(addr);
        region.gaps.push_back({addr, window[0]});
        break;
      }
      auto& insn = std::get<x86::Instruction>(result);
      visited.insert(addr);
      const x86::Flow flow = insn.flow;
      const Address next = insn.end();
      region.instructions.push_back(std::move(insn));

      bool fall_through = false;
      switch (flow.kind) {
        case x86::FlowKind::Sequential:
        case x86::FlowKind::Call:
          fall_through = true;
          break;
        case x86::FlowKind::JumpCond:
          if (flow.target)
            enqueue(*flow.target);
          fall_through = true;
          break;
        case x86::FlowKind::JumpUncond:
          if (flow.target)
            enqueue(*flow.target);
          break;
        case x86::FlowKind::Return:
        case x86::FlowKind::Halt:
          break;
      }
      if (!fall_through || (stop_at && stop_at(next)))
        break;
      addr = next;
    }
  }

  std::sort(region.instructions.begin(), region.instructions.end(),
            [](const auto& a, const auto& b) { return a.address < b.address; });
  std::sort(region.gaps.begin(), region.gaps.end(), [](const Gap& a, const Gap& b) { return a.address < b.address; });
  return region;
}

}  // namespace spire
