//===- spire/disasm.hpp - Linear sweep and recursive descent ---*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <functional>
#include <vector>

#include "spire/elf.hpp"
#include "spire/x86.hpp"

namespace spire {

struct Gap {
  Address address = 0;
  std::uint8_t byte = 0;
  bool operator==(const Gap&) const = default;
};

struct DecodedRegion {
  Address start = 0;
  std::vector<x86::Instruction> instructions;  // ascending address
  std::vector<Gap> gaps;                       // ascending address

  bool operator==(const DecodedRegion&) const = default;
};

/// Sweeps `bytes` as if loaded at `start`. Undecodable bytes become 1-byte
/// gaps and decoding resumes at the next byte; a trailing truncated
/// instruction is treated the same way.
DecodedRegion linear_sweep(ByteView bytes, Address start);
DecodedRegion linear_sweep(const LoadedImage& image, const Section& section);

/// Worklist disassembly from `entry`. Follows fall-through, both sides of
/// conditional jumps, direct jump targets, and the return path of calls.
/// Paths end at ret/halt, undecodable bytes (recorded as gaps), indirect
/// jumps, and addresses outside executable sections. `stop_at` lets callers
/// fence off addresses (other functions' entries) that must not be entered
/// by a jump; the entry itself is always decoded.
///
/// Throws Error(EntryOutOfRange) when `entry` is not in an executable section.
DecodedRegion recursive_descent(const LoadedImage& image, Address entry,
                                const std::function<bool(Address)>& stop_at = {});

}  // namespace spire
