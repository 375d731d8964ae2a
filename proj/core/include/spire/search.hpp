//===- spire/search.hpp - "Find all instances" over disassembly -*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spire/model.hpp"

namespace spire {

struct InstanceQuery {
  std::optional<std::string> mnemonic;      // exact
  std::optional<std::string> operand_text;  // substring of rendered operands
  std::optional<Bytes> bytes;               // contiguous run inside raw_bytes

  bool empty() const noexcept { return !mnemonic && !operand_text && !bytes; }
};

struct InstanceMatch {
  FunctionId function = 0;
  Address address = 0;
  std::string text;  // x86::render of the instruction
  bool operator==(const InstanceMatch&) const = default;
};

/// All set fields must match. Results ordered by (function, address).
/// Throws Error(EmptyQuery) when no field is set.
std::vector<InstanceMatch> find_instances(const ProgramModel& model, const InstanceQuery& query);

}  // namespace spire
