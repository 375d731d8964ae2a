//===- spire/pseudocode.hpp - Rule-based pseudocode rendering --*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <functional>
#include <optional>
#include <string>

#include "spire/model.hpp"

namespace spire {

/// Resolves a call or tail-jump target to a display name.
using NameLookup = std::function<std::optional<std::string>(Address)>;

/// One statement per instruction, blocks in record order, each introduced by
/// a `loc_<hex>:` label. A cmp/test immediately followed by a conditional
/// jump is folded into that jump's `if (...) goto` line.
std::string render_pseudocode(const FunctionRecord& fn, const NameLookup& names = {});
std::string render_pseudocode(const FunctionRecord& fn, const ProgramModel& model);

}  // namespace spire
