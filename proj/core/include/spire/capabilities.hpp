//===- spire/capabilities.hpp - Capability tagging rules --------*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Rules are a JSON object mapping a tag to the callee names that imply it:
//
//   { "file-io": ["fopen", "fread"], "network": ["socket"] }
//
// A function gains a tag when it calls a matching callee directly, through a
// PLT stub, or through a GOT slot bound to a named import.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "spire/model.hpp"

namespace spire {

class CapabilityRules {
 public:
  CapabilityRules() = default;

  /// Throws Error(MalformedRules) on syntax errors, non-string callees, or a
  /// tag or callee listed twice.
  static CapabilityRules parse(std::string_view json_text);
  static CapabilityRules load(const std::string& path);
  /// The shipped rule set (core/data/capability_rules.json).
  static const CapabilityRules& defaults();

  /// Tags implied by calling `callee`, sorted.
  std::vector<std::string> tags_for(std::string_view callee) const;
  const std::map<std::string, std::vector<std::string>>& rules() const noexcept { return by_tag_; }

 private:
  std::map<std::string, std::vector<std::string>> by_tag_;
  std::map<std::string, std::vector<std::string>, std::less<>> by_callee_;
};

/// "fopen@plt" -> "fopen", "puts@GLIBC_2.2.5" -> "puts".
std::string import_base_name(std::string_view name);

/// Replaces every function's capability set.
void tag_capabilities(const LoadedImage& image, ProgramModel& model, const CapabilityRules& rules);

}  // namespace spire
