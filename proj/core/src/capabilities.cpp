//===- capabilities.cpp - Capability rules and tagging --------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/capabilities.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <json.hpp>

#include "spire/store.hpp"

namespace spire::detail {
extern const std::string_view kDefaultCapabilityRulesJson;
}

namespace spire {

namespace {

Error malformed(const std::string& why) { return Error(ErrorCode::MalformedRules, "capability rules: " + why); }

}  // namespace

CapabilityRules CapabilityRules::parse(std::string_view json_text) {
  // nlohmann keeps the last of duplicate keys; watch key events so a
  // repeated tag is rejected instead of silently dropped.
  std::vector<std::set<std::string>> seen_keys;
  std::optional<std::string> duplicate;
  auto callback = [&](int depth, nlohmann::json::parse_event_t event, nlohmann::json& parsed) {
    using E = nlohmann::json::parse_event_t;
    if (event == E::object_start) {
      seen_keys.resize(static_cast<std::size_t>(depth) + 1);
      seen_keys[depth].clear();
    } else if (event == E::key && depth >= 1) {
      auto& keys = seen_keys[static_cast<std::size_t>(depth) - 1];
      if (!keys.insert(parsed.get<std::string>()).second && !duplicate)
        duplicate = parsed.get<std::string>();
    }
    return true;
  };

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text.begin(), json_text.end(), callback);
  } catch (const nlohmann::json::exception& e) {
    throw malformed(e.what());
  }
  if (duplicate)
    throw malformed(fmt::format("tag '{}' defined more than once", *duplicate));
  if (!doc.is_object())
    throw malformed("top level must be an object of tag -> [callee, ...]");

  CapabilityRules rules;
  for (auto& [tag, callees] : doc.items()) {
    if (tag.empty())
      throw malformed("empty tag name");
    if (!callees.is_array())
      throw malformed(fmt::format("tag '{}' must map to an array of callee names", tag));
    std::set<std::string> unique;
    auto& list = rules.by_tag_[tag];
    for (const auto& c : callees) {
      if (!c.is_string() || c.get<std::string>().empty())
        throw malformed(fmt::format("tag '{}' has a non-string or empty callee", tag));
      const std::string name = c.get<std::string>();
      if (!unique.insert(name).second)
        throw malformed(fmt::format("callee '{}' listed twice under tag '{}'", name, tag));
      list.push_back(name);
      rules.by_callee_[name].push_back(tag);
    }
  }
  for (auto& [callee, tags] : rules.by_callee_)
    std::sort(tags.begin(), tags.end());
  return rules;
}

CapabilityRules CapabilityRules::load(const std::string& path) {
  auto text = read_file(path);
  if (!text)
    throw Error(ErrorCode::Io, fmt::format("cannot read capability rules '{}'", path));
  return parse(*text);
}

const CapabilityRules& CapabilityRules::defaults() {
  static const CapabilityRules rules = parse(detail::kDefaultCapabilityRulesJson);
  return rules;
}

std::vector<std::string> CapabilityRules::tags_for(std::string_view callee) const {
  if (auto it = by_callee_.find(callee); it != by_callee_.end())
    return it->second;
  return {};
}

std::string import_base_name(std::string_view name) {
  if (name.ends_with("@plt"))
    name.remove_suffix(4);
  if (auto at = name.find('@'); at != std::string_view::npos && at > 0)
    name = name.substr(0, at);
  return std::string(name);
}

void tag_capabilities(const LoadedImage& image, ProgramModel& model, const CapabilityRules& rules) {
  std::vector<std::map<std::string, std::vector<CapabilityEvidence>>> found(model.functions.size());

  auto record = [&](FunctionId caller, const std::string& callee, Address site) {
    for (const auto& tag : rules.tags_for(callee))
      found[caller][tag].push_back({callee, site});
  };

  for (const CallEdge& e : model.call_graph.edges) {
    const FunctionRecord& callee = model.functions[e.callee];
    record(e.caller, import_base_name(callee.import_name ? *callee.import_name : callee.name), e.site);
  }

  // call qword ptr [rip+slot] against a GOT slot bound to a named import.
  for (const UnresolvedCall& u : model.call_graph.unresolved) {
    const FunctionRecord& caller = model.functions[u.caller];
    for (const auto& b : caller.blocks)
      for (const auto& insn : b.instructions) {
        if (insn.address != u.site)
          continue;
        if (auto slot = x86::rip_target(insn)) {
          if (auto it = image.import_slots().find(*slot); it != image.import_slots().end())
            record(u.caller, import_base_name(it->second), u.site);
        }
      }
  }

  for (auto& f : model.functions) {
    f.capabilities.clear();
    for (auto& [tag, evidence] : found[f.id]) {
      std::sort(evidence.begin(), evidence.end(),
                [](const auto& a, const auto& b) { return std::tie(a.site, a.callee) < std::tie(b.site, b.callee); });
      f.capabilities.push_back({tag, std::move(evidence)});
    }
  }
}

}  // namespace spire
