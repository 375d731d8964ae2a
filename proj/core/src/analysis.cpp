//===- analysis.cpp -------------------------------------------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/analysis.hpp"

#include <fmt/format.h>

namespace spire {

AnalysisSummary summarize(const std::string& artifact_id, const ProgramModel& model) {
  AnalysisSummary s;
  s.artifact_id = artifact_id;
  s.function_count = model.functions.size();
  for (const auto& f : model.functions) {
    s.block_count += f.blocks.size();
    s.instruction_count += f.instruction_count();
    for (const auto& t : f.capabilities)
      ++s.tags[t.tag];
  }
  for (const auto& e : model.call_graph.edges)
    ++(e.tail ? s.tail_call_edge_count : s.call_edge_count);
  s.unresolved_call_count = model.call_graph.unresolved.size();
  return s;
}

Json to_json(const AnalysisSummary& s) {
  return Json{{"artifact_id", s.artifact_id},
              {"function_count", s.function_count},
              {"block_count", s.block_count},
              {"instruction_count", s.instruction_count},
              {"edge_counts",
               {{"call", s.call_edge_count}, {"tail_call", s.tail_call_edge_count},
                {"unresolved", s.unresolved_call_count}}},
              {"tags", s.tags}};
}

Analysis::Analysis(BinaryArtifact artifact, std::shared_ptr<const Bytes> bytes, const CapabilityRules& rules)
    : artifact_(std::move(artifact)), bytes_(std::move(bytes)), image_(ByteView(*bytes_)) {
  model_ = analyze_program(image_, rules);
}

AnalysisCache::AnalysisCache(const BinaryStore& store, CapabilityRules rules)
    : store_(store), rules_(std::move(rules)) {}

std::shared_ptr<const Analysis> AnalysisCache::get(const std::string& id) {
  std::promise<std::shared_ptr<const Analysis>> promise;
  std::shared_future<std::shared_ptr<const Analysis>> future;
  bool owner = false;
  {
    std::lock_guard guard(mutex_);
    auto it = entries_.find(id);
    if (it != entries_.end()) {
      future = it->second;
    } else {
      future = promise.get_future().share();
      entries_.emplace(id, future);
      owner = true;
    }
  }
  if (owner) {
    try {
      promise.set_value(run(id));
    } catch (...) {
      // Failures are not cached: a later request may succeed (e.g. after
      // the binary is ingested).
      {
        std::lock_guard guard(mutex_);
        entries_.erase(id);
      }
      promise.set_exception(std::current_exception());
    }
  }
  return future.get();
}

std::shared_ptr<const Analysis> AnalysisCache::run(const std::string& id) {
  BinaryArtifact artifact = store_.get(id);
  auto bytes = store_.bytes(id);
  ++runs_;
  auto analysis = std::make_shared<const Analysis>(std::move(artifact), std::move(bytes), rules_);
  persist(*analysis);
  return analysis;
}

void AnalysisCache::persist(const Analysis& analysis) {
  const std::string& id = analysis.artifact().id;
  auto put = [&](const std::string& name, const Json& body) {
    const std::string text = body.dump(2) + "\n";
    if (!store_.write_product_once(id, name, text)) {
      if (store_.read_product(id, name) != text)
        ++mismatches_;
    }
  };
  const ProgramModel& model = analysis.model();
  Json functions = Json::array();
  for (const auto& f : model.functions) {
    functions.push_back(function_summary_json(f));
    put(fmt::format("cfg_{}.json", f.id), function_cfg_json(f));
  }
  put("functions.json", functions);
  put("callgraph.json", call_graph_json(model));
  put("capabilities.json", capabilities_json(model));
  put("summary.json", to_json(analysis.summary()));
}

}  // namespace spire
