//===- spire/analysis.hpp - Per-binary analysis pipeline -------*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <atomic>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "spire/capabilities.hpp"
#include "spire/elf.hpp"
#include "spire/model.hpp"
#include "spire/serialize.hpp"
#include "spire/store.hpp"

namespace spire {

/// Aggregate counts shared by `spire analyze` and GET /api/binaries/{id}/summary.
struct AnalysisSummary {
  std::string artifact_id;
  std::size_t function_count = 0;
  std::size_t block_count = 0;
  std::size_t instruction_count = 0;
  std::size_t call_edge_count = 0;       // direct calls, tail calls excluded
  std::size_t tail_call_edge_count = 0;
  std::size_t unresolved_call_count = 0;
  std::map<std::string, std::size_t> tags;  // tag -> number of tagged functions

  bool operator==(const AnalysisSummary&) const = default;
};

AnalysisSummary summarize(const std::string& artifact_id, const ProgramModel& model);
Json to_json(const AnalysisSummary& s);

/// Immutable result of running the pipeline over one stored binary.
class Analysis {
 public:
  Analysis(BinaryArtifact artifact, std::shared_ptr<const Bytes> bytes, const CapabilityRules& rules);

  const BinaryArtifact& artifact() const noexcept { return artifact_; }
  const LoadedImage& image() const noexcept { return image_; }
  const ProgramModel& model() const noexcept { return model_; }
  AnalysisSummary summary() const { return summarize(artifact_.id, model_); }

 private:
  BinaryArtifact artifact_;
  std::shared_ptr<const Bytes> bytes_;
  LoadedImage image_;
  ProgramModel model_;
};

/// Runs the pipeline lazily, at most once per artifact even under concurrent
/// requests (later callers wait for the first), and writes the JSON products
/// (functions.json, cfg_<id>.json, callgraph.json, capabilities.json,
/// summary.json) into the store once.
class AnalysisCache {
 public:
  AnalysisCache(const BinaryStore& store, CapabilityRules rules);

  /// Throws UnknownBinary, or whatever the loader raised.
  std::shared_ptr<const Analysis> get(const std::string& id);

  std::size_t pipeline_runs() const noexcept { return runs_.load(); }
  /// Products found on disk whose content differed from a fresh run.
  std::size_t cache_mismatches() const noexcept { return mismatches_.load(); }
  const CapabilityRules& rules() const noexcept { return rules_; }

 private:
  std::shared_ptr<const Analysis> run(const std::string& id);
  void persist(const Analysis& analysis);

  const BinaryStore& store_;
  CapabilityRules rules_;
  std::mutex mutex_;
  std::map<std::string, std::shared_future<std::shared_ptr<const Analysis>>> entries_;
  std::atomic<std::size_t> runs_{0};
  std::atomic<std::size_t> mismatches_{0};
};

}  // namespace spire
