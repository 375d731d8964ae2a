//===- spire/nexus/adapter.hpp - External analyzer invocation -*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <tuple>
#include <vector>

#include "spire/serialize.hpp"
#include "spire/store.hpp"

namespace spire::nexus {

enum class AdapterKind { Disassembly, Decompilation, Custom };

std::string_view to_string(AdapterKind kind) noexcept;

struct AdapterDescriptor {
  std::string name;
  AdapterKind kind = AdapterKind::Custom;
  /// Run with /bin/sh -c after substituting {input_path} and {function_addr}.
  std::string invocation;
  double timeout_seconds = 10;
  bool operator==(const AdapterDescriptor&) const = default;
};

Json to_json(const AdapterDescriptor& d);
/// Throws ValidationFailed.
AdapterDescriptor adapter_from_json(const Json& j);
/// Throws ValidationFailed unless the timeout is positive, the template
/// mentions {input_path} and the name is a token.
void validate(const AdapterDescriptor& d);

struct AdapterResult {
  std::string output;  // stdout, cut at the output cap
  bool truncated = false;
  int exit_status = 0;
  double duration_seconds = 0;
  bool cached = false;
};

Json to_json(const AdapterResult& r);

/// Substitutes placeholders. Throws ValidationFailed when the template needs
/// {function_addr} and none is given.
std::string expand_invocation(const std::string& invocation, const std::string& input_path,
                              std::optional<Address> function_addr);

class AdapterRunner {
 public:
  AdapterRunner(std::vector<AdapterDescriptor> adapters, const BinaryStore& store, std::size_t max_parallel = 2,
                std::size_t output_cap = 1 << 20);

  const std::vector<AdapterDescriptor>& adapters() const noexcept { return adapters_; }

  /// Runs against a private copy of the stored bytes. Successful results are
  /// cached by (adapter, artifact, function). Throws AdapterNotFound,
  /// UnknownBinary, AdapterTimeout, or AdapterFailed (nonzero exit).
  AdapterResult run(std::string_view name, const std::string& artifact_id, std::optional<Address> function_addr);

  std::size_t processes_started() const;

 private:
  const AdapterDescriptor* find(std::string_view name) const;

  std::vector<AdapterDescriptor> adapters_;
  const BinaryStore& store_;
  std::size_t output_cap_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  mutable std::mutex mutex_;
  std::map<std::tuple<std::string, std::string, std::optional<Address>>, AdapterResult> cache_;
  std::size_t started_ = 0;
};

}  // namespace spire::nexus
