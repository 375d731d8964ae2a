//===- spire/error.hpp - Error codes shared by every layer ----*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace spire {

enum class ErrorCode {
  // object-loader
  NotElf64,
  TruncatedHeader,
  MalformedTable,
  UnknownBinary,
  // disasm-core
  UnknownOpcode,
  Truncated,
  EntryOutOfRange,
  // program-model
  MalformedRules,
  DuplicateName,
  InvalidIdentifier,
  UnknownFunction,
  EmptyQuery,
  // layout-engine
  CycleDetected,
  // nexus-service
  RevisionConflict,
  ValidationFailed,
  UnknownWorkspace,
  AdapterTimeout,
  AdapterFailed,
  AdapterNotFound,
  PortInUse,
  StoreUnavailable,
  BadRequest,
  // generic
  Io,
  Internal,
};

/// Stable identifier used in JSON problem documents, e.g. "NotElf64".
std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  /// Extra context for problem documents, e.g. the current revision.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace spire
