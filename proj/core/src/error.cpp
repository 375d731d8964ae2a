//===- error.cpp ----------------------------------------------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/error.hpp"

namespace spire {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NotElf64: return "NotElf64";
    case ErrorCode::TruncatedHeader: return "TruncatedHeader";
    case ErrorCode::MalformedTable: return "MalformedTable";
    case ErrorCode::UnknownBinary: return "UnknownBinary";
    case ErrorCode::UnknownOpcode: return "UnknownOpcode";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::EntryOutOfRange: return "EntryOutOfRange";
    case ErrorCode::MalformedRules: return "MalformedRules";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::InvalidIdentifier: return "InvalidIdentifier";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::RevisionConflict: return "RevisionConflict";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::UnknownWorkspace: return "UnknownWorkspace";
    case ErrorCode::AdapterTimeout: return "AdapterTimeout";
    case ErrorCode::AdapterFailed: return "AdapterFailed";
    case ErrorCode::AdapterNotFound: return "AdapterNotFound";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::StoreUnavailable: return "StoreUnavailable";
    case ErrorCode::BadRequest: return "BadRequest";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

}  // namespace spire
