//===- spire/nexus/workspace.hpp - Persistent analyst workspaces -*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spire/model.hpp"
#include "spire/serialize.hpp"

namespace spire::nexus {

enum class SlateKind { Header, Strings, Disasm, Pseudocode, Cfg, CallGraph, Notepad, SearchResults };

std::string_view to_string(SlateKind kind) noexcept;
std::optional<SlateKind> slate_kind_from_string(std::string_view text) noexcept;
/// Disasm, Pseudocode and Cfg need a function id.
bool is_function_scoped(SlateKind kind) noexcept;

struct SlateTarget {
  std::optional<std::string> binary;  // only the Notepad may omit it
  std::optional<FunctionId> function;
  bool operator==(const SlateTarget&) const = default;
};

struct Slate {
  std::string id;
  SlateKind kind = SlateKind::Notepad;
  SlateTarget target;
  std::array<double, 3> position{};  // x, y, z
  std::array<double, 2> size{1, 1};  // w, h
  double scroll_offset = 0;
  bool operator==(const Slate&) const = default;
};

struct Annotation {
  std::optional<std::string> rename;
  std::optional<std::string> comment;
  std::optional<std::string> color;  // "#rrggbb"
  bool operator==(const Annotation&) const = default;
};

/// "<binary id>:<function id>", the key of annotations and collapsed nodes.
std::string function_key(std::string_view binary, FunctionId fid);
std::optional<std::pair<std::string, FunctionId>> parse_function_key(std::string_view key);

struct Workspace {
  std::string id;
  std::uint64_t revision = 0;
  std::set<std::string> binaries;
  std::vector<Slate> slates;
  std::string notes;
  std::map<std::string, Annotation> annotations;  // by function key
  std::set<std::string> collapsed;                // function keys

  bool operator==(const Workspace&) const = default;
};

Json to_json(const Workspace& ws);
/// Throws Error(ValidationFailed) on shape errors.
Workspace workspace_from_json(const Json& j);

bool is_valid_token(std::string_view token) noexcept;

/// Throws Error(ValidationFailed) naming the first broken invariant.
void validate(const Workspace& ws);

/// One JSON file per workspace under `dir`. Writes are serialized per store
/// and guarded by the revision check; each write replaces the file
/// atomically.
class WorkspaceStore {
 public:
  /// Extra check run on every save, e.g. "binary exists in the store".
  using BinaryCheck = std::function<bool(const std::string&)>;

  explicit WorkspaceStore(std::filesystem::path dir, BinaryCheck binary_exists = {});

  std::optional<Workspace> find(std::string_view id) const;
  /// Throws UnknownWorkspace.
  Workspace get(std::string_view id) const;

  /// Creation needs expected_revision == 0. Throws RevisionConflict when
  /// expected_revision differs from the stored revision, ValidationFailed
  /// when `ws` breaks an invariant. Returns the stored document.
  Workspace save(Workspace ws, std::uint64_t expected_revision);

  /// Read-modify-write under the store lock; the revision check cannot fail.
  Workspace update(std::string_view id, const std::function<void(Workspace&)>& mutate);

 private:
  std::filesystem::path path_for(std::string_view id) const;
  Workspace save_locked(Workspace ws, std::uint64_t expected_revision);

  std::filesystem::path dir_;
  BinaryCheck binary_exists_;
  mutable std::mutex mutex_;
};

}  // namespace spire::nexus
