//===- spire/store.hpp - Content-addressed binary store --------*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Layout on disk:
//
//   <root>/objects/<id>            raw bytes, id = lowercase SHA-256 hex
//   <root>/analysis/<id>/*.json    artifact record and write-once products
//   <root>/workspaces/<wid>.json   analyst workspaces (nexus)
//
//===----------------------------------------------------------------------===//
#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spire/address.hpp"

namespace spire {

enum class BinaryFormat { Elf64 };

struct BinaryArtifact {
  std::string id;
  std::string file_name;
  std::uint64_t size_bytes = 0;
  BinaryFormat format = BinaryFormat::Elf64;
  std::string ingest_time;  // ISO-8601 UTC, second precision
  std::vector<std::string> warnings;

  bool operator==(const BinaryArtifact&) const = default;
};

std::string sha256_hex(ByteView bytes);

/// Throws Error(NotElf64) unless the bytes start with an ELF64 little-endian
/// identification. Only the identification bytes are inspected.
void require_elf64(ByteView bytes);

class BinaryStore {
 public:
  explicit BinaryStore(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  /// Idempotent for identical bytes: the first ingest's record wins and later
  /// callers get it back unchanged.
  BinaryArtifact ingest(ByteView bytes, std::string_view file_name);

  std::optional<BinaryArtifact> find(std::string_view id) const;
  /// Throws Error(UnknownBinary).
  BinaryArtifact get(std::string_view id) const;
  std::vector<BinaryArtifact> list() const;

  /// Stored bytes, shared between readers.
  std::shared_ptr<const Bytes> bytes(std::string_view id) const;

  std::filesystem::path object_path(std::string_view id) const;
  std::filesystem::path analysis_dir(std::string_view id) const;
  std::filesystem::path workspace_dir() const;

  /// Writes analysis/<id>/<name> unless it already exists. Returns true when
  /// this call created the file.
  bool write_product_once(std::string_view id, std::string_view name, std::string_view content) const;
  std::optional<std::string> read_product(std::string_view id, std::string_view name) const;

  static bool is_valid_id(std::string_view id) noexcept;

 private:
  std::mutex& lock_for(std::string_view id) const;

  std::filesystem::path root_;
  mutable std::mutex map_mutex_;
  mutable std::unordered_map<std::string, std::unique_ptr<std::mutex>> id_locks_;
  mutable std::unordered_map<std::string, std::shared_ptr<const Bytes>> byte_cache_;
};

/// Crash-safe replacement of a file: write a sibling temp file, then rename.
/// Creates missing parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::optional<std::string> read_file(const std::filesystem::path& path);
Bytes read_binary_file(const std::filesystem::path& path);

}  // namespace spire
