//===- store.cpp - Content-addressed binary store -------------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/store.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "spire/elf.hpp"
#include "spire/error.hpp"
#include "spire/serialize.hpp"

namespace fs = std::filesystem;

namespace spire {

namespace {

constexpr std::string_view kArtifactRecord = "artifact.json";

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path temp_sibling(const fs::path& path) {
  static std::atomic<unsigned> counter{0};
  return path.parent_path() /
         fmt::format(".{}.tmp.{}.{}", path.filename().string(), ::getpid(), counter++);
}

void write_all(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error(ErrorCode::StoreUnavailable, fmt::format("cannot write {}", path.string()));
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out)
    throw Error(ErrorCode::StoreUnavailable, fmt::format("short write to {}", path.string()));
}

// First writer wins: hard-linking the finished temp file fails if the
// destination exists, which makes creation atomic across processes too.
bool create_file_once(const fs::path& path, std::string_view content) {
  if (fs::exists(path))
    return false;
  const fs::path tmp = temp_sibling(path);
  write_all(tmp, content);
  std::error_code ec;
  fs::create_hard_link(tmp, path, ec);
  fs::remove(tmp);
  if (ec) {
    if (ec == std::errc::file_exists)
      return false;
    throw Error(ErrorCode::StoreUnavailable, fmt::format("cannot create {}: {}", path.string(), ec.message()));
  }
  return true;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw Error(ErrorCode::StoreUnavailable, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

}  // namespace

std::string sha256_hex(ByteView bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::Internal, "SHA-256 failed");
  return to_hex(ByteView(digest, len));
}

void require_elf64(ByteView bytes) {
  static constexpr std::uint8_t kMagic[4] = {0x7F, 'E', 'L', 'F'};
  if (bytes.size() < 5 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()))
    throw Error(ErrorCode::NotElf64, "not an ELF file");
  if (bytes[4] != 2)
    throw Error(ErrorCode::NotElf64, "not a 64-bit ELF file");
  if (bytes.size() > 5 && bytes[5] != 1)
    throw Error(ErrorCode::NotElf64, "only little-endian ELF64 is supported");
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path())
    ensure_dir(path.parent_path());
  const fs::path tmp = temp_sibling(path);
  write_all(tmp, content);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::StoreUnavailable, fmt::format("cannot replace {}: {}", path.string(), ec.message()));
  }
}

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

Bytes read_binary_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, fmt::format("cannot open {}", path.string()));
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad())
    throw Error(ErrorCode::Io, fmt::format("cannot read {}", path.string()));
  return out;
}

BinaryStore::BinaryStore(fs::path root) : root_(std::move(root)) {}

bool BinaryStore::is_valid_id(std::string_view id) noexcept {
  if (id.size() != 64)
    return false;
  for (char c : id)
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')))
      return false;
  return true;
}

fs::path BinaryStore::object_path(std::string_view id) const { return root_ / "objects" / std::string(id); }
fs::path BinaryStore::analysis_dir(std::string_view id) const { return root_ / "analysis" / std::string(id); }
fs::path BinaryStore::workspace_dir() const { return root_ / "workspaces"; }

std::mutex& BinaryStore::lock_for(std::string_view id) const {
  std::lock_guard guard(map_mutex_);
  auto& slot = id_locks_[std::string(id)];
  if (!slot)
    slot = std::make_unique<std::mutex>();
  return *slot;
}

BinaryArtifact BinaryStore::ingest(ByteView bytes, std::string_view file_name) {
  if (bytes.empty())
    throw Error(ErrorCode::NotElf64, "empty input");
  require_elf64(bytes);

  const std::string id = sha256_hex(bytes);
  std::lock_guard guard(lock_for(id));
  if (auto existing = find(id))
    return *existing;

  BinaryArtifact artifact;
  artifact.id = id;
  artifact.file_name = std::string(file_name);
  artifact.size_bytes = bytes.size();
  artifact.format = BinaryFormat::Elf64;
  artifact.ingest_time = utc_now();
  artifact.warnings = probe_warnings(bytes);

  ensure_dir(root_ / "objects");
  ensure_dir(analysis_dir(id));
  create_file_once(object_path(id),
                   std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  if (!create_file_once(analysis_dir(id) / kArtifactRecord, to_json(artifact).dump(2) + "\n")) {
    // Another process won the race; report its record.
    if (auto existing = find(id))
      return *existing;
  }
  return artifact;
}

std::optional<BinaryArtifact> BinaryStore::find(std::string_view id) const {
  if (!is_valid_id(id))
    return std::nullopt;
  auto text = read_file(analysis_dir(id) / kArtifactRecord);
  if (!text || !fs::exists(object_path(id)))
    return std::nullopt;
  return artifact_from_json(nlohmann::json::parse(*text));
}

BinaryArtifact BinaryStore::get(std::string_view id) const {
  if (auto a = find(id))
    return *a;
  throw Error(ErrorCode::UnknownBinary, fmt::format("unknown binary '{}'", id));
}

std::vector<BinaryArtifact> BinaryStore::list() const {
  std::vector<BinaryArtifact> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(root_ / "objects", ec)) {
    if (auto a = find(entry.path().filename().string()))
      out.push_back(std::move(*a));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::shared_ptr<const Bytes> BinaryStore::bytes(std::string_view id) const {
  {
    std::lock_guard guard(map_mutex_);
    if (auto it = byte_cache_.find(std::string(id)); it != byte_cache_.end())
      return it->second;
  }
  if (!find(id))
    throw Error(ErrorCode::UnknownBinary, fmt::format("unknown binary '{}'", id));
  auto data = std::make_shared<const Bytes>(read_binary_file(object_path(id)));
  std::lock_guard guard(map_mutex_);
  return byte_cache_.emplace(std::string(id), std::move(data)).first->second;
}

bool BinaryStore::write_product_once(std::string_view id, std::string_view name,
                                     std::string_view content) const {
  ensure_dir(analysis_dir(id));
  return create_file_once(analysis_dir(id) / std::string(name), content);
}

std::optional<std::string> BinaryStore::read_product(std::string_view id, std::string_view name) const {
  return read_file(analysis_dir(id) / std::string(name));
}

}  // namespace spire
