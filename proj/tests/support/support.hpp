// Shared helpers for the unit and acceptance tests.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spire/address.hpp"
#include "spire/fixture.hpp"
#include "spire/layout.hpp"

namespace spire::test {

std::filesystem::path source_path(const std::string& relative);
std::string read_text(const std::filesystem::path& path);

/// tests/fixtures/<name>.recipe assembled in memory.
BuiltFixture load_fixture(const std::string& name);
/// All fixture names, sorted.
std::vector<std::string> fixture_names();

struct CorpusEntry {
  int row = 0;
  Address address = 0;
  Bytes bytes;
  std::string mnemonic;
  std::size_t length = 0;
  std::optional<Address> target;
  std::string reference_text;
};
std::vector<CorpusEntry> load_disasm_corpus();

/// Graph fixtures under tests/data/graphs: {"nodes": [...], "edges": [[s,t],...]}.
layout::AbstractGraph load_graph(const std::string& name);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_bytes(const std::filesystem::path& path, const Bytes& bytes);

struct CommandResult {
  int exit_code = -1;
  std::string out;
};
/// Runs through /bin/sh, capturing stdout; stderr is discarded.
CommandResult run_command(const std::string& command);
std::string cli_path();

/// One line of GNU objdump output (Intel syntax), comments stripped.
struct ReferenceInsn {
  Address address = 0;
  std::size_t length = 0;
  std::string mnemonic;
  std::string text;
  std::optional<Address> target;  // direct branch/call targets only
};
/// Decodes raw bytes loaded at `vma` with objdump; nullopt when objdump is
/// not on PATH.
std::optional<std::vector<ReferenceInsn>> objdump_reference(const Bytes& data, Address vma);
std::string shell_quote(const std::string& s);

}  // namespace spire::test
