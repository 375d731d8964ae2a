//===- spire/elf.hpp - ELF64 header, section, symbol parsing ---*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spire/address.hpp"

namespace spire {

enum class Endianness { Little, Big };
enum class ObjectType { Exec, Dyn, Rel, Other };

struct ElfHeaderInfo {
  Endianness endianness = Endianness::Little;
  ObjectType object_type = ObjectType::Other;
  std::uint16_t object_type_code = 0;  // raw e_type, kept for Other
  std::uint16_t machine = 0;
  std::string machine_name;  // "unknown" when not in the table
  Address entry_point = 0;
  std::uint64_t section_header_offset = 0;
  std::uint16_t section_count = 0;
  std::uint16_t program_header_count = 0;
  std::uint16_t section_name_index = 0;

  bool operator==(const ElfHeaderInfo&) const = default;
};

struct SectionFlags {
  bool executable = false;
  bool writable = false;
  bool allocated = false;

  bool operator==(const SectionFlags&) const = default;
};

struct Section {
  std::string name;
  Address virtual_address = 0;
  std::uint64_t file_offset = 0;
  std::uint64_t size = 0;
  SectionFlags flags;
  std::uint32_t type = 0;  // SHT_*
  std::uint32_t link = 0;
  std::uint64_t entry_size = 0;

  /// False for SHT_NOBITS/SHT_NULL and for sections whose bytes were found
  /// outside the file (those are kept, with a warning, but carry no content).
  bool file_backed = false;

  bool contains(Address addr) const noexcept {
    return addr >= virtual_address && addr - virtual_address < size;
  }

  bool operator==(const Section&) const = default;
};

enum class SymbolKind { Func, Object, Other };
enum class SymbolBinding { Local, Global, Weak };
enum class SymbolSource { Symtab, Dynsym };

struct SymbolEntry {
  std::string name;
  Address value = 0;
  std::uint64_t size = 0;
  SymbolKind kind = SymbolKind::Other;
  SymbolBinding binding = SymbolBinding::Local;
  SymbolSource source = SymbolSource::Symtab;
  bool defined = true;  // st_shndx != SHN_UNDEF

  bool operator==(const SymbolEntry&) const = default;
};

enum class StringScope { AllocatedSections, WholeFile };

struct ExtractedString {
  std::string text;
  std::uint64_t file_offset = 0;
  std::optional<std::string> section_name;

  std::size_t length() const noexcept { return text.size(); }
  bool operator==(const ExtractedString&) const = default;
};

inline constexpr std::size_t kDefaultMinStringLength = 4;

/// Name for an e_machine value per the ELF gABI table, "unknown" otherwise.
std::string machine_name(std::uint16_t machine);

/// Throws TruncatedHeader when fewer than 64 bytes are present and NotElf64
/// when the identification is not ELF64 little-endian.
ElfHeaderInfo parse_header(ByteView file);

/// Sections in section-header order (the null section is omitted). Throws
/// MalformedTable when the table itself or the section-name table is out of
/// bounds; individual sections with bad content ranges are kept without
/// content and reported in `warnings`.
std::vector<Section> list_sections(ByteView file, std::vector<std::string>* warnings = nullptr);

/// .symtab entries followed by .dynsym entries; the null symbol is skipped.
/// Empty when neither table exists.
std::vector<SymbolEntry> list_symbols(ByteView file, std::vector<std::string>* warnings = nullptr);

/// Maximal runs of 0x20..0x7E of at least `min_len` characters, ordered by
/// file offset. Under AllocatedSections, runs are confined to file-backed
/// allocated sections and carry the section name.
std::vector<ExtractedString> extract_strings(ByteView file, std::size_t min_len = kDefaultMinStringLength,
                                             StringScope scope = StringScope::AllocatedSections);

/// Warnings gathered by a best-effort parse; never throws.
std::vector<std::string> probe_warnings(ByteView file);

/// Read-only view over one ingested executable, as consumed by the analysis
/// pipeline. Owns nothing but the parsed tables; `file` must outlive it.
class LoadedImage {
 public:
  explicit LoadedImage(ByteView file);

  ByteView file() const noexcept { return file_; }
  const ElfHeaderInfo& header() const noexcept { return header_; }
  const std::vector<Section>& sections() const noexcept { return sections_; }
  const std::vector<SymbolEntry>& symbols() const noexcept { return symbols_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// GOT slot address -> imported symbol name, from JUMP_SLOT/GLOB_DAT
  /// relocations against .dynsym.
  const std::map<Address, std::string>& import_slots() const noexcept { return import_slots_; }

  const Section* section_at(Address addr) const noexcept;
  const Section* executable_section_at(Address addr) const noexcept;
  const Section* find_section(std::string_view name) const noexcept;

  /// Bytes from `addr` to the end of its file-backed section; empty when the
  /// address is not mapped by such a section.
  ByteView bytes_at(Address addr) const noexcept;
  ByteView section_bytes(const Section& section) const noexcept;

 private:
  ByteView file_;
  ElfHeaderInfo header_;
  std::vector<Section> sections_;
  std::vector<SymbolEntry> symbols_;
  std::map<Address, std::string> import_slots_;
  std::vector<std::string> warnings_;
};

}  // namespace spire
