//===- elf.cpp - ELF64 little-endian parsing ------------------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/elf.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "spire/error.hpp"
#include "spire/store.hpp"

namespace spire {

namespace {

constexpr std::size_t kHeaderSize = 64;
constexpr std::size_t kSectionHeaderSize = 64;
constexpr std::size_t kSymbolSize = 24;
constexpr std::size_t kRelaSize = 24;

constexpr std::uint32_t SHT_NULL = 0;
constexpr std::uint32_t SHT_SYMTAB = 2;
constexpr std::uint32_t SHT_RELA = 4;
constexpr std::uint32_t SHT_NOBITS = 8;
constexpr std::uint32_t SHT_DYNSYM = 11;

constexpr std::uint64_t SHF_WRITE = 0x1;
constexpr std::uint64_t SHF_ALLOC = 0x2;
constexpr std::uint64_t SHF_EXECINSTR = 0x4;

constexpr std::uint32_t R_X86_64_GLOB_DAT = 6;
constexpr std::uint32_t R_X86_64_JUMP_SLOT = 7;

template <typename T>
T read_le(ByteView data, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(static_cast<T>(data[offset + i]) << (8 * i));
  return value;
}

bool in_bounds(ByteView data, std::uint64_t offset, std::uint64_t size) {
  return offset <= data.size() && size <= data.size() - offset;
}

// Reads a NUL-terminated name from a string table. An index past the table
// is a hard error; a missing terminator stops at the table end.
std::string read_name(ByteView strtab, std::uint32_t index, std::string_view table) {
  if (index >= strtab.size() && !(index == 0 && strtab.empty()))
    throw Error(ErrorCode::MalformedTable,
                fmt::format("{} reference {} outside table of {} bytes", table, index, strtab.size()));
  std::string out;
  for (std::size_t i = index; i < strtab.size() && strtab[i] != 0; ++i)
    out.push_back(static_cast<char>(strtab[i]));
  return out;
}

struct RawSection {
  Section section;
  std::uint32_t name_index = 0;
  std::uint32_t info = 0;
};

std::vector<RawSection> read_section_headers(ByteView file, const ElfHeaderInfo& header,
                                             std::vector<std::string>* warnings) {
  std::vector<RawSection> raw;
  if (header.section_header_offset == 0 || header.section_count == 0)
    return raw;
  const std::uint16_t entsize = read_le<std::uint16_t>(file, 58);
  if (entsize != kSectionHeaderSize)
    throw Error(ErrorCode::MalformedTable, fmt::format("unexpected section header size {}", entsize));
  if (!in_bounds(file, header.section_header_offset,
                 std::uint64_t{header.section_count} * kSectionHeaderSize))
    throw Error(ErrorCode::MalformedTable,
                fmt::format("section header table at {} extends past end of file", header.section_header_offset));

  for (std::uint16_t i = 0; i < header.section_count; ++i) {
    const std::size_t at = header.section_header_offset + std::size_t{i} * kSectionHeaderSize;
    RawSection r;
    r.name_index = read_le<std::uint32_t>(file, at);
    Section& s = r.section;
    s.type = read_le<std::uint32_t>(file, at + 4);
    const auto flags = read_le<std::uint64_t>(file, at + 8);
    s.virtual_address = read_le<std::uint64_t>(file, at + 16);
    s.file_offset = read_le<std::uint64_t>(file, at + 24);
    s.size = read_le<std::uint64_t>(file, at + 32);
    s.link = read_le<std::uint32_t>(file, at + 40);
    r.info = read_le<std::uint32_t>(file, at + 44);
    s.entry_size = read_le<std::uint64_t>(file, at + 56);
    s.flags = {(flags & SHF_EXECINSTR) != 0, (flags & SHF_WRITE) != 0, (flags & SHF_ALLOC) != 0};
    s.file_backed = s.type != SHT_NULL && s.type != SHT_NOBITS;
    if (s.file_backed && !in_bounds(file, s.file_offset, s.size)) {
      if (warnings)
        warnings->push_back(fmt::format("section {} content [{:#x}, +{:#x}) lies outside the file; ignored", i,
                                        s.file_offset, s.size));
      s.file_backed = false;
    }
    raw.push_back(std::move(r));
  }

  if (header.section_name_index >= raw.size())
    throw Error(ErrorCode::MalformedTable,
                fmt::format("section name table index {} out of range", header.section_name_index));
  const Section& names = raw[header.section_name_index].section;
  ByteView strtab = names.file_backed ? file.subspan(names.file_offset, names.size) : ByteView{};
  for (auto& r : raw)
    r.section.name = read_name(strtab, r.name_index, "section name");
  return raw;
}

ByteView content_of(ByteView file, const Section& s) {
  return s.file_backed ? file.subspan(s.file_offset, s.size) : ByteView{};
}

std::vector<SymbolEntry> read_symbol_table(ByteView file, const std::vector<RawSection>& raw, std::size_t index,
                                           SymbolSource source) {
  const Section& table = raw[index].section;
  std::vector<SymbolEntry> out;
  ByteView data = content_of(file, table);
  if (table.link >= raw.size())
    throw Error(ErrorCode::MalformedTable, fmt::format("symbol table {} links to missing section", table.name));
  ByteView strtab = content_of(file, raw[table.link].section);
  const std::size_t count = data.size() / kSymbolSize;
  for (std::size_t i = 1; i < count; ++i) {
    const std::size_t at = i * kSymbolSize;
    SymbolEntry sym;
    sym.name = read_name(strtab, read_le<std::uint32_t>(data, at), "symbol name");
    const std::uint8_t info = data[at + 4];
    const std::uint16_t shndx = read_le<std::uint16_t>(data, at + 6);
    sym.value = read_le<std::uint64_t>(data, at + 8);
    sym.size = read_le<std::uint64_t>(data, at + 16);
    switch (info & 0xF) {
      case 2: sym.kind = SymbolKind::Func; break;
      case 1: sym.kind = SymbolKind::Object; break;
      default: sym.kind = SymbolKind::Other; break;
    }
    switch (info >> 4) {
      case 1: sym.binding = SymbolBinding::Global; break;
      case 2: sym.binding = SymbolBinding::Weak; break;
      default: sym.binding = SymbolBinding::Local; break;
    }
    sym.source = source;
    sym.defined = shndx != 0;
    out.push_back(std::move(sym));
  }
  return out;
}

}  // namespace

std::string machine_name(std::uint16_t machine) {
  switch (machine) {
    case 0: return "none";
    case 2: return "SPARC";
    case 3: return "x86";
    case 8: return "MIPS";
    case 20: return "PowerPC";
    case 21: return "PowerPC64";
    case 22: return "S390";
    case 40: return "ARM";
    case 43: return "SPARC V9";
    case 50: return "IA-64";
    case 62: return "x86-64";
    case 183: return "AArch64";
    case 243: return "RISC-V";
    case 258: return "LoongArch";
    default: return "unknown";
  }
}

ElfHeaderInfo parse_header(ByteView file) {
  require_elf64(file);
  if (file.size() < kHeaderSize)
    throw Error(ErrorCode::TruncatedHeader,
                fmt::format("ELF64 header needs {} bytes, file has {}", kHeaderSize, file.size()));
  ElfHeaderInfo h;
  h.endianness = file[5] == 2 ? Endianness::Big : Endianness::Little;
  h.object_type_code = read_le<std::uint16_t>(file, 16);
  switch (h.object_type_code) {
    case 1: h.object_type = ObjectType::Rel; break;
    case 2: h.object_type = ObjectType::Exec; break;
    case 3: h.object_type = ObjectType::Dyn; break;
    default: h.object_type = ObjectType::Other; break;
  }
  h.machine = read_le<std::uint16_t>(file, 18);
  h.machine_name = machine_name(h.machine);
  h.entry_point = read_le<std::uint64_t>(file, 24);
  h.section_header_offset = read_le<std::uint64_t>(file, 40);
  h.program_header_count = read_le<std::uint16_t>(file, 56);
  h.section_count = read_le<std::uint16_t>(file, 60);
  h.section_name_index = read_le<std::uint16_t>(file, 62);
  return h;
}

std::vector<Section> list_sections(ByteView file, std::vector<std::string>* warnings) {
  const ElfHeaderInfo header = parse_header(file);
  auto raw = read_section_headers(file, header, warnings);
  std::vector<Section> out;
  for (std::size_t i = 1; i < raw.size(); ++i)
    out.push_back(std::move(raw[i].section));
  return out;
}

std::vector<SymbolEntry> list_symbols(ByteView file, std::vector<std::string>* warnings) {
  const ElfHeaderInfo header = parse_header(file);
  const auto raw = read_section_headers(file, header, warnings);
  std::vector<SymbolEntry> out;
  for (SymbolSource source : {SymbolSource::Symtab, SymbolSource::Dynsym}) {
    const std::uint32_t want = source == SymbolSource::Symtab ? SHT_SYMTAB : SHT_DYNSYM;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i].section.type != want)
        continue;
      auto syms = read_symbol_table(file, raw, i, source);
      out.insert(out.end(), std::make_move_iterator(syms.begin()), std::make_move_iterator(syms.end()));
    }
  }
  return out;
}

namespace {

void scan_runs(ByteView file, std::uint64_t begin, std::uint64_t end, std::size_t min_len,
               const std::optional<std::string>& section, std::vector<ExtractedString>& out) {
  std::uint64_t run_start = begin;
  auto flush = [&](std::uint64_t run_end) {
    if (run_end - run_start >= min_len) {
      ExtractedString s;
      s.text.assign(reinterpret_cast<const char*>(file.data() + run_start), run_end - run_start);
      s.file_offset = run_start;
      s.section_name = section;
      out.push_back(std::move(s));
    }
  };
  for (std::uint64_t i = begin; i < end; ++i) {
    const std::uint8_t c = file[i];
    if (c < 0x20 || c > 0x7E) {
      flush(i);
      run_start = i + 1;
    }
  }
  flush(end);
}

}  // namespace

std::vector<ExtractedString> extract_strings(ByteView file, std::size_t min_len, StringScope scope) {
  min_len = std::max<std::size_t>(min_len, 1);
  std::vector<ExtractedString> out;
  if (scope == StringScope::WholeFile) {
    scan_runs(file, 0, file.size(), min_len, std::nullopt, out);
    return out;
  }
  std::vector<Section> sections;
  try {
    sections = list_sections(file);
  } catch (const Error&) {
    return out;
  }
  std::stable_sort(sections.begin(), sections.end(),
                   [](const Section& a, const Section& b) { return a.file_offset < b.file_offset; });
  std::uint64_t covered = 0;  // guards against overlapping sections reporting twice
  for (const Section& s : sections) {
    if (!s.flags.allocated || !s.file_backed || s.size == 0)
      continue;
    const std::uint64_t begin = std::max(s.file_offset, covered);
    const std::uint64_t end = s.file_offset + s.size;
    if (begin >= end)
      continue;
    scan_runs(file, begin, end, min_len, s.name, out);
    covered = end;
  }
  return out;
}

std::vector<std::string> probe_warnings(ByteView file) {
  try {
    return LoadedImage(file).warnings();
  } catch (const Error& e) {
    return {std::string(e.what())};
  }
}

LoadedImage::LoadedImage(ByteView file) : file_(file), header_(parse_header(file)) {
  const auto raw = read_section_headers(file, header_, &warnings_);
  for (std::size_t i = 1; i < raw.size(); ++i)
    sections_.push_back(raw[i].section);

  std::vector<SymbolEntry> dynsym;
  for (SymbolSource source : {SymbolSource::Symtab, SymbolSource::Dynsym}) {
    const std::uint32_t want = source == SymbolSource::Symtab ? SHT_SYMTAB : SHT_DYNSYM;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i].section.type != want)
        continue;
      auto syms = read_symbol_table(file, raw, i, source);
      if (source == SymbolSource::Dynsym && dynsym.empty()) {
        dynsym = syms;
        // Relocations index .dynsym including the null entry.
        dynsym.insert(dynsym.begin(), SymbolEntry{});
      }
      symbols_.insert(symbols_.end(), syms.begin(), syms.end());
    }
  }

  for (const auto& r : raw) {
    const Section& s = r.section;
    if (s.type != SHT_RELA || !s.file_backed || s.link >= raw.size() || raw[s.link].section.type != SHT_DYNSYM)
      continue;
    ByteView data = content_of(file, s);
    for (std::size_t at = 0; at + kRelaSize <= data.size(); at += kRelaSize) {
      const auto offset = read_le<std::uint64_t>(data, at);
      const auto info = read_le<std::uint64_t>(data, at + 8);
      const auto type = static_cast<std::uint32_t>(info & 0xFFFFFFFF);
      const auto sym = static_cast<std::size_t>(info >> 32);
      if (type != R_X86_64_JUMP_SLOT && type != R_X86_64_GLOB_DAT)
        continue;
      if (sym == 0 || sym >= dynsym.size()) {
        warnings_.push_back(fmt::format("relocation in {} references symbol {} outside .dynsym", s.name, sym));
        continue;
      }
      import_slots_.emplace(offset, dynsym[sym].name);
    }
  }

  if (header_.object_type == ObjectType::Exec && !executable_section_at(header_.entry_point))
    warnings_.push_back(
        fmt::format("entry point {} is not inside an executable section", hex_address(header_.entry_point)));
}

const Section* LoadedImage::section_at(Address addr) const noexcept {
  for (const auto& s : sections_)
    if (s.flags.allocated && s.contains(addr))
      return &s;
  return nullptr;
}

const Section* LoadedImage::executable_section_at(Address addr) const noexcept {
  for (const auto& s : sections_)
    if (s.flags.allocated && s.flags.executable && s.file_backed && s.contains(addr))
      return &s;
  return nullptr;
}

const Section* LoadedImage::find_section(std::string_view name) const noexcept {
  for (const auto& s : sections_)
    if (s.name == name)
      return &s;
  return nullptr;
}

ByteView LoadedImage::section_bytes(const Section& section) const noexcept { return content_of(file_, section); }

ByteView LoadedImage::bytes_at(Address addr) const noexcept {
  for (const auto& s : sections_) {
    if (s.flags.allocated && s.file_backed && s.contains(addr))
      return section_bytes(s).subspan(addr - s.virtual_address);
  }
  return {};
}

}  // namespace spire
