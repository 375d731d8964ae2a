//===- fixture.cpp - Recipe assembler and minimal ELF64 writer ------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/fixture.hpp"

#include <optional>
#include <sstream>
#include <vector>

#include <fmt/format.h>

#include "spire/error.hpp"

namespace spire {

namespace {

enum class TokenKind { Byte, Text, Rel8, Rel32, Abs32, Abs64, Align };

struct Token {
  TokenKind kind = TokenKind::Byte;
  std::uint8_t byte = 0;
  std::string text;  // literal text or label name
  std::uint64_t align = 1;
  int line = 0;
};

struct LabelDef {
  std::string name;
  std::size_t section = 0;
  std::size_t token_index = 0;  // label sits before this token
  std::optional<std::uint8_t> symbol_type;  // STT_FUNC / STT_OBJECT
  std::uint8_t binding = 0;                 // STB_*
  int line = 0;
};

struct SectionSpec {
  std::string name;
  Address vaddr = 0;
  bool exec = false;
  bool write = false;
  bool alloc = true;
  std::vector<Token> tokens;
  std::vector<Address> token_addr;
  Bytes data;
  std::uint64_t file_offset = 0;
};

struct ImportSpec {
  std::string symbol;
  std::string slot_label;
  int line = 0;
};

struct Recipe {
  std::optional<std::pair<std::string, int>> entry;
  bool strip = false;
  std::vector<SectionSpec> sections;
  std::vector<LabelDef> labels;
  std::vector<ImportSpec> imports;
};

[[noreturn]] void fail(int line, const std::string& why) {
  throw Error(ErrorCode::BadRequest, fmt::format("recipe line {}: {}", line, why));
}

std::vector<std::string> split_words(std::string_view line, int lineno) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < line.size()) {
    if (line[i] == ' ' || line[i] == '\t' || line[i] == '\r') {
      ++i;
      continue;
    }
    if (line[i] == '#')
      break;
    if (line[i] == '"') {
      std::string word = "\"";
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char c = line[i++];
        if (c == '\\') {
          if (i >= line.size())
            fail(lineno, "dangling escape");
          char e = line[i++];
          switch (e) {
            case 'n': word += '\n'; break;
            case 't': word += '\t'; break;
            case '0': word += '\0'; break;
            case '\\': word += '\\'; break;
            case '"': word += '"'; break;
            default: fail(lineno, fmt::format("unknown escape \\{}", e));
          }
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          word += c;
        }
      }
      if (!closed)
        fail(lineno, "unterminated string");
      words.push_back(std::move(word));
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r' && line[j] != '#')
      ++j;
    words.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return words;
}

Recipe parse(std::string_view text) {
  Recipe r;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    auto words = split_words(raw, lineno);
    if (words.empty())
      continue;
    const std::string& head = words[0];
    if (head == "entry") {
      if (words.size() != 2)
        fail(lineno, "usage: entry <label>");
      r.entry = {{words[1], lineno}};
    } else if (head == "strip") {
      r.strip = true;
    } else if (head == "section") {
      if (words.size() < 3)
        fail(lineno, "usage: section <name> <vaddr> [exec] [write] [noalloc]");
      SectionSpec s;
      s.name = words[1];
      auto addr = parse_address(words[2]);
      if (!addr)
        fail(lineno, fmt::format("bad address '{}'", words[2]));
      s.vaddr = *addr;
      for (std::size_t i = 3; i < words.size(); ++i) {
        if (words[i] == "exec") s.exec = true;
        else if (words[i] == "write") s.write = true;
        else if (words[i] == "noalloc") s.alloc = false;
        else fail(lineno, fmt::format("unknown section flag '{}'", words[i]));
      }
      r.sections.push_back(std::move(s));
    } else if (head == "label") {
      if (r.sections.empty())
        fail(lineno, "label before any section");
      if (words.size() < 2)
        fail(lineno, "usage: label <name> [func|object] [global|local|weak]");
      LabelDef l;
      l.name = words[1];
      l.section = r.sections.size() - 1;
      l.token_index = r.sections.back().tokens.size();
      l.line = lineno;
      for (std::size_t i = 2; i < words.size(); ++i) {
        if (words[i] == "func") l.symbol_type = 2;
        else if (words[i] == "object") l.symbol_type = 1;
        else if (words[i] == "global") l.binding = 1;
        else if (words[i] == "weak") l.binding = 2;
        else if (words[i] == "local") l.binding = 0;
        else fail(lineno, fmt::format("unknown label attribute '{}'", words[i]));
      }
      for (const auto& other : r.labels)
        if (other.name == l.name)
          fail(lineno, fmt::format("label '{}' defined twice", l.name));
      r.labels.push_back(std::move(l));
    } else if (head == "import") {
      if (words.size() != 3)
        fail(lineno, "usage: import <symbol> <slot-label>");
      r.imports.push_back({words[1], words[2], lineno});
    } else {
      if (r.sections.empty())
        fail(lineno, "data before any section");
      auto& tokens = r.sections.back().tokens;
      for (const auto& w : words) {
        Token t;
        t.line = lineno;
        if (w.starts_with("\"")) {
          t.kind = TokenKind::Text;
          t.text = w.substr(1);
        } else if (auto colon = w.find(':'); colon != std::string::npos) {
          const std::string kind = w.substr(0, colon);
          t.text = w.substr(colon + 1);
          if (kind == "rel8") t.kind = TokenKind::Rel8;
          else if (kind == "rel32") t.kind = TokenKind::Rel32;
          else if (kind == "abs32") t.kind = TokenKind::Abs32;
          else if (kind == "abs64") t.kind = TokenKind::Abs64;
          else if (kind == "align") {
            t.kind = TokenKind::Align;
            t.align = std::strtoull(t.text.c_str(), nullptr, 0);
            if (t.align == 0 || (t.align & (t.align - 1)) != 0)
              fail(lineno, fmt::format("alignment '{}' is not a power of two", t.text));
          } else {
            fail(lineno, fmt::format("unknown token kind '{}'", kind));
          }
        } else {
          auto b = from_hex(w);
          if (!b || b->size() != 1)
            fail(lineno, fmt::format("'{}' is not a hex byte", w));
          t.byte = (*b)[0];
        }
        tokens.push_back(std::move(t));
      }
    }
  }
  if (r.sections.empty())
    fail(lineno, "recipe defines no sections");
  return r;
}

std::size_t token_size(const Token& t, Address at) {
  switch (t.kind) {
    case TokenKind::Byte: return 1;
    case TokenKind::Text: return t.text.size();
    case TokenKind::Rel8: return 1;
    case TokenKind::Rel32: return 4;
    case TokenKind::Abs32: return 4;
    case TokenKind::Abs64: return 8;
    case TokenKind::Align: return static_cast<std::size_t>((t.align - at % t.align) % t.align);
  }
  return 0;
}

void put_le(Bytes& out, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void patch_le(Bytes& out, std::size_t at, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i)
    out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

struct StringTable {
  Bytes data{0};
  std::uint32_t add(const std::string& s) {
    if (s.empty())
      return 0;
    const auto at = static_cast<std::uint32_t>(data.size());
    data.insert(data.end(), s.begin(), s.end());
    data.push_back(0);
    return at;
  }
};

struct ExtraSection {
  std::string name;
  std::uint32_t type = 0;
  Bytes data;
  std::uint32_t link = 0;
  std::uint32_t info = 0;
  std::uint64_t entsize = 0;
  std::uint64_t offset = 0;
};

void put_symbol(Bytes& out, std::uint32_t name, std::uint8_t info, std::uint16_t shndx, std::uint64_t value,
                std::uint64_t size) {
  put_le(out, name, 4);
  out.push_back(info);
  out.push_back(0);
  put_le(out, shndx, 2);
  put_le(out, value, 8);
  put_le(out, size, 8);
}

}  // namespace

BuiltFixture build_fixture(std::string_view text) {
  Recipe r = parse(text);
  BuiltFixture out;

  // Pass 1: addresses.
  for (auto& s : r.sections) {
    Address at = s.vaddr;
    s.token_addr.reserve(s.tokens.size() + 1);
    for (const auto& t : s.tokens) {
      s.token_addr.push_back(at);
      at += token_size(t, at);
    }
    s.token_addr.push_back(at);
  }
  for (const auto& l : r.labels)
    out.labels[l.name] = r.sections[l.section].token_addr[l.token_index];
  auto resolve = [&](const std::string& name, int line) {
    auto it = out.labels.find(name);
    if (it == out.labels.end())
      fail(line, fmt::format("undefined label '{}'", name));
    return it->second;
  };

  // Pass 2: bytes.
  for (auto& s : r.sections) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      const Token& t = s.tokens[i];
      const Address at = s.token_addr[i];
      const Address end = s.token_addr[i + 1];
      switch (t.kind) {
        case TokenKind::Byte:
          s.data.push_back(t.byte);
          break;
        case TokenKind::Text:
          s.data.insert(s.data.end(), t.text.begin(), t.text.end());
          break;
        case TokenKind::Rel8:
        case TokenKind::Rel32: {
          const auto disp = static_cast<std::int64_t>(resolve(t.text, t.line) - end);
          const bool narrow = t.kind == TokenKind::Rel8;
          if (narrow ? (disp < -128 || disp > 127) : (disp < INT32_MIN || disp > INT32_MAX))
            fail(t.line, fmt::format("displacement to '{}' does not fit", t.text));
          put_le(s.data, static_cast<std::uint64_t>(disp), narrow ? 1 : 4);
          break;
        }
        case TokenKind::Abs32:
          put_le(s.data, resolve(t.text, t.line), 4);
          break;
        case TokenKind::Abs64:
          put_le(s.data, resolve(t.text, t.line), 8);
          break;
        case TokenKind::Align:
          s.data.insert(s.data.end(), end - at, s.exec ? 0xCC : 0x00);
          break;
      }
    }
  }

  // Extra sections: symbols, dynamic symbols, relocations, section names.
  const std::size_t user_count = r.sections.size();
  std::vector<ExtraSection> extra;
  auto section_index_of_label = [&](const LabelDef& l) { return static_cast<std::uint16_t>(l.section + 1); };

  if (!r.strip) {
    StringTable strtab;
    Bytes symtab(24, 0);
    std::uint32_t first_global = 1;
    for (int pass = 0; pass < 2; ++pass) {  // locals first, as ELF requires
      for (const auto& l : r.labels) {
        if (!l.symbol_type || (l.binding == 0) != (pass == 0))
          continue;
        put_symbol(symtab, strtab.add(l.name), static_cast<std::uint8_t>(l.binding << 4 | *l.symbol_type),
                   section_index_of_label(l), out.labels[l.name], 0);
        if (pass == 0)
          ++first_global;
      }
    }
    const auto symtab_index = static_cast<std::uint32_t>(user_count + 1 + extra.size());
    extra.push_back({".symtab", 2, std::move(symtab), symtab_index + 1, first_global, 24});
    extra.push_back({".strtab", 3, std::move(strtab.data)});
  }

  if (!r.imports.empty()) {
    StringTable dynstr;
    Bytes dynsym(24, 0);
    Bytes rela;
    std::uint64_t sym = 1;
    for (const auto& imp : r.imports) {
      put_symbol(dynsym, dynstr.add(imp.symbol), static_cast<std::uint8_t>(1 << 4 | 2), 0, 0, 0);
      put_le(rela, resolve(imp.slot_label, imp.line), 8);
      put_le(rela, sym << 32 | 7, 8);  // R_X86_64_JUMP_SLOT
      put_le(rela, 0, 8);
      ++sym;
    }
    const auto dynsym_index = static_cast<std::uint32_t>(user_count + 1 + extra.size());
    extra.push_back({".dynsym", 11, std::move(dynsym), dynsym_index + 1, 1, 24});
    extra.push_back({".dynstr", 3, std::move(dynstr.data)});
    extra.push_back({".rela.plt", 4, std::move(rela), dynsym_index, 0, 24});
  }

  StringTable shstr;
  std::vector<std::uint32_t> user_names;
  for (const auto& s : r.sections)
    user_names.push_back(shstr.add(s.name));
  std::vector<std::uint32_t> extra_names;
  for (const auto& e : extra)
    extra_names.push_back(shstr.add(e.name));
  const std::uint32_t shstr_name = shstr.add(".shstrtab");
  extra.push_back({".shstrtab", 3, shstr.data});
  extra_names.push_back(shstr_name);

  // File layout: header, program headers, section bodies, section headers.
  std::size_t phnum = 0;
  for (const auto& s : r.sections)
    if (s.alloc)
      ++phnum;
  std::uint64_t cursor = 64 + 56 * phnum;
  for (auto& s : r.sections) {
    if (s.alloc)
      cursor += (s.vaddr - cursor) % 0x1000;  // congruent to vaddr modulo the page size
    else
      cursor = (cursor + 7) & ~std::uint64_t{7};
    s.file_offset = cursor;
    cursor += s.data.size();
  }
  for (auto& e : extra) {
    cursor = (cursor + 7) & ~std::uint64_t{7};
    e.offset = cursor;
    cursor += e.data.size();
  }
  cursor = (cursor + 7) & ~std::uint64_t{7};
  const std::uint64_t shoff = cursor;
  const std::size_t shnum = 1 + user_count + extra.size();

  Bytes& f = out.bytes;
  f.assign(shoff + 64 * shnum, 0);

  Address entry = 0;
  if (r.entry)
    entry = resolve(r.entry->first, r.entry->second);
  const std::uint8_t ident[16] = {0x7F, 'E', 'L', 'F', 2, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  std::copy(std::begin(ident), std::end(ident), f.begin());
  patch_le(f, 16, 2, 2);   // ET_EXEC
  patch_le(f, 18, 62, 2);  // EM_X86_64
  patch_le(f, 20, 1, 4);
  patch_le(f, 24, entry, 8);
  patch_le(f, 32, phnum ? 64 : 0, 8);
  patch_le(f, 40, shoff, 8);
  patch_le(f, 52, 64, 2);
  patch_le(f, 54, 56, 2);
  patch_le(f, 56, phnum, 2);
  patch_le(f, 58, 64, 2);
  patch_le(f, 60, shnum, 2);
  patch_le(f, 62, shnum - 1, 2);

  std::size_t ph = 64;
  for (const auto& s : r.sections) {
    if (!s.alloc)
      continue;
    const std::uint32_t flags = 4u | (s.write ? 2u : 0u) | (s.exec ? 1u : 0u);
    patch_le(f, ph, 1, 4);  // PT_LOAD
    patch_le(f, ph + 4, flags, 4);
    patch_le(f, ph + 8, s.file_offset, 8);
    patch_le(f, ph + 16, s.vaddr, 8);
    patch_le(f, ph + 24, s.vaddr, 8);
    patch_le(f, ph + 32, s.data.size(), 8);
    patch_le(f, ph + 40, s.data.size(), 8);
    patch_le(f, ph + 48, 0x1000, 8);
    ph += 56;
  }

  for (const auto& s : r.sections)
    std::copy(s.data.begin(), s.data.end(), f.begin() + static_cast<std::ptrdiff_t>(s.file_offset));
  for (const auto& e : extra)
    std::copy(e.data.begin(), e.data.end(), f.begin() + static_cast<std::ptrdiff_t>(e.offset));

  auto write_sh = [&](std::size_t index, std::uint32_t name, std::uint32_t type, std::uint64_t flags,
                      std::uint64_t addr, std::uint64_t offset, std::uint64_t size, std::uint32_t link,
                      std::uint32_t info, std::uint64_t align, std::uint64_t entsize) {
    const std::size_t at = shoff + 64 * index;
    patch_le(f, at, name, 4);
    patch_le(f, at + 4, type, 4);
    patch_le(f, at + 8, flags, 8);
    patch_le(f, at + 16, addr, 8);
    patch_le(f, at + 24, offset, 8);
    patch_le(f, at + 32, size, 8);
    patch_le(f, at + 40, link, 4);
    patch_le(f, at + 44, info, 4);
    patch_le(f, at + 48, align, 8);
    patch_le(f, at + 56, entsize, 8);
  };
  for (std::size_t i = 0; i < user_count; ++i) {
    const auto& s = r.sections[i];
    const std::uint64_t flags = (s.write ? 1u : 0u) | (s.alloc ? 2u : 0u) | (s.exec ? 4u : 0u);
    write_sh(i + 1, user_names[i], 1 /* PROGBITS */, flags, s.alloc ? s.vaddr : 0, s.file_offset, s.data.size(), 0,
             0, s.exec ? 16 : 1, 0);
  }
  for (std::size_t i = 0; i < extra.size(); ++i) {
    const auto& e = extra[i];
    write_sh(user_count + 1 + i, extra_names[i], e.type, 0, 0, e.offset, e.data.size(), e.link, e.info,
             e.entsize ? 8 : 1, e.entsize);
  }
  return out;
}

}  // namespace spire
