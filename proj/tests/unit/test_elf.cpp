#include <gtest/gtest.h>

#include <regex>
#include <sstream>

#include "spire/elf.hpp"
#include "spire/error.hpp"
#include "spire/fixture.hpp"
#include "support.hpp"

using namespace spire;
using spire::test::TempDir;

namespace {

constexpr std::string_view kTiny = R"(
entry main
section .text 0x401000 exec
label main func global
  55 48 89 e5
  e8 rel32:helper
  5d c3
label helper func local
  c3
section .rodata 0x402000
  "usage: %s" 00 "ab" 00
section .data 0x403000 write
label counter object global
  00 00 00 00
)";

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::Internal;
}

bool have(const char* tool) {
  return test::run_command(std::string("command -v ") + tool + " >/dev/null 2>&1").exit_code == 0;
}

std::string readelf(const Bytes& bytes, const std::string& flags) {
  TempDir dir;
  test::write_bytes(dir / "f", bytes);
  return test::run_command("readelf " + flags + " " + test::shell_quote((dir / "f").string())).out;
}

template <typename T>
void put(Bytes& b, std::size_t off, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    b[off + i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i));
}

}  // namespace

TEST(ParseHeader, TinyFixture) {
  auto f = build_fixture(kTiny);
  auto h = parse_header(f.bytes);
  EXPECT_EQ(h.object_type, ObjectType::Exec);
  EXPECT_EQ(h.entry_point, 0x401000u);
  EXPECT_EQ(h.machine, 0x3E);
  EXPECT_EQ(h.machine_name, "x86-64");
  EXPECT_EQ(h.endianness, Endianness::Little);
}

TEST(ParseHeader, AgreesWithReadelf) {
  if (!have("readelf"))
    GTEST_SKIP() << "readelf not on PATH";
  for (const auto& name : test::fixture_names()) {
    auto bytes = test::load_fixture(name).bytes;
    auto h = parse_header(bytes);
    auto text = readelf(bytes, "-hW");
    std::smatch m;
    ASSERT_TRUE(std::regex_search(text, m, std::regex(R"(Entry point address:\s+(0x[0-9a-f]+))"))) << name;
    EXPECT_EQ(parse_address(m[1].str()), h.entry_point) << name;
    ASSERT_TRUE(std::regex_search(text, m, std::regex(R"(Number of section headers:\s+(\d+))")));
    EXPECT_EQ(std::stoul(m[1].str()), h.section_count) << name;
    EXPECT_NE(text.find("EXEC"), std::string::npos) << name;
    EXPECT_NE(text.find("X86-64"), std::string::npos) << name;
  }
}

TEST(MachineName, GabiTable) {
  EXPECT_EQ(machine_name(0x3E), "x86-64");
  EXPECT_EQ(machine_name(0x03), "x86");
  EXPECT_EQ(machine_name(0xB7), "AArch64");
  EXPECT_EQ(machine_name(0xF3), "RISC-V");
  EXPECT_EQ(machine_name(0xFFFF), "unknown");
}

TEST(ParseHeader, ShortFileIsTruncated) {
  Bytes ten{0x7f, 'E', 'L', 'F', 2, 1, 1, 0, 0, 0};
  EXPECT_EQ(code_of([&] { parse_header(ten); }), ErrorCode::TruncatedHeader);
}

TEST(ParseHeader, WrongMagicIsNotElf64) {
  Bytes pe(64, 0);
  pe[0] = 'M';
  pe[1] = 'Z';
  EXPECT_EQ(code_of([&] { parse_header(pe); }), ErrorCode::NotElf64);
}

TEST(ParseHeader, OtherObjectTypesKeepRawCode) {
  auto bytes = build_fixture(kTiny).bytes;
  put<std::uint16_t>(bytes, 16, 3);  // ET_DYN
  EXPECT_EQ(parse_header(bytes).object_type, ObjectType::Dyn);
  put<std::uint16_t>(bytes, 16, 0xfe00);
  auto h = parse_header(bytes);
  EXPECT_EQ(h.object_type, ObjectType::Other);
  EXPECT_EQ(h.object_type_code, 0xfe00);
}

TEST(ListSections, TextIsExecutable) {
  auto bytes = build_fixture(kTiny).bytes;
  auto sections = list_sections(bytes);
  auto text = std::find_if(sections.begin(), sections.end(), [](const Section& s) { return s.name == ".text"; });
  ASSERT_NE(text, sections.end());
  EXPECT_TRUE(text->flags.executable);
  EXPECT_TRUE(text->flags.allocated);
  EXPECT_FALSE(text->flags.writable);
  EXPECT_EQ(text->virtual_address, 0x401000u);
  EXPECT_EQ(text->size, 12u);
  EXPECT_TRUE(text->file_backed);
}

TEST(ListSections, AgreesWithReadelf) {
  if (!have("readelf"))
    GTEST_SKIP() << "readelf not on PATH";
  const std::regex row(R"(\[\s*(\d+)\]\s+(\S+)\s+\S+\s+([0-9a-f]+)\s+([0-9a-f]+)\s+([0-9a-f]+)\s+\S+\s+([WAXMSILOGTCxoEDlp]*)\s)");
  for (const auto& name : test::fixture_names()) {
    auto bytes = test::load_fixture(name).bytes;
    auto sections = list_sections(bytes);
    auto text = readelf(bytes, "-SW");
    std::vector<Section> expected;
    for (auto it = std::sregex_iterator(text.begin(), text.end(), row); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      if (m[1].str() == "0")
        continue;
      Section s;
      s.name = m[2].str();
      s.virtual_address = std::stoull(m[3].str(), nullptr, 16);
      s.file_offset = std::stoull(m[4].str(), nullptr, 16);
      s.size = std::stoull(m[5].str(), nullptr, 16);
      const auto flags = m[6].str();
      s.flags = {flags.find('X') != std::string::npos, flags.find('W') != std::string::npos,
                 flags.find('A') != std::string::npos};
      expected.push_back(s);
    }
    ASSERT_EQ(sections.size(), expected.size()) << name;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_EQ(sections[i].name, expected[i].name) << name;
      EXPECT_EQ(sections[i].virtual_address, expected[i].virtual_address) << name << " " << expected[i].name;
      EXPECT_EQ(sections[i].file_offset, expected[i].file_offset) << name << " " << expected[i].name;
      EXPECT_EQ(sections[i].size, expected[i].size) << name << " " << expected[i].name;
      EXPECT_EQ(sections[i].flags, expected[i].flags) << name << " " << expected[i].name;
    }
  }
}

TEST(ListSections, HeaderTablePastEofIsMalformed) {
  auto bytes = build_fixture(kTiny).bytes;
  put<std::uint64_t>(bytes, 0x28, bytes.size() + 0x1000);  // e_shoff
  EXPECT_EQ(code_of([&] { list_sections(bytes); }), ErrorCode::MalformedTable);
}

TEST(ListSections, BadSectionRangeIsKeptWithWarning) {
  auto bytes = build_fixture(kTiny).bytes;
  auto h = parse_header(bytes);
  auto sections = list_sections(bytes);
  std::size_t rodata = 0;
  for (std::size_t i = 0; i < sections.size(); ++i)
    if (sections[i].name == ".rodata")
      rodata = i + 1;  // +1 for the null section
  ASSERT_NE(rodata, 0u);
  put<std::uint64_t>(bytes, h.section_header_offset + rodata * 64 + 24, bytes.size() * 4);  // sh_offset
  std::vector<std::string> warnings;
  auto again = list_sections(bytes, &warnings);
  ASSERT_EQ(again.size(), sections.size());
  EXPECT_FALSE(again[rodata - 1].file_backed);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_FALSE(probe_warnings(bytes).empty());
}

TEST(ListSymbols, SymtabEntries) {
  auto bytes = build_fixture(kTiny).bytes;
  auto symbols = list_symbols(bytes);
  ASSERT_EQ(symbols.size(), 3u);
  // locals first, as in any symtab
  EXPECT_EQ(symbols[0].name, "helper");
  EXPECT_EQ(symbols[0].binding, SymbolBinding::Local);
  EXPECT_EQ(symbols[0].kind, SymbolKind::Func);
  EXPECT_EQ(symbols[0].value, 0x40100bu);
  EXPECT_EQ(symbols[1].name, "main");
  EXPECT_EQ(symbols[1].binding, SymbolBinding::Global);
  EXPECT_EQ(symbols[2].name, "counter");
  EXPECT_EQ(symbols[2].kind, SymbolKind::Object);
  for (const auto& s : symbols) {
    EXPECT_EQ(s.source, SymbolSource::Symtab);
    EXPECT_TRUE(s.defined);
  }
}

TEST(ListSymbols, StrippedHasDynsymOnly) {
  auto f = build_fixture(R"(
strip
entry main
section .text 0x401000 exec
label main
  ff 25 rel32:slot
section .got 0x403000 write
label slot
  00 00 00 00 00 00 00 00
import puts slot
)");
  auto symbols = list_symbols(f.bytes);
  ASSERT_EQ(symbols.size(), 1u);
  EXPECT_EQ(symbols[0].name, "puts");
  EXPECT_EQ(symbols[0].source, SymbolSource::Dynsym);
  EXPECT_FALSE(symbols[0].defined);
  LoadedImage image(f.bytes);
  ASSERT_EQ(image.import_slots().size(), 1u);
  EXPECT_EQ(image.import_slots().begin()->first, f.labels.at("slot"));
  EXPECT_EQ(image.import_slots().begin()->second, "puts");
}

TEST(ListSymbols, NoTablesMeansEmpty) {
  auto f = build_fixture("strip\nentry a\nsection .text 0x401000 exec\nlabel a\n c3\n");
  EXPECT_TRUE(list_symbols(f.bytes).empty());
}

TEST(ListSymbols, AgreesWithReadelf) {
  if (!have("readelf"))
    GTEST_SKIP() << "readelf not on PATH";
  const std::regex row(R"(^\s*\d+:\s+([0-9a-f]+)\s+(\d+)\s+(\w+)\s+(\w+)\s+\w+\s+(\w+)\s+(\S+))");
  for (const auto& name : test::fixture_names()) {
    auto bytes = test::load_fixture(name).bytes;
    auto symbols = list_symbols(bytes);
    std::istringstream in(readelf(bytes, "-sW"));
    std::vector<std::pair<std::string, Address>> expected;
    for (std::string line; std::getline(in, line);) {
      std::smatch m;
      if (!std::regex_search(line, m, row) || (m[3].str() == "NOTYPE" && m[6].str().empty()))
        continue;
      if (m[5].str() == "UND" && m[2].str() == "0" && m[3].str() == "NOTYPE")
        continue;  // null symbol
      expected.emplace_back(m[6].str(), std::stoull(m[1].str(), nullptr, 16));
    }
    ASSERT_EQ(symbols.size(), expected.size()) << name;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_EQ(symbols[i].name, expected[i].first) << name;
      EXPECT_EQ(symbols[i].value, expected[i].second) << name;
    }
  }
}

TEST(ExtractStrings, RunDefinition) {
  const std::string raw("\x01\x02\0hello\0", 9);
  Bytes bytes(raw.begin(), raw.end());
  auto found = extract_strings(bytes, 4, StringScope::WholeFile);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].text, "hello");
  EXPECT_EQ(found[0].file_offset, 3u);
  EXPECT_FALSE(found[0].section_name);

  const std::string short_run("abc\0", 4);
  EXPECT_TRUE(extract_strings(Bytes(short_run.begin(), short_run.end()), 4, StringScope::WholeFile).empty());
}

TEST(ExtractStrings, RodataStringCarriesSection) {
  auto bytes = build_fixture(kTiny).bytes;
  auto found = extract_strings(bytes);
  auto it = std::find_if(found.begin(), found.end(), [](const auto& s) { return s.text == "usage: %s"; });
  ASSERT_NE(it, found.end());
  EXPECT_EQ(it->section_name, ".rodata");
  for (const auto& s : found) {
    EXPECT_GE(s.length(), 4u);
    EXPECT_NE(s.text, "ab");
  }
  auto longer = extract_strings(bytes, 10);
  EXPECT_TRUE(std::none_of(longer.begin(), longer.end(), [](const auto& s) { return s.text == "usage: %s"; }));
}

TEST(ExtractStrings, WholeFileMatchesRegexOracle) {
  for (const auto& name : test::fixture_names()) {
    auto bytes = test::load_fixture(name).bytes;
    std::string raw(bytes.begin(), bytes.end());
    const std::regex run("[\\x20-\\x7e]{4,}");
    std::vector<std::pair<std::size_t, std::string>> expected;
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), run); it != std::sregex_iterator(); ++it)
      expected.emplace_back(static_cast<std::size_t>(it->position()), it->str());
    auto found = extract_strings(bytes, 4, StringScope::WholeFile);
    ASSERT_EQ(found.size(), expected.size()) << name;
    for (std::size_t i = 0; i < found.size(); ++i) {
      EXPECT_EQ(found[i].file_offset, expected[i].first);
      EXPECT_EQ(found[i].text, expected[i].second);
    }
  }
}

TEST(LoadedImage, AddressQueries) {
  auto f = build_fixture(kTiny);
  LoadedImage image(f.bytes);
  ASSERT_NE(image.executable_section_at(0x401000), nullptr);
  EXPECT_EQ(image.executable_section_at(0x402000), nullptr);
  ASSERT_NE(image.section_at(0x402000), nullptr);
  EXPECT_EQ(image.section_at(0x402000)->name, ".rodata");
  EXPECT_EQ(image.bytes_at(0x401000).size(), 12u);
  EXPECT_EQ(image.bytes_at(0x401000)[0], 0x55);
  EXPECT_TRUE(image.bytes_at(0x500000).empty());
  EXPECT_NE(image.find_section(".data"), nullptr);
  EXPECT_EQ(image.find_section(".bss"), nullptr);
}
