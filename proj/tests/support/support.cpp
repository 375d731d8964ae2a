#include "support.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include <sys/wait.h>

#include <fmt/format.h>
#include <json.hpp>

namespace spire::test {

namespace fs = std::filesystem;

fs::path source_path(const std::string& relative) { return fs::path(SPIRE_TEST_SOURCE_DIR) / relative; }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

BuiltFixture load_fixture(const std::string& name) {
  return build_fixture(read_text(source_path("fixtures/" + name + ".recipe")));
}

std::vector<std::string> fixture_names() {
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(source_path("fixtures")))
    if (entry.path().extension() == ".recipe")
      names.push_back(entry.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<CorpusEntry> load_disasm_corpus() {
  std::istringstream in(read_text(source_path("data/disasm_corpus.tsv")));
  std::vector<CorpusEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1)
      cols.push_back(line.substr(start, tab - start));
    cols.push_back(line.substr(start));
    if (cols.size() != 7)
      throw std::runtime_error("bad corpus line: " + line);
    CorpusEntry e;
    e.row = std::stoi(cols[0]);
    e.address = std::stoull(cols[1], nullptr, 16);
    e.bytes = *from_hex(cols[2]);
    e.mnemonic = cols[3];
    e.length = std::stoul(cols[4]);
    if (cols[5] != "-")
      e.target = std::stoull(cols[5], nullptr, 16);
    e.reference_text = cols[6];
    out.push_back(std::move(e));
  }
  return out;
}

layout::AbstractGraph load_graph(const std::string& name) {
  const auto j = nlohmann::json::parse(read_text(source_path("data/graphs/" + name + ".json")));
  layout::AbstractGraph g;
  for (const auto& n : j.at("nodes"))
    g.add_node(n.get<layout::NodeId>(), std::to_string(n.get<layout::NodeId>()), {40, 20});
  for (const auto& e : j.at("edges"))
    g.add_edge(e.at(0).get<layout::NodeId>(), e.at(1).get<layout::NodeId>());
  return g;
}

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "spire-test-XXXXXX").string();
  if (!::mkdtemp(pattern.data()))
    throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_bytes(const fs::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
}

CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = ::popen((command + " 2>/dev/null").c_str(), "r");
  if (!pipe)
    throw std::runtime_error("popen failed");
  std::array<char, 4096> buffer;
  std::size_t n;
  while ((n = std::fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
    result.out.append(buffer.data(), n);
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string cli_path() { return SPIRE_CLI_PATH; }

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s)
    out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

std::optional<std::vector<ReferenceInsn>> objdump_reference(const Bytes& data, Address vma) {
  static const bool available = run_command("command -v objdump").exit_code == 0;
  if (!available)
    return std::nullopt;
  TempDir dir;
  write_bytes(dir / "blob", data);
  const auto result = run_command(fmt::format("objdump -D -b binary -m i386:x86-64 -M intel --adjust-vma={:#x} {}",
                                              vma, shell_quote((dir / "blob").string())));
  if (result.exit_code != 0)
    return std::nullopt;

  static const std::regex line(R"(^\s*([0-9a-f]+):\t((?:[0-9a-f]{2} )+)\s*(?:\t(.*))?$)");
  static const std::set<std::string> branches{"call", "jmp", "jo", "jno", "jb",  "jae", "je",  "jne", "jbe",
                                              "ja",   "js",  "jns", "jp", "jnp", "jl",  "jge", "jle", "jg"};
  std::vector<ReferenceInsn> out;
  std::istringstream in(result.out);
  for (std::string text; std::getline(in, text);) {
    std::smatch m;
    if (!std::regex_match(text, m, line))
      continue;
    const std::size_t nbytes = m[2].str().size() / 3;
    if (!m[3].matched) {  // continuation of a long encoding
      if (!out.empty())
        out.back().length += nbytes;
      continue;
    }
    ReferenceInsn insn;
    insn.address = std::stoull(m[1].str(), nullptr, 16);
    insn.length = nbytes;
    std::string asm_text = m[3].str();
    asm_text = asm_text.substr(0, asm_text.find('#'));
    asm_text = std::regex_replace(asm_text, std::regex(R"(\s+)"), " ");
    while (!asm_text.empty() && asm_text.back() == ' ')
      asm_text.pop_back();
    insn.text = asm_text;
    const auto space = asm_text.find(' ');
    insn.mnemonic = asm_text.substr(0, space);
    if (space != std::string::npos && branches.count(insn.mnemonic)) {
      const std::string operand = asm_text.substr(space + 1);
      std::smatch t;
      if (std::regex_match(operand, t, std::regex(R"((0x[0-9a-f]+)(?: <.*>)?)")))
        insn.target = std::stoull(t[1].str(), nullptr, 16);
    }
    out.push_back(std::move(insn));
  }
  return out;
}

}  // namespace spire::test
