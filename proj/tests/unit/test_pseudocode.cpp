#include <gtest/gtest.h>

#include <cstdlib>

#include "spire/capabilities.hpp"
#include "spire/fixture.hpp"
#include "spire/pseudocode.hpp"
#include "spire/store.hpp"
#include "support.hpp"

using namespace spire;

namespace {

ProgramModel model_of(const BuiltFixture& f) {
  LoadedImage image(f.bytes);
  return analyze_program(image, CapabilityRules::defaults());
}

std::string body(const std::string& bytes) {
  auto f = build_fixture("entry s\nsection .text 0x401000 exec\nlabel s func\n " + bytes + "\n");
  auto model = model_of(f);
  return render_pseudocode(model.functions.at(0), model);
}

std::string all_functions(const std::string& fixture) {
  auto model = model_of(test::load_fixture(fixture));
  std::string out;
  for (const auto& fn : model.functions)
    out += render_pseudocode(fn, model) + "\n";
  return out;
}

}  // namespace

TEST(Pseudocode, MovIsAssignment) {
  // mov rax, 5 (REX.W C7 /0)
  EXPECT_NE(body("48 c7 c0 05 00 00 00 c3").find("    rax = 5\n"), std::string::npos);
}

TEST(Pseudocode, CmpJzFolds) {
  // cmp rax, rbx; je L; ret; L: ret
  auto text = body("48 39 d8 74 01 c3 c3");
  EXPECT_NE(text.find("    if (rax == rbx) goto loc_401006\n"), std::string::npos) << text;
  EXPECT_EQ(text.find("cmp"), std::string::npos);
}

TEST(Pseudocode, Layout) {
  auto text = body("31 c0 83 c0 01 29 f8 c3");
  EXPECT_EQ(text,
            "s() {\n"
            "loc_401000:\n"
            "    eax ^= eax\n"
            "    eax += 1\n"
            "    eax -= edi\n"
            "    return\n"
            "}\n");
}

TEST(Pseudocode, UnfoldableAndUnknownLinesStayRaw) {
  auto text = body("85 ff 7c 02 90 c9 c3");  // test; jl does not fold
  EXPECT_NE(text.find("    test edi, edi\n"), std::string::npos) << text;
  EXPECT_NE(text.find("    if (flags.l) goto loc_"), std::string::npos) << text;
  EXPECT_NE(text.find("    nop\n"), std::string::npos);
  EXPECT_NE(text.find("    leave\n"), std::string::npos);
}

TEST(Pseudocode, UnsignedComparisons) {
  auto text = body("39 f7 72 01 c3 c3");
  EXPECT_NE(text.find("if ((unsigned)edi < (unsigned)esi) goto"), std::string::npos) << text;
}

TEST(Pseudocode, CallsUseNames) {
  auto model = model_of(test::load_fixture("caps"));
  const auto& open_config = *std::find_if(model.functions.begin(), model.functions.end(),
                                          [](const auto& f) { return f.name == "open_config"; });
  auto text = render_pseudocode(open_config, model);
  EXPECT_NE(text.find("    fopen@plt()\n"), std::string::npos) << text;
  EXPECT_NE(text.find("rdi = &[rip+"), std::string::npos) << text;
}

TEST(Pseudocode, NameLookupOverrides) {
  auto model = model_of(test::load_fixture("calls"));
  auto text = render_pseudocode(model.functions.at(0), [](Address) { return std::optional<std::string>("renamed"); });
  EXPECT_NE(text.find("    renamed()\n"), std::string::npos);
  EXPECT_NE(text.find("    (*rax)()\n"), std::string::npos);
}

TEST(Pseudocode, OneStatementPerInstruction) {
  auto model = model_of(test::load_fixture("cfg_shapes"));
  for (const auto& fn : model.functions) {
    auto text = render_pseudocode(fn, model);
    std::size_t statements = 0, labels = 0, folded = 0;
    for (std::size_t pos = 0; (pos = text.find('\n', pos)) != std::string::npos; ++pos) {
      const auto start = text.rfind('\n', pos - 1);
      const auto line = text.substr(start == std::string::npos ? 0 : start + 1, pos - start - 1);
      if (line.rfind("    ", 0) == 0) {
        ++statements;
        if (line.find("if (") != std::string::npos && line.find("flags.") == std::string::npos)
          ++folded;
      } else if (line.rfind("loc_", 0) == 0) {
        ++labels;
      }
    }
    EXPECT_EQ(labels, fn.blocks.size()) << fn.name;
    EXPECT_EQ(statements + folded, fn.instruction_count()) << fn.name;
  }
}

TEST(Pseudocode, GoldenFiles) {
  // Regenerate with SPIRE_UPDATE_GOLDEN=1, then review the diff by hand.
  for (const char* fixture : {"calls", "cfg_shapes"}) {
    const auto path = test::source_path(std::string("golden/") + fixture + ".pseudo");
    const auto text = all_functions(fixture);
    if (std::getenv("SPIRE_UPDATE_GOLDEN")) {
      write_file_atomic(path, text);
      continue;
    }
    EXPECT_EQ(text, test::read_text(path)) << fixture;
  }
}
