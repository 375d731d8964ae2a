#include <gtest/gtest.h>

#include "spire/error.hpp"
#include "spire/nexus/config.hpp"
#include "spire/store.hpp"
#include "support.hpp"

using namespace spire;
using namespace spire::nexus;
using spire::test::TempDir;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no Error thrown";
  return ErrorCode::Internal;
}

EnvLookup env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const char* name) -> std::optional<std::string> {
    if (auto it = vars.find(name); it != vars.end())
      return it->second;
    return std::nullopt;
  };
}

}  // namespace

TEST(Config, Defaults) {
  auto c = config_from_json(Json::object());
  EXPECT_EQ(c.port, kDefaultPort);
  EXPECT_EQ(c.bind, "127.0.0.1");
  EXPECT_EQ(c.store, default_store_path());
  EXPECT_FALSE(c.capability_rules);
  EXPECT_TRUE(c.adapters.empty());
  EXPECT_EQ(c.layout.kind, LayoutKind::Sugiyama);
}

TEST(Config, FullDocument) {
  auto j = Json::parse(R"({
    "store": "data/store", "bind": "0.0.0.0", "port": 0, "capability_rules": "/etc/rules.json",
    "layout": {"algorithm": "force", "node_gap": 10, "layer_gap": 50, "force_iterations": 20, "seed": 9},
    "adapters": {"parallelism": 3, "output_cap": 4096,
                 "enabled": [{"name": "od", "kind": "disassembly", "invocation": "objdump -d {input_path}",
                              "timeout": 30}]}})");
  auto c = config_from_json(j, "/srv/spire");
  EXPECT_EQ(c.store, "/srv/spire/data/store");
  EXPECT_EQ(c.bind, "0.0.0.0");
  EXPECT_EQ(c.port, 0);
  EXPECT_EQ(c.capability_rules, std::filesystem::path("/etc/rules.json"));
  EXPECT_EQ(c.layout.kind, LayoutKind::Force);
  EXPECT_EQ(c.layout.spacing.node_gap, 10);
  EXPECT_EQ(c.layout.spacing.layer_gap, 50);
  EXPECT_EQ(c.layout.force.iterations, 20);
  EXPECT_EQ(c.layout.force.seed, 9u);
  EXPECT_EQ(c.adapter_parallelism, 3u);
  EXPECT_EQ(c.adapter_output_cap, 4096u);
  ASSERT_EQ(c.adapters.size(), 1u);
  EXPECT_EQ(c.adapters[0].timeout_seconds, 30);
  EXPECT_EQ(c.adapters[0].kind, AdapterKind::Disassembly);
}

TEST(Config, Rejections) {
  auto bad = [](const char* text) { return code_of([&] { config_from_json(Json::parse(text)); }); };
  EXPECT_EQ(bad(R"({"prot": 1})"), ErrorCode::ValidationFailed);
  EXPECT_EQ(bad(R"({"port": 70000})"), ErrorCode::ValidationFailed);
  EXPECT_EQ(bad(R"({"port": -1})"), ErrorCode::ValidationFailed);
  EXPECT_EQ(bad(R"({"port": "80"})"), ErrorCode::ValidationFailed);
  EXPECT_EQ(bad(R"({"layout": {"algorithm": "circle"}})"), ErrorCode::ValidationFailed);
  EXPECT_EQ(bad(R"({"adapters": {"parallelism": 0}})"), ErrorCode::ValidationFailed);
  EXPECT_EQ(bad(R"({"adapters": {"enabled": [{"name": "a", "invocation": "x {input_path}"},
                                              {"name": "a", "invocation": "y {input_path}"}]}})"),
            ErrorCode::ValidationFailed);
  EXPECT_EQ(bad("[]"), ErrorCode::ValidationFailed);
}

TEST(Config, LoadFromFile) {
  TempDir dir;
  write_file_atomic(dir / "spire.json", R"({"store": "s", "port": 9000})");
  auto c = load_config(dir / "spire.json");
  EXPECT_EQ(c.store, dir / "s");
  EXPECT_EQ(c.port, 9000);
  write_file_atomic(dir / "broken.json", "{");
  EXPECT_EQ(code_of([&] { load_config(dir / "broken.json"); }), ErrorCode::ValidationFailed);
  EXPECT_EQ(code_of([&] { load_config(dir / "missing.json"); }), ErrorCode::Io);
}

TEST(Config, EnvOverrides) {
  ServiceConfig c;
  c.store = "/from/file";
  apply_env_overrides(c, env({{"SPIRE_STORE", "/from/env"}, {"SPIRE_PORT", "9100"}}));
  EXPECT_EQ(c.store, "/from/env");
  EXPECT_EQ(c.port, 9100);
  apply_env_overrides(c, env({}));
  EXPECT_EQ(c.port, 9100);
  EXPECT_EQ(code_of([&] { apply_env_overrides(c, env({{"SPIRE_PORT", "http"}})); }), ErrorCode::ValidationFailed);
  EXPECT_EQ(code_of([&] { apply_env_overrides(c, env({{"SPIRE_PORT", "65536"}})); }), ErrorCode::ValidationFailed);
}

TEST(Config, DefaultStorePath) {
  const char* xdg = std::getenv("XDG_CACHE_HOME");
  const char* home = std::getenv("HOME");
  auto p = default_store_path();
  if (xdg && *xdg) {
    EXPECT_EQ(p, std::filesystem::path(xdg) / "spire");
  } else if (home && *home) {
    EXPECT_EQ(p, std::filesystem::path(home) / ".cache/spire");
  }
  EXPECT_EQ(p.filename(), p.has_filename() && p.filename() == "spire-store" ? "spire-store" : "spire");
}
