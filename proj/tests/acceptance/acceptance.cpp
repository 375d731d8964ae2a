// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <latch>
#include <map>
#include <random>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "oracles.hpp"
#include "spire/analysis.hpp"
#include "spire/capabilities.hpp"
#include "spire/model.hpp"
#include "spire/nexus/server.hpp"
#include "spire/serialize.hpp"
#include "spire/x86.hpp"
#include "support.hpp"

using namespace spire;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects the first few failures; later ones only bump the count.
struct Checker {
  std::size_t failures = 0;
  std::vector<std::string> first;
  void expect(bool ok, const std::string& what) {
    if (ok)
      return;
    if (first.size() < 3)
      first.push_back(what);
    ++failures;
  }
  Outcome outcome(std::string summary) const {
    if (failures == 0)
      return {true, std::move(summary)};
    std::string d = fmt::format("{} failure(s): ", failures);
    for (std::size_t i = 0; i < first.size(); ++i)
      d += (i ? "; " : "") + first[i];
    return {false, d};
  }
};

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// 1. decoder vs the frozen objdump corpus
Outcome disasm_oracle() {
  const auto start = std::chrono::steady_clock::now();
  Checker c;
  const auto corpus = test::load_disasm_corpus();
  std::set<int> rows;
  for (const auto& e : corpus) {
    rows.insert(e.row);
    auto decoded = x86::try_decode(ByteView(e.bytes), e.address);
    if (!std::holds_alternative<x86::Instruction>(decoded)) {
      c.expect(false, fmt::format("'{}' did not decode", e.reference_text));
      continue;
    }
    const auto& insn = std::get<x86::Instruction>(decoded);
    std::optional<Address> target;
    if (insn.flow.kind == x86::FlowKind::Call || insn.flow.kind == x86::FlowKind::JumpUncond ||
        insn.flow.kind == x86::FlowKind::JumpCond)
      target = insn.flow.target;
    c.expect(insn.mnemonic == e.mnemonic, fmt::format("'{}' mnemonic {}", e.reference_text, insn.mnemonic));
    c.expect(insn.length == e.length, fmt::format("'{}' length {}", e.reference_text, insn.length));
    c.expect(target == e.target, fmt::format("'{}' target", e.reference_text));
  }
  const std::size_t table = x86::subset_table().size();
  c.expect(corpus.size() >= 60, fmt::format("corpus has {} snippets", corpus.size()));
  c.expect(rows.size() == table && !rows.empty() && *rows.begin() == 0 &&
               *rows.rbegin() == static_cast<int>(table) - 1,
           fmt::format("corpus covers {} of {} rows", rows.size(), table));
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 5.0, fmt::format("took {:.2f} s", elapsed));
  return c.outcome(fmt::format("{} snippets, {}/{} rows, 100% match", corpus.size(), rows.size(), table));
}

// 2. block leaders vs the brute-force oracle
Outcome cfg_leaders() {
  Checker c;
  std::size_t checked = 0;
  for (const auto& name : test::fixture_names()) {
    const auto fx = test::load_fixture(name);
    const LoadedImage image{ByteView(fx.bytes)};
    const auto model = analyze_program(image, CapabilityRules::defaults());
    for (const auto& f : model.functions) {
      std::vector<x86::Instruction> flat;
      std::set<Address> starts;
      for (const auto& b : f.blocks) {
        starts.insert(b.start);
        flat.insert(flat.end(), b.instructions.begin(), b.instructions.end());
      }
      c.expect(starts == test::brute_force_leaders(flat, f.entry), fmt::format("{}:{}", name, f.name));
      ++checked;
    }
  }
  c.expect(checked >= 20, fmt::format("only {} functions", checked));
  return c.outcome(fmt::format("{} functions agree", checked));
}

// 3. call-graph soundness on the multi-function fixture
Outcome call_graph_soundness() {
  Checker c;
  const auto fx = test::load_fixture("calls");
  const LoadedImage image{ByteView(fx.bytes)};
  const auto model = analyze_program(image, CapabilityRules::defaults());
  auto fid = [&](const char* label) -> FunctionId {
    const auto* f = model.at_entry(fx.labels.at(label));
    return f ? f->id : static_cast<FunctionId>(-1);
  };
  auto at = [&](const char* label) { return fx.labels.at(label); };
  using Site = std::tuple<FunctionId, FunctionId, Address, bool>;
  const std::set<Site> expected{
      {fid("main"), fid("parse"), at("call_main_parse"), false},
      {fid("main"), fid("compute"), at("call_main_compute1"), false},
      {fid("main"), fid("compute"), at("call_main_compute2"), false},
      {fid("parse"), fid("helper_a"), at("call_parse_a"), false},
      {fid("parse"), fid("helper_b"), at("call_parse_b"), false},
      {fid("compute"), fid("compute"), at("call_compute_self"), false},
      {fid("orphan"), fid("helper_b"), at("call_orphan_b"), false},
      {fid("helper_b"), fid("finish"), at("jmp_b_finish"), true},
  };
  std::set<Site> actual;
  for (const auto& e : model.call_graph.edges)
    actual.insert({e.caller, e.callee, e.site, e.tail});
  c.expect(actual == expected, fmt::format("{} edges, expected {}", actual.size(), expected.size()));
  c.expect(actual.size() == model.call_graph.edges.size(), "duplicate edges");

  // Indirect call encodings counted by the reference disassembler over .text;
  // without objdump, fall back to the fixture's labelled indirect sites.
  std::size_t indirect = 0;
  std::string source = "labels";
  const Section* text = image.find_section(".text");
  if (text) {
    const auto bytes = image.section_bytes(*text);
    if (auto ref = test::objdump_reference(Bytes(bytes.begin(), bytes.end()), text->virtual_address)) {
      source = "objdump";
      for (const auto& insn : *ref)
        if (insn.mnemonic == "call" && !insn.target)
          ++indirect;
    }
  }
  if (source == "labels")
    for (const auto& [label, addr] : fx.labels)
      if (label.rfind("icall_", 0) == 0)
        ++indirect;
  c.expect(model.call_graph.unresolved.size() == indirect,
           fmt::format("{} unresolved, {} indirect calls ({})", model.call_graph.unresolved.size(), indirect, source));
  return c.outcome(fmt::format("{} edges exact, {} unresolved = {} indirect ({})", actual.size(),
                               model.call_graph.unresolved.size(), indirect, source));
}

// 4. layered layout properties
Outcome sugiyama_properties() {
  const auto start = std::chrono::steady_clock::now();
  Checker c;
  std::mt19937_64 rng(20240611);
  std::size_t improved = 0;
  for (int i = 0; i < 200; ++i) {
    const auto g = test::random_dag(rng, 30);
    const auto acyclic = layout::remove_cycles(g);
    const auto layers = layout::assign_layers(acyclic);
    const auto initial = layout::order_layers(acyclic, layers, 0);
    const auto final = layout::order_layers(acyclic, layers);
    const std::size_t before = test::brute_force_crossings(initial.order, initial.edges);
    const std::size_t after = test::brute_force_crossings(final.order, final.edges);
    c.expect(after <= before, fmt::format("dag {}: {} > {} crossings", i, after, before));
    improved += after < before;

    const auto laid = layout::layout_sugiyama(g);
    std::map<layout::NodeId, int> placed;
    for (const auto& n : laid.nodes)
      placed[n.id] = n.layer.value_or(-1);
    c.expect(placed.size() == g.nodes().size(), fmt::format("dag {}: node count", i));
    for (const auto& e : g.edges())
      if (e.source != e.target)
        c.expect(placed[e.source] < placed[e.target], fmt::format("dag {}: edge {}->{} not downward", i, e.source,
                                                                  e.target));
    c.expect(laid.crossings == after, fmt::format("dag {}: reported crossings differ", i));
  }
  for (const char* name : {"tree_binary", "tree_star", "tree_chain", "tree_shuffled", "tree_skewed", "forest"}) {
    const auto laid = layout::layout_sugiyama(test::load_graph(name));
    c.expect(laid.crossings == std::size_t{0}, fmt::format("{} ends with crossings", name));
  }
  const auto k22 = layout::layout_sugiyama(test::load_graph("k22"));
  c.expect(k22.crossings == std::size_t{1}, "K2,2 does not end with 1 crossing");
  const double elapsed = seconds_since(start);
  c.expect(elapsed < 10.0, fmt::format("took {:.2f} s", elapsed));
  return c.outcome(fmt::format("200 DAGs valid, {} improved, trees 0, K2,2 1", improved));
}

// 5. force-directed determinism and bounds
Outcome force_determinism() {
  Checker c;
  std::mt19937_64 rng(77);
  for (int i = 0; i < 50; ++i) {
    const auto g = test::random_graph(rng, 30);
    layout::ForceParams params;
    params.seed = rng();
    const auto a = to_json(layout::layout_force(g, params)).dump();
    const auto b = to_json(layout::layout_force(g, params)).dump();
    c.expect(a == b, fmt::format("graph {}: outputs differ", i));
    const double side = std::sqrt(10000.0 * static_cast<double>(std::max<std::size_t>(g.nodes().size(), 1)));
    for (const auto& n : layout::layout_force(g, params).nodes)
      c.expect(std::isfinite(n.x) && std::isfinite(n.y) && n.x >= 0 && n.x <= side && n.y >= 0 && n.y <= side,
               fmt::format("graph {}: node {} at ({}, {}) outside [0, {}]", i, n.id, n.x, n.y, side));
  }
  return c.outcome("50 graphs byte-identical and in bounds");
}

struct Http {
  test::TempDir dir;
  std::unique_ptr<nexus::Service> service;
  int port = 0;

  Http() {
    nexus::ServiceConfig config;
    config.store = dir / "store";
    config.port = 0;
    service = std::make_unique<nexus::Service>(config);
    port = service->start();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(30, 0);
    return c;
  }
};

Json slate(const std::string& id, const char* kind, Json binary, Json function, double x) {
  return {{"id", id},
          {"kind", kind},
          {"target", {{"binary", std::move(binary)}, {"function", std::move(function)}}},
          {"position", {x, -2.5, 1}},
          {"size", {320, 240.5}},
          {"scroll_offset", 17.25}};
}

// 6. workspace round-trip, concurrent writers, CLI vs API
Outcome service_contract() {
  Checker c;
  Http http;
  auto client = http.client();
  std::map<std::string, std::string> ids;
  for (const auto& name : test::fixture_names()) {
    const auto bytes = test::load_fixture(name).bytes;
    auto r = client.Post("/api/binaries?name=" + name, std::string(bytes.begin(), bytes.end()),
                         "application/octet-stream");
    if (!r || r->status / 100 != 2)
      return {false, fmt::format("upload of {} failed", name)};
    ids[name] = Json::parse(r->body)["id"].get<std::string>();
  }

  // Lossless round trip.
  const std::string bin = ids.at("calls");
  Json doc{{"id", "roundtrip"},
           {"binaries", std::set<std::string>{bin, ids.at("caps")}},
           {"slates",
            {slate("n", "notepad", nullptr, nullptr, 0), slate("h", "header", bin, nullptr, 1.5),
             slate("d", "disasm", bin, 2, 2), slate("p", "pseudocode", bin, 2, 3), slate("c", "cfg", bin, 1, 4),
             slate("g", "callgraph", ids.at("caps"), nullptr, 5), slate("s", "strings", bin, nullptr, 6),
             slate("q", "search_results", bin, nullptr, 7)}},
           {"notes", "line one\nline \"two\" é"},
           {"annotations",
            {{bin + ":1", {{"rename", "parse_args"}, {"comment", "reads argv"}, {"color", "#00ff88"}}},
             {bin + ":3", {{"comment", "leaf"}}}}},
           {"collapsed", {bin + ":0"}}};
  auto put = client.Put("/api/workspaces/roundtrip", Json{{"expected_revision", 0}, {"workspace", doc}}.dump(),
                        "application/json");
  c.expect(put && put->status == 201, "round-trip PUT not 201");
  auto got = client.Get("/api/workspaces/roundtrip");
  if (got && got->status == 200) {
    Json back = Json::parse(got->body);
    c.expect(back["revision"] == 1, "round-trip revision");
    back.erase("revision");
    c.expect(back == doc, "workspace changed in round trip: " + back.dump());
  } else {
    c.expect(false, "round-trip GET failed");
  }

  // Randomized two-writer trials.
  std::mt19937_64 rng(4242);
  std::size_t collisions = 0, conflicts = 0, trials_ok = 0;
  for (int t = 0; t < 100; ++t) {
    const std::string wid = fmt::format("trial-{}", t);
    Json ws{{"id", wid}, {"binaries", {bin}}, {"slates", {slate("n", "notepad", nullptr, nullptr, 0)}}, {"notes", ""}};
    std::vector<std::uint64_t> revisions;
    auto write = [&](httplib::Client& cl, std::uint64_t expected, const std::string& notes) {
      ws["notes"] = notes;
      auto r = cl.Put("/api/workspaces/" + wid, Json{{"expected_revision", expected}, {"workspace", ws}}.dump(),
                      "application/json");
      return r ? std::pair{r->status, Json::parse(r->body)} : std::pair{0, Json()};
    };
    auto [s0, first] = write(client, 0, "start");
    if (s0 != 201) {
      c.expect(false, fmt::format("{}: create returned {}", wid, s0));
      continue;
    }
    revisions.push_back(first["revision"].get<std::uint64_t>());
    const int sequential = static_cast<int>(rng() % 4);
    for (int k = 0; k < sequential; ++k) {
      auto [s, saved] = write(client, revisions.back(), fmt::format("seq {}", k));
      c.expect(s == 200, fmt::format("{}: sequential write returned {}", wid, s));
      if (s == 200)
        revisions.push_back(saved["revision"].get<std::uint64_t>());
    }

    const std::uint64_t base = revisions.back();
    const bool collide = rng() % 4 != 0;
    std::array<std::pair<int, Json>, 2> results;
    if (collide) {
      ++collisions;
      std::latch go(2);
      std::vector<std::thread> writers;
      for (int w = 0; w < 2; ++w)
        writers.emplace_back([&, w] {
          auto cl = http.client();
          Json mine = ws;
          mine["notes"] = fmt::format("writer {}", w);
          const std::string body = Json{{"expected_revision", base}, {"workspace", mine}}.dump();
          go.arrive_and_wait();
          auto r = cl.Put("/api/workspaces/" + wid, body, "application/json");
          results[w] = r ? std::pair{r->status, Json::parse(r->body)} : std::pair{0, Json()};
        });
      for (auto& th : writers)
        th.join();
    } else {
      // The second writer refreshes first, so nothing collides.
      results[0] = write(client, base, "writer 0");
      results[1] = write(client, base + 1, "writer 1");
    }
    std::size_t trial_conflicts = 0;
    for (const auto& [status, body] : results) {
      if (status == 409) {
        ++trial_conflicts;
        c.expect(body["code"] == "RevisionConflict", fmt::format("{}: 409 code {}", wid, body["code"].dump()));
        c.expect(body["detail"] == fmt::format("current_revision={}", base + 1), fmt::format("{}: 409 detail", wid));
      } else if (status == 200) {
        revisions.push_back(body["revision"].get<std::uint64_t>());
      } else {
        c.expect(false, fmt::format("{}: writer got status {}", wid, status));
      }
    }
    conflicts += trial_conflicts;
    c.expect(trial_conflicts == (collide ? 1u : 0u), fmt::format("{}: {} conflicts", wid, trial_conflicts));
    std::sort(revisions.begin(), revisions.end());
    bool gap_free = true;
    for (std::size_t i = 0; i < revisions.size(); ++i)
      gap_free = gap_free && revisions[i] == i + 1;
    auto final = client.Get("/api/workspaces/" + wid);
    const bool final_ok = final && final->status == 200 &&
                          Json::parse(final->body)["revision"] == revisions.size();
    c.expect(gap_free && final_ok, fmt::format("{}: revisions not gap-free", wid));
    trials_ok += gap_free && final_ok;
  }
  c.expect(conflicts == collisions, fmt::format("{} conflicts for {} collisions", conflicts, collisions));

  // CLI summary vs API aggregates.
  test::TempDir files;
  for (const auto& [name, id] : ids) {
    const auto path = files / (name + ".elf");
    test::write_bytes(path, test::load_fixture(name).bytes);
    const auto cli = test::run_command(fmt::format("{} analyze {} --store {}", test::shell_quote(test::cli_path()),
                                                   test::shell_quote(path.string()),
                                                   test::shell_quote((files / "store").string())));
    if (cli.exit_code != 0) {
      c.expect(false, fmt::format("{}: analyze exit {}", name, cli.exit_code));
      continue;
    }
    const Json from_cli = Json::parse(cli.out);
    auto summary = client.Get("/api/binaries/" + id + "/summary");
    auto functions = client.Get("/api/binaries/" + id + "/functions");
    auto graph = client.Get("/api/binaries/" + id + "/callgraph");
    if (!summary || !functions || !graph) {
      c.expect(false, fmt::format("{}: API request failed", name));
      continue;
    }
    c.expect(Json::parse(summary->body) == from_cli, fmt::format("{}: /summary differs from analyze", name));
    const Json fns = Json::parse(functions->body);
    const Json cg = Json::parse(graph->body)["call_graph"];
    std::size_t blocks = 0, insns = 0, calls = 0, tails = 0;
    std::map<std::string, std::size_t> tags;
    for (const auto& f : fns) {
      blocks += f["block_count"].get<std::size_t>();
      insns += f["instruction_count"].get<std::size_t>();
      for (const auto& tag : f["capabilities"])
        ++tags[tag["tag"].get<std::string>()];
    }
    for (const auto& e : cg["edges"])
      ++(e["tail"].get<bool>() ? tails : calls);
    const Json aggregates{{"artifact_id", id},
                          {"function_count", fns.size()},
                          {"block_count", blocks},
                          {"instruction_count", insns},
                          {"edge_counts", {{"call", calls}, {"tail_call", tails}, {"unresolved", cg["unresolved"].size()}}},
                          {"tags", tags}};
    c.expect(aggregates == from_cli, fmt::format("{}: API aggregates differ from analyze", name));
  }
  return c.outcome(fmt::format("round trip lossless, {}/100 trials gap-free, {} conflicts for {} collisions, "
                               "{} fixtures agree",
                               trials_ok, conflicts, collisions, ids.size()));
}

// 7. default capability rules on the fopen/socket fixture
Outcome capability_tagging() {
  Checker c;
  const auto fx = test::load_fixture("caps");
  const LoadedImage image{ByteView(fx.bytes)};
  const auto model = analyze_program(image, CapabilityRules::defaults());
  auto tags_of = [&](const char* label) {
    std::set<std::string> out;
    if (const auto* f = model.at_entry(fx.labels.at(label)))
      for (const auto& t : f->capabilities)
        out.insert(t.tag);
    return out;
  };
  c.expect(tags_of("open_config") == std::set<std::string>{"file-io"}, "open_config tags");
  c.expect(tags_of("connect_home") == std::set<std::string>{"network"}, "connect_home tags");
  return c.outcome("open_config {file-io}, connect_home {network}");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"disasm-oracle", disasm_oracle},
      {"cfg-leaders", cfg_leaders},
      {"callgraph-soundness", call_graph_soundness},
      {"sugiyama-properties", sugiyama_properties},
      {"force-determinism", force_determinism},
      {"service-contract", service_contract},
      {"capability-tagging", capability_tagging},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    std::cout << fmt::format("{} {} ({:.2f} s) {}\n", o.pass ? "PASS" : "FAIL", name, seconds_since(start), o.detail)
              << std::flush;
    failed += !o.pass;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed ? 1 : 0;
}
