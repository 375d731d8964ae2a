//===- main.cpp - spire command line ---------------------------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
// Exit codes: 0 ok, 2 unsupported format, 3 I/O, 4 bad reference or usage,
// 5 internal.
//
//===----------------------------------------------------------------------===//
#include <charconv>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "spire/analysis.hpp"
#include "spire/fixture.hpp"
#include "spire/graphs.hpp"
#include "spire/nexus/server.hpp"
#include "spire/search.hpp"
#include "spire/version.hpp"
#include "spire/x86.hpp"

namespace {

using namespace spire;

enum Exit { kOk = 0, kUnsupported = 2, kIo = 3, kBadReference = 4, kInternal = 5 };

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotElf64:
    case ErrorCode::TruncatedHeader:
    case ErrorCode::MalformedTable:
      return kUnsupported;
    case ErrorCode::Io:
    case ErrorCode::StoreUnavailable:
    case ErrorCode::PortInUse:
      return kIo;
    case ErrorCode::UnknownBinary:
    case ErrorCode::UnknownFunction:
    case ErrorCode::UnknownWorkspace:
    case ErrorCode::BadRequest:
    case ErrorCode::ValidationFailed:
    case ErrorCode::EmptyQuery:
    case ErrorCode::InvalidIdentifier:
    case ErrorCode::DuplicateName:
    case ErrorCode::MalformedRules:
      return kBadReference;
    default:
      return kInternal;
  }
}

CapabilityRules load_rules(const std::string& path) {
  return path.empty() ? CapabilityRules::defaults() : CapabilityRules::load(path);
}

/// Analysis of a file without touching any store.
std::shared_ptr<const Analysis> analyze_file(const std::string& path, const CapabilityRules& rules) {
  auto bytes = std::make_shared<const Bytes>(read_binary_file(path));
  if (bytes->empty())
    throw Error(ErrorCode::NotElf64, fmt::format("{} is empty", path));
  require_elf64(*bytes);
  BinaryArtifact artifact;
  artifact.id = sha256_hex(*bytes);
  artifact.file_name = std::filesystem::path(path).filename().string();
  artifact.size_bytes = bytes->size();
  return std::make_shared<const Analysis>(std::move(artifact), std::move(bytes), rules);
}

void emit(const std::string& text, const std::string& output) {
  if (output.empty() || output == "-") {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(output, std::ios::binary);
  out << text;
  out.close();
  if (!out)
    throw Error(ErrorCode::Io, fmt::format("cannot write {}", output));
}

struct AnalyzeArgs {
  std::string path;
  std::string store;
  std::string rules;
  bool pretty = false;
};

int cmd_analyze(const AnalyzeArgs& a) {
  std::filesystem::path store_root = a.store;
  if (store_root.empty()) {
    nexus::ServiceConfig config;
    config.store = nexus::default_store_path();
    nexus::apply_env_overrides(config);
    store_root = config.store;
  }
  const Bytes bytes = read_binary_file(a.path);
  BinaryStore store(store_root);
  const auto artifact = store.ingest(bytes, std::filesystem::path(a.path).filename().string());
  AnalysisCache cache(store, load_rules(a.rules));
  const auto analysis = cache.get(artifact.id);
  std::cout << to_json(analysis->summary()).dump(a.pretty ? 2 : -1) << "\n";
  return kOk;
}

struct ExportArgs {
  std::string path;
  std::string what = "callgraph";
  std::string format = "json";
  std::string layout = "sugiyama";
  std::uint64_t seed = 1;
  std::string output;
  std::string rules;
};

int cmd_export(const ExportArgs& a) {
  const auto analysis = analyze_file(a.path, load_rules(a.rules));
  const ProgramModel& model = analysis->model();
  LayoutOptions options;
  options.kind = a.layout == "force" ? LayoutKind::Force : LayoutKind::Sugiyama;
  options.force.seed = a.seed;

  std::string text;
  if (a.what == "callgraph") {
    const auto laid = run_layout(call_graph_graph(model), options);
    text = a.format == "dot" ? call_graph_dot(model, laid) : to_json(laid).dump(2) + "\n";
  } else if (a.what.rfind("cfg:", 0) == 0) {
    const std::string fid_text = a.what.substr(4);
    FunctionId fid = 0;
    auto [ptr, ec] = std::from_chars(fid_text.data(), fid_text.data() + fid_text.size(), fid);
    if (fid_text.empty() || ec != std::errc() || ptr != fid_text.data() + fid_text.size())
      throw Error(ErrorCode::UnknownFunction, fmt::format("'{}' is not a function id", fid_text));
    const FunctionRecord& fn = model.get(fid);
    const auto laid = run_layout(cfg_graph(fn), options);
    text = a.format == "dot" ? cfg_dot(fn, laid) : to_json(laid, NodeIdStyle::Address).dump(2) + "\n";
  } else {
    throw Error(ErrorCode::BadRequest, fmt::format("--what must be callgraph or cfg:<fid>, not '{}'", a.what));
  }
  emit(text, a.output);
  return kOk;
}

struct SearchArgs {
  std::string path;
  std::string mnemonic;
  std::string operand;
  std::string bytes;
  std::string rules;
};

int cmd_search(const SearchArgs& a) {
  InstanceQuery query;
  if (!a.mnemonic.empty())
    query.mnemonic = a.mnemonic;
  if (!a.operand.empty())
    query.operand_text = a.operand;
  if (!a.bytes.empty()) {
    query.bytes = from_hex(a.bytes);
    if (!query.bytes || query.bytes->empty())
      throw Error(ErrorCode::BadRequest, fmt::format("'{}' is not a hex byte string", a.bytes));
  }
  if (query.empty())
    throw Error(ErrorCode::EmptyQuery, "give at least one of --mnemonic, --operand, --bytes");
  const auto analysis = analyze_file(a.path, load_rules(a.rules));
  const auto matches = find_instances(analysis->model(), query);
  Json list = Json::array();
  for (const auto& m : matches)
    list.push_back(to_json(m));
  std::cout << Json{{"count", matches.size()}, {"matches", std::move(list)}}.dump(2) << "\n";
  return kOk;
}

struct ServeArgs {
  std::string config;
  std::string store;
  std::string bind;
  std::optional<int> port;
};

int cmd_serve(const ServeArgs& a) {
  nexus::ServiceConfig config;
  if (!a.config.empty())
    config = nexus::load_config(a.config);
  else
    config.store = nexus::default_store_path();
  nexus::apply_env_overrides(config);
  if (!a.store.empty())
    config.store = a.store;
  if (!a.bind.empty())
    config.bind = a.bind;
  if (a.port)
    config.port = *a.port;

  // Block the stop signals before any thread exists; a waiter thread turns
  // them into a clean shutdown.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  nexus::Service service(config);
  const int port = service.bind();
  std::cout << fmt::format("spire {} listening on http://{}:{}\n", kVersion, config.bind, port)
            << fmt::format("port {}\n", port) << std::flush;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    service.stop();
  });
  service.run();
  // run() also returns if the listener fails; wake the waiter either way.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return kOk;
}

int cmd_mkfixture(const std::string& recipe_path, const std::string& output) {
  auto recipe = read_file(recipe_path);
  if (!recipe)
    throw Error(ErrorCode::Io, fmt::format("cannot read {}", recipe_path));
  const auto built = build_fixture(*recipe);
  std::ofstream out(output, std::ios::binary);
  out.write(reinterpret_cast<const char*>(built.bytes.data()), static_cast<std::streamsize>(built.bytes.size()));
  out.close();
  if (!out)
    throw Error(ErrorCode::Io, fmt::format("cannot write {}", output));
  return kOk;
}

std::string_view encoding_name(x86::Encoding e) {
  switch (e) {
    case x86::Encoding::ZO: return "ZO";
    case x86::Encoding::O: return "O";
    case x86::Encoding::OI: return "OI";
    case x86::Encoding::MR: return "MR";
    case x86::Encoding::RM: return "RM";
    case x86::Encoding::MI: return "MI";
    case x86::Encoding::MI8: return "MI8";
    case x86::Encoding::M: return "M";
    case x86::Encoding::D8: return "D8";
    case x86::Encoding::D32: return "D32";
  }
  return "?";
}

int cmd_subset_table() {
  std::cout << "| # | opcode | mnemonic | encoding | flow | notes |\n"
            << "|---|--------|----------|----------|------|-------|\n";
  int n = 0;
  for (const auto& row : x86::subset_table()) {
    std::string notes;
    if (row.rex_w)
      notes += *row.rex_w ? "REX.W set" : "REX.W clear";
    if (row.memory_only)
      notes += notes.empty() ? "memory operand only" : ", memory operand only";
    std::string opcode = row.opcode_text;
    if (row.extension)
      opcode += fmt::format(" /{}", *row.extension);
    std::cout << fmt::format("| {} | `{}` | {} | {} | {} | {} |\n", ++n, opcode, row.mnemonic,
                             encoding_name(row.encoding), to_string(row.flow), notes);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spire: ELF64 x86-64 analysis and layout service"};
  app.set_version_flag("--version", std::string(spire::kVersion));
  app.require_subcommand(1);

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Ingest and analyze a binary; print the summary JSON");
  analyze_cmd->add_option("path", analyze.path, "ELF64 file")->required();
  analyze_cmd->add_option("--store", analyze.store, "Store directory (default: $SPIRE_STORE or ~/.cache/spire)");
  analyze_cmd->add_option("--rules", analyze.rules, "Capability rules JSON");
  analyze_cmd->add_flag("--pretty", analyze.pretty, "Indent the JSON");

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand("export", "Lay out and export the call graph or one CFG");
  export_cmd->add_option("path", exp.path, "ELF64 file")->required();
  export_cmd->add_option("--what", exp.what, "callgraph or cfg:<fid>")->capture_default_str();
  export_cmd->add_option("--format", exp.format)->check(CLI::IsMember({"json", "dot"}))->capture_default_str();
  export_cmd->add_option("--layout", exp.layout)->check(CLI::IsMember({"sugiyama", "force"}))->capture_default_str();
  export_cmd->add_option("--seed", exp.seed, "Force-directed seed")->capture_default_str();
  export_cmd->add_option("-o,--output", exp.output, "Output file (default stdout)");
  export_cmd->add_option("--rules", exp.rules, "Capability rules JSON");

  SearchArgs search;
  auto* search_cmd = app.add_subcommand("search", "Find instruction instances");
  search_cmd->add_option("path", search.path, "ELF64 file")->required();
  search_cmd->add_option("--mnemonic", search.mnemonic, "Exact mnemonic");
  search_cmd->add_option("--operand", search.operand, "Substring of the operand text");
  search_cmd->add_option("--bytes", search.bytes, "Hex byte sequence");
  search_cmd->add_option("--rules", search.rules, "Capability rules JSON");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  serve_cmd->add_option("--config", serve.config, "Config JSON");
  serve_cmd->add_option("--store", serve.store, "Store directory");
  serve_cmd->add_option("--bind", serve.bind, "Bind address");
  serve_cmd->add_option("--port", serve.port, "Port, 0 for an ephemeral one")->check(CLI::Range(0, 65535));

  std::string recipe;
  std::string fixture_out;
  auto* fixture_cmd = app.add_subcommand("mkfixture", "Assemble an ELF64 test binary from a recipe");
  fixture_cmd->add_option("recipe", recipe, "Recipe file")->required();
  fixture_cmd->add_option("-o,--output", fixture_out, "Output ELF file")->required();

  auto* table_cmd = app.add_subcommand("subset-table", "Print the decoder's instruction table as Markdown");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadReference;
  }

  try {
    if (*analyze_cmd) return cmd_analyze(analyze);
    if (*export_cmd) return cmd_export(exp);
    if (*search_cmd) return cmd_search(search);
    if (*serve_cmd) return cmd_serve(serve);
    if (*fixture_cmd) return cmd_mkfixture(recipe, fixture_out);
    if (*table_cmd) return cmd_subset_table();
  } catch (const spire::Error& e) {
    std::cerr << fmt::format("spire: {}: {}\n", spire::to_string(e.code()), e.what());
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << fmt::format("spire: internal error: {}\n", e.what());
    return kInternal;
  }
  return kInternal;
}
