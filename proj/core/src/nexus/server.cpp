//===- server.cpp - REST routes of the nexus service ----------------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/nexus/server.hpp"

#include <charconv>

#include <sys/socket.h>

#include <fmt/format.h>
#include <httplib.h>

#include "spire/graphs.hpp"
#include "spire/nexus/collapse.hpp"
#include "spire/pseudocode.hpp"
#include "spire/search.hpp"
#include "spire/version.hpp"

namespace spire::nexus {

using spire::to_json;

namespace {

using httplib::Request;
using httplib::Response;

constexpr std::size_t kMaxUpload = 256u << 20;
constexpr const char* kBinary = R"(/api/binaries/([^/]+))";
constexpr const char* kFunction = R"(/api/binaries/([^/]+)/functions/([^/]+))";

void send_json(Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_problem(Response& res, const Error& e) { send_json(res, problem_document(e), http_status(e.code())); }

[[noreturn]] void bad_request(const std::string& why) { throw Error(ErrorCode::BadRequest, why); }

std::optional<std::string> param(const Request& req, const char* key) {
  if (!req.has_param(key))
    return std::nullopt;
  return req.get_param_value(key);
}

template <typename T>
std::optional<T> parse_unsigned(std::string_view text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    return std::nullopt;
  return value;
}

FunctionId function_id(const std::string& text) {
  auto fid = parse_unsigned<FunctionId>(text);
  if (!fid)
    throw Error(ErrorCode::UnknownFunction, fmt::format("'{}' is not a function id", text));
  return *fid;
}

Json parse_body(const Request& req) {
  if (req.body.empty())
    return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    bad_request(fmt::format("request body is not JSON: {}", e.what()));
  }
}

/// User renames recorded in a workspace, by function id, for one binary.
std::map<FunctionId, std::string> renames_for(const Workspace& ws, const std::string& binary) {
  std::map<FunctionId, std::string> out;
  for (const auto& [key, a] : ws.annotations) {
    auto parsed = parse_function_key(key);
    if (parsed && parsed->first == binary && a.rename)
      out[parsed->second] = *a.rename;
  }
  return out;
}

/// Applies all renames at once so swaps between two functions are allowed.
/// Throws DuplicateName when the final names collide.
void apply_renames(ProgramModel& model, const std::map<FunctionId, std::string>& renames) {
  std::map<std::string, FunctionId> taken;
  for (const auto& f : model.functions) {
    auto it = renames.find(f.id);
    const std::string& name = it != renames.end() ? it->second : f.name;
    auto [slot, fresh] = taken.emplace(name, f.id);
    if (!fresh)
      throw Error(ErrorCode::DuplicateName,
                  fmt::format("functions {} and {} would both be named '{}'", slot->second, f.id, name));
  }
  for (const auto& [fid, name] : renames) {
    if (auto* f = model.find(fid)) {
      f->name = name;
      f->name_origin = NameOrigin::UserRename;
    }
  }
}

LayoutOptions layout_options(const Request& req, const LayoutOptions& defaults) {
  LayoutOptions options = defaults;
  if (auto layout = param(req, "layout")) {
    if (*layout == "sugiyama")
      options.kind = LayoutKind::Sugiyama;
    else if (*layout == "force")
      options.kind = LayoutKind::Force;
    else
      bad_request(fmt::format("layout must be sugiyama or force, not '{}'", *layout));
  }
  if (auto seed = param(req, "seed")) {
    auto value = parse_unsigned<std::uint64_t>(*seed);
    if (!value)
      bad_request(fmt::format("seed '{}' is not an unsigned integer", *seed));
    options.force.seed = *value;
  }
  return options;
}

std::set<NodeId> parse_collapse(const std::string& csv) {
  std::set<NodeId> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const auto comma = std::min(csv.find(',', start), csv.size());
    const auto item = std::string_view(csv).substr(start, comma - start);
    if (!item.empty()) {
      auto id = parse_unsigned<NodeId>(item);
      if (!id)
        bad_request(fmt::format("collapse entry '{}' is not a node id", item));
      out.insert(*id);
    }
    start = comma + 1;
  }
  return out;
}

}  // namespace

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BadRequest:
    case ErrorCode::ValidationFailed:
    case ErrorCode::InvalidIdentifier:
    case ErrorCode::EmptyQuery:
    case ErrorCode::MalformedRules:
      return 400;
    case ErrorCode::UnknownBinary:
    case ErrorCode::UnknownFunction:
    case ErrorCode::UnknownWorkspace:
    case ErrorCode::AdapterNotFound:
      return 404;
    case ErrorCode::RevisionConflict:
    case ErrorCode::DuplicateName:
      return 409;
    case ErrorCode::NotElf64:
      return 415;
    case ErrorCode::TruncatedHeader:
    case ErrorCode::MalformedTable:
    case ErrorCode::EntryOutOfRange:
    case ErrorCode::UnknownOpcode:
    case ErrorCode::Truncated:
    case ErrorCode::CycleDetected:
      return 422;
    case ErrorCode::AdapterFailed:
      return 502;
    case ErrorCode::StoreUnavailable:
      return 503;
    case ErrorCode::AdapterTimeout:
      return 504;
    case ErrorCode::PortInUse:
    case ErrorCode::Io:
    case ErrorCode::Internal:
      return 500;
  }
  return 500;
}

Json problem_document(const Error& e) {
  return {{"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}};
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      store_(config_.store),
      analyses_(store_, config_.capability_rules ? CapabilityRules::load(config_.capability_rules->string())
                                                 : CapabilityRules::defaults()),
      workspaces_(store_.workspace_dir(), [this](const std::string& id) { return store_.find(id).has_value(); }),
      adapters_(config_.adapters, store_, config_.adapter_parallelism, config_.adapter_output_cap),
      http_(std::make_unique<httplib::Server>()) {
  // httplib defaults to SO_REUSEPORT, which would let a second service share
  // the port instead of failing with PortInUse.
  http_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  http_->set_payload_max_length(kMaxUpload);
  install_routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  if (port_ >= 0)
    return port_;
  const int bound = config_.port == 0 ? http_->bind_to_any_port(config_.bind)
                                      : (http_->bind_to_port(config_.bind, config_.port) ? config_.port : -1);
  if (bound < 0)
    throw Error(ErrorCode::PortInUse, fmt::format("cannot listen on {}:{}", config_.bind, config_.port));
  port_ = bound;
  return port_;
}

void Service::run() {
  bind();
  http_->listen_after_bind();
}

int Service::start() {
  const int port = bind();
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return port;
}

void Service::stop() {
  if (http_)
    http_->stop();
  if (thread_.joinable())
    thread_.join();
}

void Service::install_routes() {
  using Handler = std::function<void(const Request&, Response&)>;
  auto guarded = [](Handler h) {
    return [h = std::move(h)](const Request& req, Response& res) {
      try {
        h(req, res);
      } catch (const Error& e) {
        send_problem(res, e);
      } catch (const Json::exception& e) {
        send_problem(res, Error(ErrorCode::BadRequest, e.what()));
      } catch (const std::exception& e) {
        send_problem(res, Error(ErrorCode::Internal, e.what()));
      }
    };
  };
  auto& http = *http_;

  http.set_error_handler([](const Request& req, Response& res) {
    if (!res.body.empty())
      return httplib::Server::HandlerResponse::Unhandled;
    send_json(res,
              {{"code", res.status == 404 ? "NotFound" : "HttpError"},
               {"message", fmt::format("{} {}", req.method, req.path)},
               {"detail", httplib::status_message(res.status)}},
              res.status);
    return httplib::Server::HandlerResponse::Handled;
  });

  // Analysis view, with workspace renames applied when ?workspace= is given.
  struct View {
    std::shared_ptr<const Analysis> analysis;
    std::shared_ptr<const ProgramModel> model;
  };
  auto view = [this](const Request& req, const std::string& id) {
    auto analysis = analyses_.get(id);
    View v{analysis, std::shared_ptr<const ProgramModel>(analysis, &analysis->model())};
    if (auto wid = param(req, "workspace")) {
      const auto renames = renames_for(workspaces_.get(*wid), id);
      if (!renames.empty()) {
        auto copy = std::make_shared<ProgramModel>(analysis->model());
        apply_renames(*copy, renames);
        v.model = std::move(copy);
      }
    }
    return v;
  };

  http.Get("/api/health", guarded([](const Request&, Response& res) {
             send_json(res, {{"status", "ok"}, {"version", std::string(kVersion)}});
           }));

  http.Post("/api/binaries", guarded([this](const Request& req, Response& res) {
              std::string name;
              const std::string* content = nullptr;
              if (req.is_multipart_form_data()) {
                if (!req.has_file("file"))
                  bad_request("multipart upload needs a 'file' part");
                const auto& file = req.files.find("file")->second;
                name = file.filename;
                content = &file.content;
              } else {
                name = param(req, "name").value_or("upload");
                content = &req.body;
              }
              const ByteView bytes(reinterpret_cast<const std::uint8_t*>(content->data()), content->size());
              require_elf64(bytes);
              const bool existed = store_.find(sha256_hex(bytes)).has_value();
              const auto artifact = store_.ingest(bytes, name);
              send_json(res, to_json(artifact), existed ? 200 : 201);
            }));

  http.Get("/api/binaries", guarded([this](const Request&, Response& res) {
             Json list = Json::array();
             for (const auto& a : store_.list())
               list.push_back(to_json(a));
             send_json(res, list);
           }));

  http.Get(std::string(kBinary), guarded([this](const Request& req, Response& res) {
             send_json(res, to_json(store_.get(req.matches[1].str())));
           }));

  http.Get(std::string(kBinary) + "/header", guarded([this](const Request& req, Response& res) {
             const auto a = analyses_.get(req.matches[1].str());
             Json sections = Json::array();
             for (const auto& s : a->image().sections())
               sections.push_back(to_json(s));
             send_json(res, {{"header", to_json(a->image().header())},
                             {"sections", std::move(sections)},
                             {"warnings", a->image().warnings()}});
           }));

  http.Get(std::string(kBinary) + "/strings", guarded([this](const Request& req, Response& res) {
             const std::string id = req.matches[1].str();
             std::size_t min_len = kDefaultMinStringLength;
             if (auto text = param(req, "min_len")) {
               auto v = parse_unsigned<std::size_t>(*text);
               if (!v || *v == 0)
                 bad_request(fmt::format("min_len '{}' must be a positive integer", *text));
               min_len = *v;
             }
             StringScope scope = StringScope::AllocatedSections;
             if (auto text = param(req, "scope")) {
               if (*text == "file")
                 scope = StringScope::WholeFile;
               else if (*text != "allocated")
                 bad_request("scope must be allocated or file");
             }
             const auto bytes = store_.bytes(id);
             Json list = Json::array();
             for (const auto& s : extract_strings(ByteView(*bytes), min_len, scope))
               list.push_back(to_json(s));
             send_json(res, list);
           }));

  http.Get(std::string(kBinary) + "/symbols", guarded([this](const Request& req, Response& res) {
             const auto a = analyses_.get(req.matches[1].str());
             Json list = Json::array();
             for (const auto& s : a->image().symbols())
               list.push_back(to_json(s));
             send_json(res, list);
           }));

  http.Get(std::string(kBinary) + "/functions", guarded([view](const Request& req, Response& res) {
             const auto v = view(req, req.matches[1].str());
             Json list = Json::array();
             for (const auto& f : v.model->functions)
               list.push_back(function_summary_json(f));
             send_json(res, list);
           }));

  http.Get(std::string(kBinary) + "/summary", guarded([this](const Request& req, Response& res) {
             send_json(res, to_json(analyses_.get(req.matches[1].str())->summary()));
           }));

  http.Get(std::string(kBinary) + "/capabilities", guarded([this](const Request& req, Response& res) {
             send_json(res, capabilities_json(analyses_.get(req.matches[1].str())->model()));
           }));

  http.Get(std::string(kFunction), guarded([view](const Request& req, Response& res) {
             const auto v = view(req, req.matches[1].str());
             send_json(res, function_summary_json(v.model->get(function_id(req.matches[2].str()))));
           }));

  http.Get(std::string(kFunction) + "/disasm", guarded([view](const Request& req, Response& res) {
             const auto v = view(req, req.matches[1].str());
             const auto& fn = v.model->get(function_id(req.matches[2].str()));
             std::vector<const x86::Instruction*> insns;
             for (const auto& b : fn.blocks)
               for (const auto& i : b.instructions)
                 insns.push_back(&i);
             std::sort(insns.begin(), insns.end(), [](auto* a, auto* b) { return a->address < b->address; });
             Json list = Json::array();
             for (const auto* i : insns)
               list.push_back(to_json(*i));
             send_json(res, {{"function", function_summary_json(fn)}, {"instructions", std::move(list)}});
           }));

  http.Get(std::string(kFunction) + "/pseudocode", guarded([view](const Request& req, Response& res) {
             const auto v = view(req, req.matches[1].str());
             const auto& fn = v.model->get(function_id(req.matches[2].str()));
             send_json(res, {{"function", function_summary_json(fn)}, {"text", render_pseudocode(fn, *v.model)}});
           }));

  http.Get(std::string(kFunction) + "/cfg", guarded([this, view](const Request& req, Response& res) {
             const auto options = layout_options(req, config_.layout);
             const auto v = view(req, req.matches[1].str());
             const auto& fn = v.model->get(function_id(req.matches[2].str()));
             send_json(res, {{"function", function_cfg_json(fn)},
                             {"layout", to_json(run_layout(cfg_graph(fn), options), NodeIdStyle::Address)}});
           }));

  http.Get(std::string(kBinary) + "/callgraph", guarded([this, view](const Request& req, Response& res) {
             const auto options = layout_options(req, config_.layout);
             const auto collapse = parse_collapse(param(req, "collapse").value_or(""));
             const auto v = view(req, req.matches[1].str());
             const auto full = call_graph_graph(*v.model);
             Json groups = Json::array();
             layout::LaidOutGraph laid;
             if (collapse.empty()) {
               laid = run_layout(full, options);
             } else {
               const auto quotient = collapse_graph(full, collapse);
               for (const auto& g : quotient.groups)
                 groups.push_back({{"id", g.representative}, {"absorbed", g.absorbed}});
               laid = run_layout(quotient.graph, options);
             }
             send_json(res, {{"call_graph", call_graph_json(*v.model)},
                             {"collapsed", std::move(groups)},
                             {"layout", to_json(laid)}});
           }));

  http.Get(std::string(kBinary) + "/search", guarded([this](const Request& req, Response& res) {
             InstanceQuery query;
             if (auto m = param(req, "mnemonic"); m && !m->empty())
               query.mnemonic = *m;
             if (auto o = param(req, "operand"); o && !o->empty())
               query.operand_text = *o;
             if (auto b = param(req, "bytes"); b && !b->empty()) {
               query.bytes = from_hex(*b);
               if (!query.bytes || query.bytes->empty())
                 bad_request(fmt::format("bytes '{}' is not a hex string", *b));
             }
             const auto matches = find_instances(analyses_.get(req.matches[1].str())->model(), query);
             Json list = Json::array();
             for (const auto& m : matches)
               list.push_back(to_json(m));
             send_json(res, {{"count", matches.size()}, {"matches", std::move(list)}});
           }));

  http.Post(std::string(kFunction) + "/rename", guarded([this](const Request& req, Response& res) {
              const std::string id = req.matches[1].str();
              const FunctionId fid = function_id(req.matches[2].str());
              const Json body = parse_body(req);
              if (!body.contains("name") || !body["name"].is_string())
                bad_request("rename needs a string 'name'");
              if (!body.contains("workspace") || !body["workspace"].is_string())
                bad_request("rename needs the 'workspace' that records it");
              std::optional<std::uint64_t> expected;
              if (body.contains("expected_revision")) {
                if (!body["expected_revision"].is_number_unsigned())
                  bad_request("expected_revision must be a non-negative integer");
                expected = body["expected_revision"].get<std::uint64_t>();
              }
              const std::string name = body["name"].get<std::string>();
              const auto analysis = analyses_.get(id);
              analysis->model().get(fid);
              if (!is_valid_identifier(name))
                throw Error(ErrorCode::InvalidIdentifier, fmt::format("'{}' is not a valid identifier", name));

              ProgramModel renamed;
              const auto saved = workspaces_.update(body["workspace"].get<std::string>(), [&](Workspace& ws) {
                if (expected && *expected != ws.revision)
                  throw Error(ErrorCode::RevisionConflict,
                              fmt::format("workspace '{}' is at revision {}, not {}", ws.id, ws.revision, *expected),
                              fmt::format("current_revision={}", ws.revision));
                if (!ws.binaries.count(id))
                  throw Error(ErrorCode::ValidationFailed, fmt::format("binary '{}' is not in workspace '{}'", id, ws.id));
                auto renames = renames_for(ws, id);
                renames[fid] = name;
                renamed = analysis->model();
                apply_renames(renamed, renames);
                ws.annotations[function_key(id, fid)].rename = name;
              });
              send_json(res, {{"function", function_summary_json(renamed.get(fid))},
                              {"workspace_revision", saved.revision}});
            }));

  http.Get(R"(/api/workspaces/([^/]+))", guarded([this](const Request& req, Response& res) {
             send_json(res, to_json(workspaces_.get(req.matches[1].str())));
           }));

  http.Put(R"(/api/workspaces/([^/]+))", guarded([this](const Request& req, Response& res) {
             const std::string wid = req.matches[1].str();
             Json body = parse_body(req);
             if (!body.contains("expected_revision") || !body["expected_revision"].is_number_unsigned())
               bad_request("PUT needs a non-negative integer 'expected_revision'");
             if (!body.contains("workspace") || !body["workspace"].is_object())
               bad_request("PUT needs a 'workspace' object");
             Json& doc = body["workspace"];
             if (!doc.contains("id"))
               doc["id"] = wid;
             Workspace ws = workspace_from_json(doc);
             if (ws.id != wid)
               throw Error(ErrorCode::ValidationFailed,
                           fmt::format("workspace id '{}' does not match the path '{}'", ws.id, wid));
             const auto saved = workspaces_.save(std::move(ws), body["expected_revision"].get<std::uint64_t>());
             send_json(res, to_json(saved), saved.revision == 1 ? 201 : 200);
           }));

  http.Get("/api/adapters", guarded([this](const Request&, Response& res) {
             Json list = Json::array();
             for (const auto& d : adapters_.adapters())
               list.push_back(to_json(d));
             send_json(res, list);
           }));

  http.Post(R"(/api/adapters/([^/]+)/run)", guarded([this](const Request& req, Response& res) {
              const std::string name = req.matches[1].str();
              const Json body = parse_body(req);
              if (!body.contains("binary") || !body["binary"].is_string())
                bad_request("adapter run needs a 'binary' id");
              const std::string id = body["binary"].get<std::string>();
              store_.get(id);
              std::optional<Address> addr;
              if (body.contains("function") && !body["function"].is_null()) {
                if (!body["function"].is_number_unsigned())
                  bad_request("'function' must be a function id");
                addr = analyses_.get(id)->model().get(body["function"].get<FunctionId>()).entry;
              }
              Json out = to_json(adapters_.run(name, id, addr));
              out["adapter"] = name;
              send_json(res, out);
            }));
}

}  // namespace spire::nexus
