//===- workspace.cpp - Workspace documents and revisioned storage ---------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/nexus/workspace.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "spire/error.hpp"
#include "spire/store.hpp"

namespace spire::nexus {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<SlateKind, std::string_view>, 8> kKindNames{{
    {SlateKind::Header, "header"},
    {SlateKind::Strings, "strings"},
    {SlateKind::Disasm, "disasm"},
    {SlateKind::Pseudocode, "pseudocode"},
    {SlateKind::Cfg, "cfg"},
    {SlateKind::CallGraph, "callgraph"},
    {SlateKind::Notepad, "notepad"},
    {SlateKind::SearchResults, "search_results"},
}};

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::ValidationFailed, why); }

const Json& field(const Json& j, const char* key, const char* where) {
  if (!j.contains(key))
    invalid(fmt::format("{}: missing '{}'", where, key));
  return j.at(key);
}

std::string text_field(const Json& j, const char* key, const char* where) {
  const Json& v = field(j, key, where);
  if (!v.is_string())
    invalid(fmt::format("{}: '{}' must be a string", where, key));
  return v.get<std::string>();
}

double number(const Json& v, const std::string& what) {
  if (!v.is_number())
    invalid(fmt::format("{} must be a number", what));
  return v.get<double>();
}

template <std::size_t N>
std::array<double, N> number_array(const Json& v, const std::string& what) {
  if (!v.is_array() || v.size() != N)
    invalid(fmt::format("{} must be an array of {} numbers", what, N));
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i)
    out[i] = number(v[i], what);
  return out;
}

std::optional<std::string> optional_text(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null())
    return std::nullopt;
  if (!j.at(key).is_string())
    invalid(fmt::format("{}: '{}' must be a string", where, key));
  return j.at(key).get<std::string>();
}

bool is_rgb(std::string_view s) {
  if (s.size() != 7 || s[0] != '#')
    return false;
  for (char c : s.substr(1))
    if (!std::isxdigit(static_cast<unsigned char>(c)))
      return false;
  return true;
}

}  // namespace

std::string_view to_string(SlateKind kind) noexcept {
  for (const auto& [k, name] : kKindNames)
    if (k == kind)
      return name;
  return "unknown";
}

std::optional<SlateKind> slate_kind_from_string(std::string_view text) noexcept {
  for (const auto& [k, name] : kKindNames)
    if (name == text)
      return k;
  return std::nullopt;
}

bool is_function_scoped(SlateKind kind) noexcept {
  return kind == SlateKind::Disasm || kind == SlateKind::Pseudocode || kind == SlateKind::Cfg;
}

std::string function_key(std::string_view binary, FunctionId fid) { return fmt::format("{}:{}", binary, fid); }

std::optional<std::pair<std::string, FunctionId>> parse_function_key(std::string_view key) {
  const auto colon = key.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == key.size())
    return std::nullopt;
  FunctionId fid = 0;
  const char* first = key.data() + colon + 1;
  const char* last = key.data() + key.size();
  auto [ptr, ec] = std::from_chars(first, last, fid);
  if (ec != std::errc() || ptr != last)
    return std::nullopt;
  return std::pair{std::string(key.substr(0, colon)), fid};
}

bool is_valid_token(std::string_view token) noexcept {
  if (token.empty() || token.size() > 64)
    return false;
  for (char c : token)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.')
      return false;
  return token != "." && token != "..";
}

Json to_json(const Workspace& ws) {
  Json slates = Json::array();
  for (const auto& s : ws.slates) {
    Json target = Json::object();
    target["binary"] = s.target.binary ? Json(*s.target.binary) : Json(nullptr);
    target["function"] = s.target.function ? Json(*s.target.function) : Json(nullptr);
    slates.push_back({{"id", s.id},
                      {"kind", to_string(s.kind)},
                      {"target", std::move(target)},
                      {"position", s.position},
                      {"size", s.size},
                      {"scroll_offset", s.scroll_offset}});
  }
  Json annotations = Json::object();
  for (const auto& [key, a] : ws.annotations) {
    Json entry = Json::object();
    if (a.rename) entry["rename"] = *a.rename;
    if (a.comment) entry["comment"] = *a.comment;
    if (a.color) entry["color"] = *a.color;
    annotations[key] = std::move(entry);
  }
  return {{"id", ws.id},
          {"revision", ws.revision},
          {"binaries", ws.binaries},
          {"slates", std::move(slates)},
          {"notes", ws.notes},
          {"annotations", std::move(annotations)},
          {"collapsed", ws.collapsed}};
}

Workspace workspace_from_json(const Json& j) {
  if (!j.is_object())
    invalid("workspace must be a JSON object");
  Workspace ws;
  ws.id = text_field(j, "id", "workspace");
  if (j.contains("revision")) {
    if (!j["revision"].is_number_unsigned())
      invalid("workspace: 'revision' must be a non-negative integer");
    ws.revision = j["revision"].get<std::uint64_t>();
  }
  if (j.contains("binaries")) {
    if (!j["binaries"].is_array())
      invalid("workspace: 'binaries' must be an array");
    for (const auto& b : j["binaries"]) {
      if (!b.is_string())
        invalid("workspace: binary ids must be strings");
      ws.binaries.insert(b.get<std::string>());
    }
  }
  if (j.contains("slates")) {
    if (!j["slates"].is_array())
      invalid("workspace: 'slates' must be an array");
    for (const auto& sj : j["slates"]) {
      if (!sj.is_object())
        invalid("slate must be an object");
      Slate s;
      s.id = text_field(sj, "id", "slate");
      const std::string where = fmt::format("slate '{}'", s.id);
      const std::string kind = text_field(sj, "kind", where.c_str());
      auto k = slate_kind_from_string(kind);
      if (!k)
        invalid(fmt::format("{}: unknown kind '{}'", where, kind));
      s.kind = *k;
      if (sj.contains("target") && !sj["target"].is_null()) {
        const Json& t = sj["target"];
        if (!t.is_object())
          invalid(fmt::format("{}: target must be an object", where));
        s.target.binary = optional_text(t, "binary", where);
        if (t.contains("function") && !t["function"].is_null()) {
          if (!t["function"].is_number_unsigned() || t["function"].get<std::uint64_t>() > UINT32_MAX)
            invalid(fmt::format("{}: target.function must be a function id", where));
          s.target.function = t["function"].get<FunctionId>();
        }
      }
      s.position = number_array<3>(field(sj, "position", where.c_str()), where + " position");
      s.size = number_array<2>(field(sj, "size", where.c_str()), where + " size");
      if (sj.contains("scroll_offset"))
        s.scroll_offset = number(sj["scroll_offset"], where + " scroll_offset");
      ws.slates.push_back(std::move(s));
    }
  }
  if (j.contains("notes")) {
    if (!j["notes"].is_string())
      invalid("workspace: 'notes' must be a string");
    ws.notes = j["notes"].get<std::string>();
  }
  if (j.contains("annotations")) {
    if (!j["annotations"].is_object())
      invalid("workspace: 'annotations' must be an object");
    for (const auto& [key, aj] : j["annotations"].items()) {
      if (!aj.is_object())
        invalid(fmt::format("annotation '{}' must be an object", key));
      const std::string where = fmt::format("annotation '{}'", key);
      Annotation a;
      a.rename = optional_text(aj, "rename", where);
      a.comment = optional_text(aj, "comment", where);
      a.color = optional_text(aj, "color", where);
      ws.annotations[key] = std::move(a);
    }
  }
  if (j.contains("collapsed")) {
    if (!j["collapsed"].is_array())
      invalid("workspace: 'collapsed' must be an array");
    for (const auto& c : j["collapsed"]) {
      if (!c.is_string())
        invalid("workspace: collapsed entries must be function keys");
      ws.collapsed.insert(c.get<std::string>());
    }
  }
  return ws;
}

void validate(const Workspace& ws) {
  if (!is_valid_token(ws.id))
    invalid(fmt::format("workspace id '{}' is not a token", ws.id));
  for (const auto& b : ws.binaries)
    if (!BinaryStore::is_valid_id(b))
      invalid(fmt::format("'{}' is not an artifact id", b));

  std::set<std::string> slate_ids;
  std::size_t notepads = 0;
  for (const auto& s : ws.slates) {
    const std::string where = fmt::format("slate '{}'", s.id);
    if (!is_valid_token(s.id))
      invalid(fmt::format("{}: id is not a token", where));
    if (!slate_ids.insert(s.id).second)
      invalid(fmt::format("{}: duplicate slate id", where));
    if (s.kind == SlateKind::Notepad)
      ++notepads;
    for (double v : s.position)
      if (!std::isfinite(v))
        invalid(fmt::format("{}: position must be finite", where));
    for (double v : s.size)
      if (!std::isfinite(v) || v <= 0)
        invalid(fmt::format("{}: size must be positive", where));
    if (!std::isfinite(s.scroll_offset) || s.scroll_offset < 0)
      invalid(fmt::format("{}: scroll_offset must be >= 0", where));
    if (!s.target.binary) {
      if (s.kind != SlateKind::Notepad)
        invalid(fmt::format("{}: target.binary is required", where));
    } else if (!ws.binaries.count(*s.target.binary)) {
      invalid(fmt::format("{}: target binary '{}' is not in the workspace", where, *s.target.binary));
    }
    if (is_function_scoped(s.kind) && !s.target.function)
      invalid(fmt::format("{}: {} slates need target.function", where, to_string(s.kind)));
  }
  if (notepads != 1)
    invalid(fmt::format("a workspace has exactly one notepad slate, found {}", notepads));

  auto check_key = [&](const std::string& key, const char* what) {
    auto parsed = parse_function_key(key);
    if (!parsed)
      invalid(fmt::format("{} key '{}' is not <binary>:<function>", what, key));
    if (!ws.binaries.count(parsed->first))
      invalid(fmt::format("{} key '{}' names a binary outside the workspace", what, key));
  };
  std::map<std::string, std::set<std::string>> renames_by_binary;
  for (const auto& [key, a] : ws.annotations) {
    check_key(key, "annotation");
    if (a.rename) {
      if (!is_valid_identifier(*a.rename))
        invalid(fmt::format("annotation '{}': '{}' is not an identifier", key, *a.rename));
      if (!renames_by_binary[parse_function_key(key)->first].insert(*a.rename).second)
        invalid(fmt::format("annotation '{}': name '{}' is used twice", key, *a.rename));
    }
    if (a.color && !is_rgb(*a.color))
      invalid(fmt::format("annotation '{}': color must be #rrggbb", key));
  }
  for (const auto& key : ws.collapsed)
    check_key(key, "collapsed");
}

WorkspaceStore::WorkspaceStore(fs::path dir, BinaryCheck binary_exists)
    : dir_(std::move(dir)), binary_exists_(std::move(binary_exists)) {}

fs::path WorkspaceStore::path_for(std::string_view id) const { return dir_ / (std::string(id) + ".json"); }

std::optional<Workspace> WorkspaceStore::find(std::string_view id) const {
  if (!is_valid_token(id))
    return std::nullopt;
  auto text = read_file(path_for(id));
  if (!text)
    return std::nullopt;
  try {
    return workspace_from_json(Json::parse(*text));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Internal, fmt::format("workspace '{}' is corrupt: {}", id, e.what()));
  }
}

Workspace WorkspaceStore::get(std::string_view id) const {
  std::lock_guard guard(mutex_);
  if (auto ws = find(id))
    return *ws;
  throw Error(ErrorCode::UnknownWorkspace, fmt::format("unknown workspace '{}'", id));
}

Workspace WorkspaceStore::save(Workspace ws, std::uint64_t expected_revision) {
  std::lock_guard guard(mutex_);
  return save_locked(std::move(ws), expected_revision);
}

Workspace WorkspaceStore::save_locked(Workspace ws, std::uint64_t expected_revision) {
  validate(ws);
  if (binary_exists_)
    for (const auto& b : ws.binaries)
      if (!binary_exists_(b))
        invalid(fmt::format("binary '{}' is not in the store", b));

  const auto current = find(ws.id);
  const std::uint64_t stored = current ? current->revision : 0;
  if (expected_revision != stored)
    throw Error(ErrorCode::RevisionConflict,
                fmt::format("workspace '{}' is at revision {}, not {}", ws.id, stored, expected_revision),
                fmt::format("current_revision={}", stored));
  ws.revision = stored + 1;
  write_file_atomic(path_for(ws.id), to_json(ws).dump(2) + "\n");
  return ws;
}

Workspace WorkspaceStore::update(std::string_view id, const std::function<void(Workspace&)>& mutate) {
  std::lock_guard guard(mutex_);
  auto ws = find(id);
  if (!ws)
    throw Error(ErrorCode::UnknownWorkspace, fmt::format("unknown workspace '{}'", id));
  const std::uint64_t revision = ws->revision;
  mutate(*ws);
  ws->id = std::string(id);
  return save_locked(std::move(*ws), revision);
}

}  // namespace spire::nexus
