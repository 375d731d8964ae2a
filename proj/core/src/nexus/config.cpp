//===- config.cpp - Service configuration file and environment ------------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/nexus/config.hpp"

#include <charconv>
#include <cstdlib>

#include <fmt/format.h>

#include "spire/error.hpp"
#include "spire/store.hpp"

namespace spire::nexus {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::ValidationFailed, why); }

std::optional<int> parse_port(std::string_view text) {
  int port = -1;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), port);
  if (ec != std::errc() || ptr != text.data() + text.size() || port < 0 || port > 65535)
    return std::nullopt;
  return port;
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.is_absolute() || base.empty())
    return p;
  return base / p;
}

std::size_t positive_size(const Json& v, const char* what) {
  if (!v.is_number_unsigned() || v.get<std::uint64_t>() == 0)
    invalid(fmt::format("config: '{}' must be a positive integer", what));
  return v.get<std::size_t>();
}

double positive_number(const Json& v, const char* what) {
  if (!v.is_number() || !(v.get<double>() > 0))
    invalid(fmt::format("config: '{}' must be a positive number", what));
  return v.get<double>();
}

void read_layout(const Json& j, LayoutOptions& out) {
  if (!j.is_object())
    invalid("config: 'layout' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "algorithm") {
      const auto name = value.is_string() ? value.get<std::string>() : std::string();
      if (name == "sugiyama") out.kind = LayoutKind::Sugiyama;
      else if (name == "force") out.kind = LayoutKind::Force;
      else invalid("config: layout.algorithm must be \"sugiyama\" or \"force\"");
    } else if (key == "node_gap") {
      out.spacing.node_gap = positive_number(value, "layout.node_gap");
    } else if (key == "layer_gap") {
      out.spacing.layer_gap = positive_number(value, "layout.layer_gap");
    } else if (key == "force_iterations") {
      out.force.iterations = static_cast<int>(positive_size(value, "layout.force_iterations"));
    } else if (key == "seed") {
      if (!value.is_number_unsigned())
        invalid("config: layout.seed must be a non-negative integer");
      out.force.seed = value.get<std::uint64_t>();
    } else {
      invalid(fmt::format("config: unknown key 'layout.{}'", key));
    }
  }
}

}  // namespace

fs::path default_store_path() {
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
    return fs::path(xdg) / "spire";
  if (const char* home = std::getenv("HOME"); home && *home)
    return fs::path(home) / ".cache" / "spire";
  return fs::path("spire-store");
}

ServiceConfig config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object())
    invalid("config must be a JSON object");
  ServiceConfig c;
  c.store = default_store_path();
  for (const auto& [key, value] : j.items()) {
    if (key == "store") {
      if (!value.is_string() || value.get<std::string>().empty())
        invalid("config: 'store' must be a path");
      c.store = resolve(value.get<std::string>(), base_dir);
    } else if (key == "bind") {
      if (!value.is_string() || value.get<std::string>().empty())
        invalid("config: 'bind' must be an address");
      c.bind = value.get<std::string>();
    } else if (key == "port") {
      if (!value.is_number_unsigned() || value.get<std::uint64_t>() > 65535)
        invalid("config: 'port' must be 0..65535");
      c.port = value.get<int>();
    } else if (key == "capability_rules") {
      if (!value.is_string())
        invalid("config: 'capability_rules' must be a path");
      c.capability_rules = resolve(value.get<std::string>(), base_dir);
    } else if (key == "layout") {
      read_layout(value, c.layout);
    } else if (key == "adapters") {
      if (!value.is_object())
        invalid("config: 'adapters' must be an object");
      for (const auto& [akey, avalue] : value.items()) {
        if (akey == "parallelism") {
          c.adapter_parallelism = positive_size(avalue, "adapters.parallelism");
        } else if (akey == "output_cap") {
          c.adapter_output_cap = positive_size(avalue, "adapters.output_cap");
        } else if (akey == "enabled") {
          if (!avalue.is_array())
            invalid("config: 'adapters.enabled' must be an array");
          for (const auto& d : avalue) {
            auto descriptor = adapter_from_json(d);
            for (const auto& existing : c.adapters)
              if (existing.name == descriptor.name)
                invalid(fmt::format("config: adapter '{}' listed twice", descriptor.name));
            c.adapters.push_back(std::move(descriptor));
          }
        } else {
          invalid(fmt::format("config: unknown key 'adapters.{}'", akey));
        }
      }
    } else {
      invalid(fmt::format("config: unknown key '{}'", key));
    }
  }
  return c;
}

ServiceConfig load_config(const fs::path& path) {
  auto text = read_file(path);
  if (!text)
    throw Error(ErrorCode::Io, fmt::format("cannot read config {}", path.string()));
  Json j;
  try {
    j = Json::parse(*text);
  } catch (const Json::parse_error& e) {
    invalid(fmt::format("config {}: {}", path.string(), e.what()));
  }
  return config_from_json(j, path.parent_path());
}

void apply_env_overrides(ServiceConfig& config, const EnvLookup& env) {
  if (auto store = env("SPIRE_STORE"); store && !store->empty())
    config.store = *store;
  if (auto port = env("SPIRE_PORT"); port && !port->empty()) {
    auto parsed = parse_port(*port);
    if (!parsed)
      invalid(fmt::format("SPIRE_PORT '{}' is not a port number", *port));
    config.port = *parsed;
  }
}

void apply_env_overrides(ServiceConfig& config) {
  apply_env_overrides(config, [](const char* name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name))
      return std::string(v);
    return std::nullopt;
  });
}

}  // namespace spire::nexus
