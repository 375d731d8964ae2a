//===- spire/nexus/config.hpp - Service configuration ----------*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
//
//   {
//     "store": "/var/lib/spire",
//     "bind": "127.0.0.1",
//     "port": 8470,
//     "capability_rules": "rules.json",
//     "layout": {"algorithm": "sugiyama", "node_gap": 40, "layer_gap": 120,
//                "force_iterations": 100, "seed": 1},
//     "adapters": {"parallelism": 2, "output_cap": 1048576,
//                  "enabled": [{"name": "objdump", "kind": "disassembly",
//                               "invocation": "objdump -d {input_path}",
//                               "timeout": 30}]}
//   }
//
// Every key is optional. SPIRE_STORE and SPIRE_PORT override the file.
//
//===----------------------------------------------------------------------===//
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spire/graphs.hpp"
#include "spire/nexus/adapter.hpp"

namespace spire::nexus {

inline constexpr int kDefaultPort = 8470;

struct ServiceConfig {
  std::filesystem::path store;
  std::string bind = "127.0.0.1";
  int port = kDefaultPort;  // 0 picks an ephemeral port
  std::optional<std::filesystem::path> capability_rules;
  LayoutOptions layout;
  std::vector<AdapterDescriptor> adapters;  // empty: adapters disabled
  std::size_t adapter_parallelism = 2;
  std::size_t adapter_output_cap = 1 << 20;
};

/// $XDG_CACHE_HOME/spire, else $HOME/.cache/spire, else ./spire-store.
std::filesystem::path default_store_path();

/// Throws ValidationFailed. Relative paths resolve against `base_dir`.
ServiceConfig config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
/// Throws Io when unreadable, ValidationFailed when malformed.
ServiceConfig load_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const char*)>;
/// Applies SPIRE_STORE and SPIRE_PORT. Throws ValidationFailed on a bad port.
void apply_env_overrides(ServiceConfig& config, const EnvLookup& env);
void apply_env_overrides(ServiceConfig& config);

}  // namespace spire::nexus
