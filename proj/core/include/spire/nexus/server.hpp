//===- spire/nexus/server.hpp - HTTP API over analysis products -*- C++ -*-===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#pragma once

#include <memory>
#include <string>
#include <thread>

#include "spire/analysis.hpp"
#include "spire/error.hpp"
#include "spire/nexus/adapter.hpp"
#include "spire/nexus/config.hpp"
#include "spire/nexus/workspace.hpp"

namespace httplib {
class Server;
}

namespace spire::nexus {

/// HTTP status for an error code (400, 404, 409, 415, 422, 502, 503, 504, 500).
int http_status(ErrorCode code) noexcept;
/// {"code", "message", "detail"}.
Json problem_document(const Error& e);

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket and returns the bound port (useful with
  /// port 0). Throws PortInUse.
  int bind();
  /// Serves until stop(); binds first if needed.
  void run();
  /// bind() plus run() on a background thread.
  int start();
  void stop();

  int port() const noexcept { return port_; }
  const ServiceConfig& config() const noexcept { return config_; }
  BinaryStore& store() noexcept { return store_; }
  AnalysisCache& analyses() noexcept { return analyses_; }
  WorkspaceStore& workspaces() noexcept { return workspaces_; }

 private:
  void install_routes();

  ServiceConfig config_;
  BinaryStore store_;
  AnalysisCache analyses_;
  WorkspaceStore workspaces_;
  AdapterRunner adapters_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace spire::nexus
