// Copyright 2026 The gmab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// WebSocket + HTTP transport for GatewaySession on a single port.
//
//   ws://host:port/         handshake, then ClientMessage JSON text frames
//   GET /healthz            {"status": "ok"}
//   GET /configs            difficulty presets
//   GET /players/{id}/snapshot

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "gmab/gateway.hpp"

namespace gmab {

class GatewayServer {
 public:
  // port 0 picks a free port; see port().
  GatewayServer(GatewayConfig config, std::string address = "127.0.0.1", std::uint16_t port = 0);
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  std::uint16_t port() const;
  // Accepts connections on a background thread.
  void start();
  // Serves on the calling thread until SIGINT or SIGTERM.
  void run();
  void stop();
  int active_connections() const { return active_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<int> active_{0};
};

}  // namespace gmab
