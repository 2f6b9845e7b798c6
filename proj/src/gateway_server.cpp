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

#include "gmab/gateway_server.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <sys/socket.h>

#include "gmab/snapshot.hpp"

namespace gmab {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct GatewayServer::Impl {
  GatewayConfig config;
  std::shared_ptr<const Population> population;
  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread accept_thread;
  std::mutex mu;
  std::vector<std::thread> workers;
  std::vector<std::weak_ptr<tcp::socket>> sockets;
  bool stopped = false;

  void accept_next(std::atomic<int>& active);
  void serve(std::shared_ptr<tcp::socket> socket, std::atomic<int>& active);
  http::response<http::string_body> handle_http(const http::request<http::string_body>& req);
};

namespace {

http::response<http::string_body> json_response(const http::request<http::string_body>& req,
                                                http::status status, const std::string& body) {
  http::response<http::string_body> res{status, req.version()};
  res.set(http::field::content_type, "application/json");
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = body;
  res.prepare_payload();
  return res;
}

std::string error_body(const std::string& what) { return nlohmann::json{{"error", what}}.dump(); }

}  // namespace

http::response<http::string_body> GatewayServer::Impl::handle_http(const http::request<http::string_body>& req) {
  const std::string target(req.target());
  if (req.method() != http::verb::get)
    return json_response(req, http::status::method_not_allowed, error_body("only GET is supported"));
  if (target == "/healthz") return json_response(req, http::status::ok, R"({"status":"ok"})");
  if (target == "/configs") return json_response(req, http::status::ok, presets_json(config.presets).dump());

  const std::string prefix = "/players/", suffix = "/snapshot";
  if (target.size() > prefix.size() + suffix.size() && target.rfind(prefix, 0) == 0 &&
      target.compare(target.size() - suffix.size(), suffix.size(), suffix) == 0) {
    const std::string id = target.substr(prefix.size(), target.size() - prefix.size() - suffix.size());
    if (!valid_player_id(id)) return json_response(req, http::status::bad_request, error_body("invalid player id"));
    SnapshotStore store(config.snapshot_dir);
    if (!store.exists(id)) return json_response(req, http::status::not_found, error_body("no snapshot for " + id));
    return json_response(req, http::status::ok, load_snapshot_file(store.path_for(id)));
  }
  return json_response(req, http::status::not_found, error_body("no route for " + target));
}

void GatewayServer::Impl::serve(std::shared_ptr<tcp::socket> socket, std::atomic<int>& active) {
  struct Count {
    std::atomic<int>& n;
    explicit Count(std::atomic<int>& c) : n(c) { ++n; }
    ~Count() { --n; }
  } count(active);
  try {
    beast::flat_buffer buffer;
    while (true) {
      http::request<http::string_body> req;
      http::read(*socket, buffer, req);
      if (websocket::is_upgrade(req)) {
        websocket::stream<tcp::socket&> ws(*socket);
        ws.accept(req);
        ws.text(true);
        GatewaySession session(config, population);
        auto flush = [&] {
          while (auto m = session.outbound().pop()) ws.write(net::buffer(m->dump()));
        };
        try {
          while (true) {
            beast::flat_buffer in;
            ws.read(in);
            session.on_message(beast::buffers_to_string(in.data()));
            flush();
          }
        } catch (const ProtocolError& e) {
          flush();
          session.on_disconnect();
          std::string reason = e.what();
          if (reason.size() > 120) reason.resize(120);  // close frames hold at most 123 bytes
          websocket::close_reason cr(static_cast<std::uint16_t>(e.code()));
          cr.reason = reason;
          ws.close(cr);
        }
        return;
      }
      auto res = handle_http(req);
      const bool keep = res.keep_alive();
      http::write(*socket, res);
      if (!keep) break;
    }
    beast::error_code ec;
    socket->shutdown(tcp::socket::shutdown_send, ec);
  } catch (const std::exception&) {
    // peer went away or sent garbage; nothing to report back
  }
}

void GatewayServer::Impl::accept_next(std::atomic<int>& active) {
  acceptor.async_accept([this, &active](beast::error_code ec, tcp::socket s) {
    if (ec) return;
    auto socket = std::make_shared<tcp::socket>(std::move(s));
    {
      std::lock_guard lock(mu);
      if (stopped) return;
      sockets.push_back(socket);
      workers.emplace_back([this, socket, &active] { serve(socket, active); });
    }
    accept_next(active);
  });
}

GatewayServer::GatewayServer(GatewayConfig config, std::string address, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
  config.base.validate();
  impl_->population = std::make_shared<Population>(
      synth_population(config.base.source.population_seed, config.base.dim(), kNumGestures));
  impl_->config = std::move(config);
  const tcp::endpoint endpoint(net::ip::make_address(address), port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen();
}

GatewayServer::~GatewayServer() { stop(); }

std::uint16_t GatewayServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void GatewayServer::start() {
  impl_->accept_next(active_);
  impl_->accept_thread = std::thread([this] { impl_->ioc.run(); });
}

void GatewayServer::run() {
  net::signal_set signals(impl_->ioc, SIGINT, SIGTERM);
  signals.async_wait([this](beast::error_code, int) { impl_->ioc.stop(); });
  impl_->accept_next(active_);
  impl_->ioc.run();
  stop();
}

void GatewayServer::stop() {
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(impl_->mu);
    if (impl_->stopped) return;
    impl_->stopped = true;
    // Unblocks worker reads; the socket objects stay owned by their threads.
    for (auto& w : impl_->sockets)
      if (auto s = w.lock()) ::shutdown(s->native_handle(), SHUT_RDWR);
    workers.swap(impl_->workers);
  }
  impl_->ioc.stop();
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  for (auto& t : workers) t.join();
}

}  // namespace gmab
