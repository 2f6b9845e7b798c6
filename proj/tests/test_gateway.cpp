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

#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <fstream>

#include "gmab/gateway.hpp"
#include "gmab/gateway_server.hpp"
#include "gmab/replay.hpp"
#include "gmab/snapshot.hpp"

using namespace gmab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "gmab_gateway_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

GatewayConfig test_config(const std::string& name) {
  GatewayConfig cfg;
  cfg.base.bandit.dim = 16;
  cfg.presets = {{"clean", "no perturbation", 0.0, 6, 1.0 / 3.0}, {"rough", "strong", 0.9, 8, 1.0 / 3.0}};
  cfg.snapshot_dir = scratch_dir(name) + "/players";
  return cfg;
}

std::shared_ptr<const Population> population_for(const GatewayConfig& cfg) {
  return std::make_shared<Population>(
      synth_population(cfg.base.source.population_seed, cfg.base.dim(), kNumGestures));
}

std::vector<json> drain(GatewaySession& s) {
  std::vector<json> out;
  while (auto m = s.outbound().pop()) out.push_back(std::move(*m));
  return out;
}

std::vector<json> of_type(const std::vector<json>& msgs, const std::string& type) {
  std::vector<json> out;
  for (const auto& m : msgs)
    if (m["type"] == type) out.push_back(m);
  return out;
}

std::string hello(const std::string& id, const std::string& config = "clean", int proto = kProtocolVersion) {
  return json{{"type", "hello"}, {"proto", proto}, {"player_id", id}, {"config", config}}.dump();
}

std::string intent(int gesture) { return json{{"type", "intent"}, {"gesture", gesture_name(gesture)}}.dump(); }

CloseCode close_code_of(GatewaySession& s, const std::string& msg) {
  try {
    s.on_message(msg);
  } catch (const ProtocolError& e) {
    return e.code();
  }
  ADD_FAILURE() << "no protocol error for " << msg;
  return CloseCode::protocol_violation;
}

}  // namespace

TEST(Helpers, PlayerIdsAndSeeds) {
  EXPECT_TRUE(valid_player_id("alice_01-b"));
  EXPECT_FALSE(valid_player_id(""));
  EXPECT_FALSE(valid_player_id("../etc"));
  EXPECT_FALSE(valid_player_id(std::string(65, 'a')));
  EXPECT_EQ(player_seed(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(player_seed("a"), 0xaf63dc4c8601ec8cULL);  // FNV-1a 64 reference value
  EXPECT_EQ(presets_json(default_presets()).size(), 3u);
}

TEST(Queue, DropsTelemetryAndLeavesSeqGaps) {
  OutboundQueue q(2);
  q.push({{"type", "telemetry"}}, true);
  q.push({{"type", "telemetry"}}, true);
  q.push({{"type", "telemetry"}}, true);  // dropped, seq 2 burned
  EXPECT_EQ(q.dropped(), 1u);
  q.push({{"type", "game_state"}}, false);  // evicts seq 0
  q.push({{"type", "game_state"}}, false);  // evicts seq 1
  EXPECT_EQ(q.dropped(), 3u);
  q.push({{"type", "game_state"}}, false);  // no telemetry left: grows
  EXPECT_EQ(q.size(), 3u);
  EXPECT_EQ(q.dropped(), 3u);
  std::vector<std::uint64_t> seqs;
  while (auto m = q.pop()) seqs.push_back((*m)["seq"].get<std::uint64_t>());
  EXPECT_EQ(seqs, (std::vector<std::uint64_t>{3, 4, 5}));
}

TEST(Session, HandshakeErrors) {
  const GatewayConfig cfg = test_config("handshake");
  const auto pop = population_for(cfg);
  {
    GatewaySession s(cfg, pop);
    EXPECT_EQ(close_code_of(s, "not json"), CloseCode::protocol_violation);
  }
  {
    GatewaySession s(cfg, pop);
    EXPECT_EQ(close_code_of(s, hello("p1", "clean", 2)), CloseCode::version_mismatch);
  }
  {
    GatewaySession s(cfg, pop);
    EXPECT_EQ(close_code_of(s, hello("bad id")), CloseCode::protocol_violation);
  }
  {
    GatewaySession s(cfg, pop);
    EXPECT_EQ(close_code_of(s, intent(0)), CloseCode::protocol_violation);
  }
  {
    GatewaySession s(cfg, pop);
    EXPECT_EQ(close_code_of(s, hello("p1", "nightmare")), CloseCode::protocol_violation);
  }
  GatewaySession s(cfg, pop);
  s.on_message(hello("p1"));
  EXPECT_EQ(close_code_of(s, hello("p1")), CloseCode::protocol_violation);
  EXPECT_EQ(close_code_of(s, R"({"type":"dance"})"), CloseCode::protocol_violation);
  EXPECT_EQ(close_code_of(s, R"({"type":"intent","gesture":"wave"})"), CloseCode::protocol_violation);
}

TEST(Session, HandshakeStartsRound) {
  const GatewayConfig cfg = test_config("start");
  GatewaySession s(cfg, population_for(cfg), [] { return std::int64_t{42}; });
  s.on_message(hello("p1"));
  EXPECT_EQ(s.status(), SessionStatus::playing);
  EXPECT_FALSE(s.resumed());
  const auto msgs = drain(s);
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(msgs[0]["type"], "game_state");
  EXPECT_EQ(msgs[0]["status"], "playing");
  EXPECT_EQ(msgs[0]["path"].size(), 6u);
  EXPECT_EQ(msgs[0]["ts"], 42);
  EXPECT_EQ(msgs[0]["seq"], 0);
}

TEST(Session, CorrectIntentAdvancesAndReportPenalizes) {
  const GatewayConfig cfg = test_config("intent");
  GatewaySession s(cfg, population_for(cfg));
  s.on_message(hello("p1"));
  drain(s);
  const int pending = s.game()->game().pending();
  s.on_message(intent(pending));
  const auto msgs = drain(s);
  const auto emissions = of_type(msgs, "emission");
  ASSERT_EQ(emissions.size(), 1u);
  EXPECT_EQ(emissions[0]["class"], gesture_name(pending));
  const auto rewards = of_type(msgs, "reward");
  ASSERT_EQ(rewards.size(), 1u);
  EXPECT_EQ(rewards[0]["value"], 1);
  EXPECT_EQ(rewards[0]["source"], "advance");
  EXPECT_EQ(s.game()->game().position(), 1);
  EXPECT_FALSE(of_type(msgs, "telemetry").empty());
  EXPECT_EQ(of_type(msgs, "telemetry").front()["scores"].size(), 6u);

  // The advance consumed the pull history: a report now credits nothing.
  s.on_message(R"({"type":"report"})");
  EXPECT_EQ(of_type(drain(s), "reward")[0]["credited"], 0);

  // A wrong intent leaves fresh pulls behind for the next report.
  s.on_message(intent((s.game()->game().pending() + 1) % kNumGestures));
  drain(s);
  ASSERT_EQ(s.game()->game().position(), 1);
  s.on_message(R"({"type":"report"})");
  const auto after = drain(s);
  const auto penalty = of_type(after, "reward");
  ASSERT_EQ(penalty.size(), 1u);
  EXPECT_EQ(penalty[0]["value"], -1);
  EXPECT_EQ(penalty[0]["source"], "report");
  EXPECT_EQ(penalty[0]["credited"], cfg.base.bandit.credit_window);
  EXPECT_EQ(s.game()->game().spacebar_count(), 2);
  ASSERT_EQ(s.trials().size(), 3u);
  EXPECT_TRUE(s.trials()[1].spacebar);
  EXPECT_TRUE(s.trials()[2].spacebar);
}

TEST(Session, PauseBlocksIntents) {
  const GatewayConfig cfg = test_config("pause");
  GatewaySession s(cfg, population_for(cfg));
  s.on_message(hello("p1"));
  s.on_message(R"({"type":"pause"})");
  EXPECT_EQ(s.status(), SessionStatus::paused);
  drain(s);
  s.on_message(intent(s.game()->game().pending()));
  const auto msgs = drain(s);
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(msgs[0]["status"], "paused");
  EXPECT_TRUE(s.round_frames().empty());
  s.on_message(R"({"type":"resume"})");
  EXPECT_EQ(s.status(), SessionStatus::playing);
}

TEST(Session, FinishedRoundSummarizesAndResumes) {
  const GatewayConfig cfg = test_config("finish");
  const auto pop = population_for(cfg);
  std::string saved;
  {
    GatewaySession s(cfg, pop);
    s.on_message(hello("p1"));
    for (int i = 0; i < 100 && s.status() == SessionStatus::playing; ++i)
      s.on_message(intent(s.game()->game().pending()));
    ASSERT_EQ(s.status(), SessionStatus::finished);
    const auto summary = of_type(drain(s), "round_summary");
    ASSERT_EQ(summary.size(), 1u);
    EXPECT_EQ(summary[0]["completed"], true);
    EXPECT_EQ(summary[0]["round"], 1);
    EXPECT_GE(summary[0]["attempts"].get<int>(), 6);
    saved = snapshot(s.model());
    SnapshotStore store(cfg.snapshot_dir);
    EXPECT_TRUE(store.exists("p1"));
  }
  GatewaySession again(cfg, pop);
  again.on_message(hello("p1", "rough"));
  EXPECT_TRUE(again.resumed());
  EXPECT_EQ(snapshot(again.model()), saved);
  EXPECT_EQ(again.game()->game().path().length(), 8);
}

TEST(Session, DimensionChangeStartsFresh) {
  GatewayConfig cfg = test_config("dims");
  {
    GatewaySession s(cfg, population_for(cfg));
    s.on_message(hello("p1"));
    s.on_message(intent(s.game()->game().pending()));
  }
  cfg.base.bandit.dim = 12;
  GatewaySession s(cfg, population_for(cfg));
  s.on_message(hello("p1"));
  EXPECT_FALSE(s.resumed());
  EXPECT_EQ(s.model().dim(), 12);
}

TEST(Session, FrameLogReplaysToSameEvents) {
  GatewayConfig cfg = test_config("framelog");
  cfg.frame_log_dir = scratch_dir("framelog_frames");
  GatewaySession s(cfg, population_for(cfg));
  s.on_message(hello("p2", "rough"));
  // A mix of right and wrong intents plus reports until the round ends.
  for (int i = 0; i < 400 && s.status() == SessionStatus::playing; ++i) {
    const int pending = s.game()->game().pending();
    if (i % 5 == 3) s.on_message(R"({"type":"report"})");
    else s.on_message(intent(i % 4 == 1 ? (pending + 1) % kNumGestures : pending));
  }
  ASSERT_EQ(s.status(), SessionStatus::finished);
  const std::vector<EventRecord> live = s.game()->events();

  const std::string stem = (fs::path(cfg.frame_log_dir) / "p2_r1").string();
  std::ifstream events_in(stem + ".events.ndjson");
  const auto logged = read_event_log(events_in);
  ASSERT_EQ(logged.size(), live.size());

  auto stream = replay_open(stem + ".frames.ndjson", cfg.base.dim(), kNumGestures);
  ReplayRunOptions opts;
  opts.post = cfg.base.post;
  opts.game = cfg.base.game;
  opts.model = restore(load_snapshot_file(stem + ".model.json"));
  opts.report_frames = report_frames(logged);
  const ReplayRun run = replay_run(stream, opts);
  ASSERT_EQ(run.events.size(), live.size());
  for (std::size_t i = 0; i < live.size(); ++i) {
    EXPECT_EQ(run.events[i].t, live[i].t) << i;
    EXPECT_EQ(run.events[i].kind, live[i].kind) << i;
    EXPECT_EQ(run.events[i].emitted, live[i].emitted) << i;
    EXPECT_EQ(run.events[i].position, live[i].position) << i;
  }
  EXPECT_EQ(snapshot(run.model), snapshot(s.model()));
}

// Transport: real sockets against a server on an ephemeral port.
namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct HttpResult {
  unsigned status;
  std::string body;
};

HttpResult http_request(std::uint16_t port, http::verb verb, const std::string& target) {
  net::io_context ioc;
  tcp::socket sock(ioc);
  sock.connect({net::ip::make_address("127.0.0.1"), port});
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  req.keep_alive(false);
  req.prepare_payload();
  http::write(sock, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res);
  return {res.result_int(), res.body()};
}

class WsClient {
 public:
  explicit WsClient(std::uint16_t port) : ws_(ioc_) {
    ws_.next_layer().connect({net::ip::make_address("127.0.0.1"), port});
    ws_.handshake("127.0.0.1", "/");
    ws_.text(true);
  }
  void send(const std::string& text) { ws_.write(net::buffer(text)); }
  json read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }
  json read_until(const std::string& type) {
    while (true) {
      json m = read();
      if (m["type"] == type) return m;
    }
  }
  // Reads until the server closes; returns the close code.
  int read_close() {
    try {
      while (true) read();
    } catch (const beast::system_error& e) {
      EXPECT_EQ(e.code(), websocket::error::closed);
    }
    return ws_.reason().code;
  }
  void close() { ws_.close(websocket::close_code::normal); }

 private:
  net::io_context ioc_;
  websocket::stream<tcp::socket> ws_;
};

}  // namespace

TEST(Server, HttpRoutes) {
  const GatewayConfig cfg = test_config("http");
  GatewayServer server(cfg);
  server.start();
  const auto port = server.port();
  const auto health = http_request(port, http::verb::get, "/healthz");
  EXPECT_EQ(health.status, 200u);
  EXPECT_EQ(json::parse(health.body)["status"], "ok");
  const auto configs = http_request(port, http::verb::get, "/configs");
  EXPECT_EQ(configs.status, 200u);
  EXPECT_EQ(json::parse(configs.body)[1]["name"], "rough");
  EXPECT_EQ(http_request(port, http::verb::get, "/players/a%20b/snapshot").status, 400u);
  EXPECT_EQ(http_request(port, http::verb::get, "/players/nobody/snapshot").status, 404u);
  EXPECT_EQ(http_request(port, http::verb::get, "/nowhere").status, 404u);
  EXPECT_EQ(http_request(port, http::verb::post, "/healthz").status, 405u);
  server.stop();
}

TEST(Server, WebSocketPlayAndSnapshot) {
  const GatewayConfig cfg = test_config("ws");
  GatewayServer server(cfg);
  server.start();
  {
    WsClient c(server.port());
    c.send(hello("ws_player"));
    json state = c.read_until("game_state");
    EXPECT_EQ(state["status"], "playing");
    std::uint64_t last_seq = state["seq"].get<std::uint64_t>();
    auto next = [&] {
      json m = c.read();
      EXPECT_GT(m["seq"].get<std::uint64_t>(), last_seq);
      last_seq = m["seq"].get<std::uint64_t>();
      return m;
    };
    // A pause after each intent marks the end of that intent's messages.
    for (int i = 0; i < 100 && state["status"] == "playing"; ++i) {
      c.send(intent(*gesture_from_name(state["pending"].get<std::string>())));
      c.send(R"({"type":"pause"})");
      do state = next();
      while (state["type"] != "game_state" || state["status"] == "playing");
      if (state["status"] == "paused") {
        c.send(R"({"type":"resume"})");
        state = next();
      }
    }
    EXPECT_EQ(state["status"], "finished");
    c.close();
  }
  const auto snap = http_request(server.port(), http::verb::get, "/players/ws_player/snapshot");
  EXPECT_EQ(snap.status, 200u);
  EXPECT_EQ(json::parse(snap.body)["d"], 16);
  server.stop();
}

TEST(Server, CloseCodes) {
  const GatewayConfig cfg = test_config("close");
  GatewayServer server(cfg);
  server.start();
  {
    WsClient c(server.port());
    c.send(hello("p", "clean", 99));
    EXPECT_EQ(c.read_close(), 4001);
  }
  {
    WsClient c(server.port());
    c.send(hello("p"));
    c.read_until("game_state");
    c.send(R"({"type":"dance"})");
    EXPECT_EQ(c.read_close(), 4000);
  }
  server.stop();
  EXPECT_EQ(server.active_connections(), 0);
}
