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

// Live play: a per-connection session that turns keyboard intents into
// perturbed gesture bursts, runs them through the shared pipeline and queues
// JSON messages for the client. Transport lives in gateway_server.hpp.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gmab/harness.hpp"
#include "json.hpp"

namespace gmab {

inline constexpr int kProtocolVersion = 1;

enum class CloseCode : std::uint16_t { protocol_violation = 4000, version_mismatch = 4001 };

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(CloseCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  CloseCode code() const { return code_; }

 private:
  CloseCode code_;
};

struct Preset {
  std::string name;
  std::string description;
  double severity = 0.5;
  int path_length = 30;
  double action_rate = 1.0 / 3.0;
};

std::vector<Preset> default_presets();

struct GatewayConfig {
  ExperimentConfig base = default_config();  // bandit, post-processing, source and game options
  std::vector<Preset> presets = default_presets();
  std::string snapshot_dir = "players";
  // When set, each round leaves <player>_r<round>.{frames,events,model}: the
  // frames played, the game events and the model the round started from.
  std::string frame_log_dir;
  std::size_t outbound_capacity = 256;
  int rolling_window = 20;  // emissions in the rolling precision
};

nlohmann::json presets_json(const std::vector<Preset>& presets);

// Player ids: 1-64 characters from [A-Za-z0-9_-].
bool valid_player_id(std::string_view id);
// Stable across platforms (FNV-1a).
std::uint64_t player_seed(std::string_view id);

class SnapshotStore {
 public:
  explicit SnapshotStore(std::string dir);
  std::string path_for(std::string_view player_id) const;
  bool exists(std::string_view player_id) const;
  std::optional<nlohmann::json> load(std::string_view player_id) const;
  void save(std::string_view player_id, const nlohmann::json& doc) const;

 private:
  std::string dir_;
};

// Bounded FIFO of outbound messages. Sequence numbers are stamped on push, so
// a dropped telemetry message leaves a visible gap. When full, a new
// telemetry message is dropped; a new state message evicts the oldest queued
// telemetry message, or grows the queue past capacity if none is queued.
class OutboundQueue {
 public:
  explicit OutboundQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(nlohmann::json message, bool droppable);
  std::optional<nlohmann::json> pop();
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t dropped() const { return dropped_; }
  std::uint64_t next_seq() const { return seq_; }

 private:
  struct Item {
    nlohmann::json message;
    bool droppable;
  };
  std::size_t capacity_;
  std::deque<Item> items_;
  std::uint64_t seq_ = 0;
  std::uint64_t dropped_ = 0;
};

enum class SessionStatus { awaiting_handshake, playing, paused, finished };
std::string_view status_name(SessionStatus s);

using Clock = std::function<std::int64_t()>;  // milliseconds
std::int64_t wall_clock_ms();

class GatewaySession {
 public:
  GatewaySession(const GatewayConfig& config, std::shared_ptr<const Population> population,
                 Clock clock = wall_clock_ms);
  ~GatewaySession();
  GatewaySession(const GatewaySession&) = delete;
  GatewaySession& operator=(const GatewaySession&) = delete;

  // Handles one client text message. Throws ProtocolError; the transport
  // closes the connection with its code.
  void on_message(std::string_view text);
  // Persists the model. Safe to call more than once.
  void on_disconnect();

  OutboundQueue& outbound() { return outbound_; }
  SessionStatus status() const { return status_; }
  const std::string& player_id() const { return player_id_; }
  bool resumed() const { return resumed_; }
  int round() const { return round_; }
  const Model& model() const;
  const GameSession* game() const { return game_.get(); }
  const std::vector<TrialRecord>& trials() const { return trials_; }
  // Frames of the current round, for replay through the harness pipeline.
  const std::vector<Frame>& round_frames() const { return frames_; }

 private:
  void handshake(const nlohmann::json& msg);
  void start_round(const Preset& preset);
  void intent(int gesture);
  void report();
  void finish_round();
  void run_frame(const Frame& frame);
  void close_attempt(bool spacebar);
  const Preset& preset_named(const std::string& name) const;

  void send_state();
  void send(nlohmann::json body, bool droppable);
  nlohmann::json summary_json() const;
  void write_frame_log();

  GatewayConfig config_;
  std::shared_ptr<const Population> population_;
  Clock clock_;
  SnapshotStore store_;
  OutboundQueue outbound_;

  SessionStatus status_ = SessionStatus::awaiting_handshake;
  std::string player_id_;
  bool resumed_ = false;
  Preset preset_;
  UserPerturbation user_;
  Rng rng_{0};
  std::optional<Model> idle_model_;  // model between rounds
  std::unique_ptr<GameSession> game_;
  int round_ = 0;
  std::int64_t frame_ = 0;

  struct Attempt {
    int intended;
    int cell;
    std::int64_t start;
  };
  std::optional<Attempt> open_;
  std::optional<int> first_emission_;
  std::vector<TrialRecord> trials_;
  std::deque<bool> recent_;  // correctness of recent emissions
  std::vector<Frame> frames_;
  std::string round_start_model_;  // snapshot written next to the frame log
};

}  // namespace gmab
