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

#include "gmab/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "gmab/snapshot.hpp"

namespace gmab {

namespace fs = std::filesystem;

std::vector<Preset> default_presets() {
  return {{"easy", "mild individual variability", 0.2, 30, 1.0 / 3.0},
          {"medium", "moderate variability", 0.5, 30, 1.0 / 3.0},
          {"hard", "strong variability; the decoder needs to adapt", 0.8, 30, 1.0 / 3.0}};
}

nlohmann::json presets_json(const std::vector<Preset>& presets) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : presets)
    out.push_back({{"name", p.name},
                   {"description", p.description},
                   {"severity", p.severity},
                   {"path_length", p.path_length},
                   {"action_rate", p.action_rate}});
  return out;
}

bool valid_player_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) return false;
  return true;
}

std::uint64_t player_seed(std::string_view id) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

SnapshotStore::SnapshotStore(std::string dir) : dir_(std::move(dir)) {}

std::string SnapshotStore::path_for(std::string_view player_id) const {
  if (!valid_player_id(player_id)) throw std::invalid_argument("invalid player id");
  return (fs::path(dir_) / (std::string(player_id) + ".json")).string();
}

bool SnapshotStore::exists(std::string_view player_id) const {
  return valid_player_id(player_id) && fs::exists(path_for(player_id));
}

std::optional<nlohmann::json> SnapshotStore::load(std::string_view player_id) const {
  if (!exists(player_id)) return std::nullopt;
  return nlohmann::json::parse(load_snapshot_file(path_for(player_id)));
}

void SnapshotStore::save(std::string_view player_id, const nlohmann::json& doc) const {
  fs::create_directories(dir_);
  save_snapshot_file(path_for(player_id), doc.dump());
}

void OutboundQueue::push(nlohmann::json message, bool droppable) {
  message["seq"] = seq_++;
  if (items_.size() >= capacity_) {
    if (droppable) {
      ++dropped_;
      return;
    }
    auto victim = std::find_if(items_.begin(), items_.end(), [](const Item& i) { return i.droppable; });
    if (victim != items_.end()) {
      items_.erase(victim);
      ++dropped_;
    }
  }
  items_.push_back({std::move(message), droppable});
}

std::optional<nlohmann::json> OutboundQueue::pop() {
  if (items_.empty()) return std::nullopt;
  auto m = std::move(items_.front().message);
  items_.pop_front();
  return m;
}

std::string_view status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::awaiting_handshake: return "awaiting_handshake";
    case SessionStatus::playing: return "playing";
    case SessionStatus::paused: return "paused";
    case SessionStatus::finished: return "finished";
  }
  return "unknown";
}

std::int64_t wall_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

namespace {

ProtocolError violation(const std::string& what) { return ProtocolError(CloseCode::protocol_violation, what); }

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

GatewaySession::GatewaySession(const GatewayConfig& config, std::shared_ptr<const Population> population,
                               Clock clock)
    : config_(config),
      population_(std::move(population)),
      clock_(std::move(clock)),
      store_(config.snapshot_dir),
      outbound_(config.outbound_capacity) {
  if (!population_) throw std::invalid_argument("gateway session needs a population");
  if (config_.presets.empty()) throw std::invalid_argument("gateway needs at least one preset");
  if (population_->head.dim() != config_.base.bandit.dim)
    throw DimensionError("population and bandit dimensions differ");
}

GatewaySession::~GatewaySession() {
  try {
    on_disconnect();
  } catch (...) {
  }
}

const Model& GatewaySession::model() const {
  if (game_) return game_->pipeline().model();
  if (idle_model_) return *idle_model_;
  throw std::logic_error("no model before the handshake");
}

const Preset& GatewaySession::preset_named(const std::string& name) const {
  for (const auto& p : config_.presets)
    if (p.name == name) return p;
  throw violation("unknown config '" + name + "'");
}

void GatewaySession::on_message(std::string_view text) {
  nlohmann::json msg;
  try {
    msg = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    throw violation("message is not valid JSON");
  }
  if (!msg.is_object()) throw violation("message must be a JSON object");

  if (status_ == SessionStatus::awaiting_handshake) {
    handshake(msg);
    return;
  }
  if (!msg.contains("type") || !msg["type"].is_string()) throw violation("message has no type");
  const auto type = msg["type"].get<std::string>();
  if (type == "intent") {
    if (!msg.contains("gesture") || !msg["gesture"].is_string()) throw violation("intent needs a gesture name");
    const auto g = gesture_from_name(msg["gesture"].get<std::string>());
    if (!g) throw violation("unknown gesture '" + msg["gesture"].get<std::string>() + "'");
    if (status_ == SessionStatus::playing) intent(*g);
    else send_state();
  } else if (type == "report") {
    if (status_ == SessionStatus::playing) report();
    else send_state();
  } else if (type == "start") {
    if (msg.contains("config") && !msg["config"].is_string()) throw violation("start config must be a name");
    start_round(preset_named(msg.value("config", preset_.name)));
  } else if (type == "pause") {
    if (status_ == SessionStatus::playing) status_ = SessionStatus::paused;
    send_state();
  } else if (type == "resume") {
    if (status_ == SessionStatus::paused) status_ = SessionStatus::playing;
    send_state();
  } else if (type == "hello") {
    throw violation("duplicate handshake");
  } else {
    throw violation("unknown message type '" + type + "'");
  }
}

void GatewaySession::handshake(const nlohmann::json& msg) {
  if (msg.contains("type") && msg["type"] != "hello") throw violation("first message must be the handshake");
  if (!msg.contains("proto") || !msg["proto"].is_number_integer()) throw violation("handshake needs proto");
  const int proto = msg["proto"].get<int>();
  if (proto != kProtocolVersion)
    throw ProtocolError(CloseCode::version_mismatch, "protocol version " + std::to_string(proto) +
                                                         " unsupported; server speaks " +
                                                         std::to_string(kProtocolVersion));
  if (!msg.contains("player_id") || !msg["player_id"].is_string() ||
      !valid_player_id(msg["player_id"].get<std::string>()))
    throw violation("handshake needs a player_id of 1-64 characters [A-Za-z0-9_-]");
  player_id_ = msg["player_id"].get<std::string>();
  const std::string config_name =
      msg.contains("config") && msg["config"].is_string() ? msg["config"].get<std::string>()
                                                          : config_.presets.front().name;
  const Preset& preset = preset_named(config_name);

  idle_model_.reset();
  try {
    if (auto doc = store_.load(player_id_)) {
      Model m = from_json<double>(*doc);
      if (m.dim() == config_.base.bandit.dim && m.n_arms() == kNumGestures) {
        idle_model_ = std::move(m);
        resumed_ = true;
      }
    }
  } catch (const std::exception&) {
    // unreadable snapshot: start fresh, the next save replaces it
  }
  if (!idle_model_) idle_model_ = Model(config_.base.bandit);
  rng_.seed(mix_seed(player_seed(player_id_), 0x9a7e));
  start_round(preset);
}

void GatewaySession::start_round(const Preset& preset) {
  if (game_) {
    if (!game_->game().completed()) write_frame_log();
    idle_model_ = game_->mutable_pipeline().release_model();
    game_.reset();
  }
  preset_ = preset;
  user_ = make_user(player_seed(player_id_), population_->prototypes, preset.severity);
  ++round_;
  Model model = std::move(*idle_model_);
  idle_model_.reset();
  clear_history(model);
  round_start_model_ = snapshot(model);
  Pipeline pipeline(std::move(model), config_.base.post);
  PathSpec path = generate_path(mix_seed(player_seed(player_id_), static_cast<std::uint64_t>(round_)),
                                preset.path_length, preset.action_rate);
  game_ = std::make_unique<GameSession>(std::move(pipeline), GameState(std::move(path), config_.base.game));
  frame_ = 0;
  open_.reset();
  first_emission_.reset();
  trials_.clear();
  recent_.clear();
  frames_.clear();
  status_ = SessionStatus::playing;
  send_state();
}

void GatewaySession::intent(int gesture) {
  if (open_) close_attempt(false);
  open_ = Attempt{gesture, game_->game().position(), frame_};
  // Rest frames first flush the post-processor's window and refractory period
  // so each intent is judged on its own burst.
  const BurstShape shape{config_.base.post.window + config_.base.post.refractory,
                         config_.base.source.active_frames(), 0};
  for (const auto& f : gesture_burst(*population_, user_, gesture, rng_, shape)) {
    if (game_->game().completed()) break;
    run_frame(f);
  }
  send_state();
  if (game_->game().completed()) finish_round();
}

void GatewaySession::run_frame(const Frame& frame) {
  frames_.push_back(frame);
  const int cell = game_->game().position();
  const FrameOutcome out = game_->on_frame(frame, frame_);
  if (out.emission) {
    send({{"type", "emission"}, {"class", gesture_name(*out.emission)}, {"arm", *out.emission}, {"frame", frame_}},
         false);
    if (!first_emission_) first_emission_ = out.emission;
    if (open_) {
      recent_.push_back(*out.emission == open_->intended);
      if (static_cast<int>(recent_.size()) > config_.rolling_window) recent_.pop_front();
    }
    if (out.event && out.event->reward)
      send({{"type", "reward"},
            {"value", out.event->reward->value},
            {"source", "advance"},
            {"credited", out.credited},
            {"frame", frame_}},
           false);
    if (out.event && out.event->kind == EventKind::advanced) {
      if (open_) {
        close_attempt(false);
      } else {
        TrialRecord r;
        r.round = round_;
        r.attempt = static_cast<int>(trials_.size());
        r.cell = cell;
        r.intended = *out.emission;
        r.emitted = out.emission;
        r.frames_to_response = 0;
        trials_.push_back(r);
        first_emission_.reset();
      }
      send_state();
    }
  }

  const auto& model = game_->pipeline().model();
  nlohmann::json theta_norms = nlohmann::json::array();
  for (const auto& arm : model.arms()) theta_norms.push_back(arm.theta.norm());
  std::optional<double> rolling;
  if (!recent_.empty()) {
    int hits = 0;
    for (bool b : recent_) hits += b ? 1 : 0;
    rolling = static_cast<double>(hits) / static_cast<double>(recent_.size());
  }
  std::vector<double> scores(out.scores.data(), out.scores.data() + out.scores.size());
  send({{"type", "telemetry"},
        {"frame", frame_},
        {"scores", scores},
        {"theta_norms", theta_norms},
        {"fnr", trials_.empty() ? nlohmann::json(0.0) : nlohmann::json(fnr(trials_))},
        {"rolling_precision", optional_json(rolling)}},
       true);
  ++frame_;
}

void GatewaySession::close_attempt(bool spacebar) {
  TrialRecord r;
  r.round = round_;
  r.attempt = static_cast<int>(trials_.size());
  r.cell = open_->cell;
  r.intended = open_->intended;
  r.emitted = first_emission_;
  r.spacebar = spacebar;
  r.frames_to_response = spacebar ? -1 : static_cast<int>(frame_ - open_->start);
  trials_.push_back(r);
  open_.reset();
  first_emission_.reset();
}

void GatewaySession::report() {
  const ReportOutcome out = game_->on_report(frame_);
  if (open_) {
    close_attempt(true);
  } else {
    TrialRecord r;
    r.round = round_;
    r.attempt = static_cast<int>(trials_.size());
    r.cell = game_->game().position();
    r.intended = game_->game().pending();
    r.emitted = first_emission_;
    r.spacebar = true;
    trials_.push_back(r);
    first_emission_.reset();
  }
  send({{"type", "reward"}, {"value", -1}, {"source", "report"}, {"credited", out.credited}, {"frame", frame_}},
       false);
  send_state();
}

void GatewaySession::finish_round() {
  if (open_) close_attempt(false);
  status_ = SessionStatus::finished;
  store_.save(player_id_, to_json(game_->pipeline().model()));
  write_frame_log();
  send(summary_json(), false);
  send_state();
}

void GatewaySession::on_disconnect() {
  if (player_id_.empty()) return;
  if (game_) {
    if (status_ != SessionStatus::finished) write_frame_log();
    store_.save(player_id_, to_json(game_->pipeline().model()));
  } else if (idle_model_) {
    store_.save(player_id_, to_json(*idle_model_));
  }
  frames_.clear();
}

nlohmann::json GatewaySession::summary_json() const {
  nlohmann::json out = {{"type", "round_summary"}, {"round", round_}, {"config", preset_.name}};
  const bool done = game_ && game_->game().completed();
  if (trials_.empty()) {
    out["attempts"] = 0;
    out["fnr"] = nullptr;
    out["gestures"] = nlohmann::json::array();
    out["mean_delta"] = nullptr;
    out["completed"] = done;
    return out;
  }
  const MetricsReport rep = compute_report(trials_, config_.base.k, done, 0, preset_.name);
  nlohmann::json gestures = nlohmann::json::array();
  for (const auto& g : rep.gestures)
    gestures.push_back({{"gesture", gesture_name(g.gesture)},
                        {"attempts", g.attempts},
                        {"first_k_precision", optional_json(g.first_k)},
                        {"last_k_precision", optional_json(g.last_k)},
                        {"delta", optional_json(g.delta)},
                        {"overlap", g.overlap}});
  out["attempts"] = rep.attempts;
  out["fnr"] = rep.fnr;
  out["gestures"] = gestures;
  out["mean_delta"] = optional_json(rep.mean_delta);
  out["completed"] = rep.completed;
  out["K"] = config_.base.k;
  return out;
}

void GatewaySession::send_state() {
  nlohmann::json state = {{"type", "game_state"},
                          {"status", status_name(status_)},
                          {"player_id", player_id_},
                          {"resumed", resumed_},
                          {"config", preset_.name},
                          {"round", round_}};
  if (game_) {
    const auto& g = game_->game();
    state["path"] = nlohmann::json::array();
    for (int c : g.path().cells) state["path"].push_back(gesture_name(c));
    state["position"] = g.position();
    state["pending"] = g.completed() ? nlohmann::json() : nlohmann::json(gesture_name(g.pending()));
    state["advances"] = g.advance_count();
    state["reports"] = g.spacebar_count();
    state["frame"] = frame_;
  }
  send(std::move(state), false);
}

void GatewaySession::send(nlohmann::json body, bool droppable) {
  body["ts"] = clock_();
  outbound_.push(std::move(body), droppable);
}

void GatewaySession::write_frame_log() {
  if (config_.frame_log_dir.empty() || !game_ || frames_.empty()) return;
  fs::create_directories(config_.frame_log_dir);
  const std::string stem =
      (fs::path(config_.frame_log_dir) / (player_id_ + "_r" + std::to_string(round_))).string();
  ReplayHeader header;
  header.dim = population_->head.dim();
  header.n_classes = kNumGestures;
  header.frame_rate = config_.base.source.frames_per_second;
  header.frames = static_cast<long long>(frames_.size());
  header.path = game_->game().path().cells;
  write_replay(stem + ".frames.ndjson", header, frames_);
  save_snapshot_file(stem + ".model.json", round_start_model_);
  std::ofstream events(stem + ".events.ndjson");
  write_event_log(events, game_->events());
  frames_.clear();
}

}  // namespace gmab
