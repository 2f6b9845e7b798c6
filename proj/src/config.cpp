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

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "gmab/harness.hpp"

namespace gmab {

int SourceConfig::frames_per_40ms() const {
  return std::max(1, static_cast<int>(std::lround(0.040 * frames_per_second)));
}

ExperimentConfig default_config(double frames_per_second) {
  ExperimentConfig cfg;
  cfg.source.frames_per_second = frames_per_second;
  const int w = cfg.source.frames_per_40ms();
  cfg.post.window = w;
  cfg.post.refractory = w;
  cfg.bandit.credit_window = w;
  cfg.bandit.n_arms = kNumGestures;
  cfg.player.report_timeout = cfg.source.active_frames();
  cfg.player.cadence = 0;
  return cfg;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("config: seeds must not be empty");
  if (rounds.empty()) throw std::invalid_argument("config: rounds must not be empty");
  if (k < 1) throw std::invalid_argument("config: K must be >= 1");
  if (stall_factor < 1) throw std::invalid_argument("config: stall_factor must be >= 1");
  if (bandit.n_arms != kNumGestures)
    throw std::invalid_argument("config: the game uses six gestures; bandit.n_arms must be 6");
  if (bandit.dim < bandit.n_arms) throw std::invalid_argument("config: bandit.d must be >= 6");
  post.validate();
  for (const auto& r : rounds) {
    if (r.path_length < 1) throw std::invalid_argument("config: round '" + r.name + "' path_length < 1");
    if (r.session < 1) throw std::invalid_argument("config: round '" + r.name + "' session < 1");
  }
  for (std::size_t i = 1; i < rounds.size(); ++i)
    if (rounds[i].session < rounds[i - 1].session)
      throw std::invalid_argument("config: rounds must be ordered by session");
  if (source.frames_per_second <= 0) throw std::invalid_argument("config: frames_per_second must be > 0");
  if (source.rest_min < 0 || source.rest_max < source.rest_min)
    throw std::invalid_argument("config: need 0 <= rest_min <= rest_max");
  if (player.report_timeout < source.active_frames())
    throw std::invalid_argument("config: player.report_timeout must cover the gesture duration");
  if (player.cadence != 0 && player.cadence <= player.report_timeout)
    throw std::invalid_argument("config: player.cadence must exceed report_timeout");
  if (player.cadence == 0 && source.active_frames() + source.rest_min <= player.report_timeout)
    throw std::invalid_argument("config: gesture length + rest_min must exceed report_timeout");
  if (severity.mode == SeverityConfig::Mode::fixed) {
    if (severity.grid.empty()) throw std::invalid_argument("config: severity grid is empty");
    for (double s : severity.grid)
      if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("config: severity values lie in [0, 1]");
  }
  if (!(action_rate >= 0.0 && action_rate <= 1.0))
    throw std::invalid_argument("config: game.action_rate must lie in [0, 1]");
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) return {std::stoull(text)};
    const auto a = std::stoull(text.substr(0, dots));
    const auto b = std::stoull(text.substr(dots + 2));
    if (b < a) throw std::invalid_argument("empty seed range");
    std::vector<std::uint64_t> out;
    for (auto s = a; s <= b; ++s) out.push_back(s);
    return out;
  } catch (const std::logic_error&) {
    throw std::invalid_argument("seed range must look like 'a..b' or 'n', got '" + text + "'");
  }
}

namespace {

template <typename T>
void read(const nlohmann::json& obj, const char* key, T& into) {
  if (obj.contains(key)) into = obj.at(key).get<T>();
}

}  // namespace

ExperimentConfig load_config(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  try {
    const auto source = doc.value("source", nlohmann::json::object());
    ExperimentConfig cfg = default_config(source.value("frames_per_second", 25.0));
    read(source, "gesture_frames", cfg.source.gesture_frames);
    read(source, "rest_min", cfg.source.rest_min);
    read(source, "rest_max", cfg.source.rest_max);
    read(source, "population_seed", cfg.source.population_seed);
    cfg.player.report_timeout = cfg.source.active_frames();

    if (doc.contains("seeds")) {
      const auto& s = doc["seeds"];
      cfg.seeds = s.is_string() ? parse_seed_range(s.get<std::string>()) : s.get<std::vector<std::uint64_t>>();
    } else if (doc.contains("n_users")) {
      cfg.seeds.clear();
      for (int u = 1; u <= doc["n_users"].get<int>(); ++u) cfg.seeds.push_back(static_cast<std::uint64_t>(u));
    }

    if (doc.contains("severity")) {
      const auto& s = doc["severity"];
      const auto mode = s.value("mode", std::string("calibrate"));
      if (mode == "calibrate") cfg.severity.mode = SeverityConfig::Mode::calibrate;
      else if (mode == "fixed") cfg.severity.mode = SeverityConfig::Mode::fixed;
      else throw std::invalid_argument("config: severity.mode must be 'calibrate' or 'fixed'");
      read(s, "grid", cfg.severity.grid);
      read(s, "target_accuracy", cfg.severity.target_accuracy);
      read(s, "tolerance", cfg.severity.tolerance);
      read(s, "calibration_frames", cfg.severity.calibration_frames);
    }

    if (doc.contains("rounds")) {
      cfg.rounds.clear();
      for (const auto& r : doc["rounds"]) {
        RoundSpec spec;
        spec.name = r.at("name").get<std::string>();
        read(r, "session", spec.session);
        read(r, "learning", spec.learning);
        read(r, "path_length", spec.path_length);
        cfg.rounds.push_back(spec);
      }
    }
    read(doc, "persistence_dir", cfg.persistence_dir);
    read(doc, "K", cfg.k);

    if (doc.contains("bandit")) {
      const auto& b = doc["bandit"];
      read(b, "d", cfg.bandit.dim);
      read(b, "alpha", cfg.bandit.alpha);
      read(b, "credit_window", cfg.bandit.credit_window);
      read(b, "recompute_interval", cfg.bandit.recompute_interval);
    }
    if (doc.contains("postprocess")) {
      const auto& p = doc["postprocess"];
      read(p, "tau_b", cfg.post.tau_b);
      read(p, "tau_e", cfg.post.tau_e);
      read(p, "window_frames", cfg.post.window);
      cfg.post.refractory = cfg.post.window;
      read(p, "refractory_frames", cfg.post.refractory);
    }
    if (doc.contains("game")) {
      const auto& g = doc["game"];
      read(g, "penalize_wrong_emission", cfg.game.penalize_wrong_emission);
      read(g, "action_rate", cfg.action_rate);
      read(g, "stall_factor", cfg.stall_factor);
    }
    if (doc.contains("player")) {
      const auto& p = doc["player"];
      read(p, "report_timeout", cfg.player.report_timeout);
      read(p, "retry_limit", cfg.player.retry_limit);
      read(p, "cadence", cfg.player.cadence);
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return load_config(doc);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : cfg.rounds)
    rounds.push_back({{"name", r.name}, {"session", r.session}, {"learning", r.learning},
                      {"path_length", r.path_length}});
  return {
      {"seeds", cfg.seeds},
      {"severity",
       {{"mode", cfg.severity.mode == SeverityConfig::Mode::fixed ? "fixed" : "calibrate"},
        {"grid", cfg.severity.grid},
        {"target_accuracy", cfg.severity.target_accuracy},
        {"tolerance", cfg.severity.tolerance},
        {"calibration_frames", cfg.severity.calibration_frames}}},
      {"rounds", rounds},
      {"persistence_dir", cfg.persistence_dir},
      {"K", cfg.k},
      {"bandit",
       {{"d", cfg.bandit.dim},
        {"alpha", cfg.bandit.alpha},
        {"credit_window", cfg.bandit.credit_window},
        {"recompute_interval", cfg.bandit.recompute_interval}}},
      {"postprocess",
       {{"tau_b", cfg.post.tau_b},
        {"tau_e", cfg.post.tau_e},
        {"window_frames", cfg.post.window},
        {"refractory_frames", cfg.post.refractory}}},
      {"game",
       {{"penalize_wrong_emission", cfg.game.penalize_wrong_emission},
        {"action_rate", cfg.action_rate},
        {"stall_factor", cfg.stall_factor}}},
      {"player",
       {{"report_timeout", cfg.player.report_timeout},
        {"retry_limit", cfg.player.retry_limit},
        {"cadence", cfg.player.cadence}}},
      {"source",
       {{"frames_per_second", cfg.source.frames_per_second},
        {"gesture_frames", cfg.source.gesture_frames},
        {"rest_min", cfg.source.rest_min},
        {"rest_max", cfg.source.rest_max},
        {"population_seed", cfg.source.population_seed}}},
  };
}

}  // namespace gmab
