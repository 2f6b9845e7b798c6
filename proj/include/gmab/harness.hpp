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

// Closed-loop experiment runner: synthetic users play the navigation game
// through the bandit pipeline across rounds and sessions.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gmab/metrics.hpp"
#include "gmab/pipeline.hpp"
#include "json.hpp"

namespace gmab {

struct SourceConfig {
  double frames_per_second = 25.0;
  int gesture_frames = 0;  // 0: the frame count covering 40 ms
  int rest_min = 5;
  int rest_max = 15;
  std::uint64_t population_seed = 7;

  int frames_per_40ms() const;
  int active_frames() const { return gesture_frames > 0 ? gesture_frames : frames_per_40ms(); }
};

struct RoundSpec {
  std::string name;
  int session = 1;
  bool learning = true;
  int path_length = 60;
};

struct SeverityConfig {
  enum class Mode { fixed, calibrate };
  Mode mode = Mode::calibrate;
  std::vector<double> grid = {0.5};  // fixed mode: every seed runs at every value
  double target_accuracy = 0.6;
  double tolerance = 0.05;
  int calibration_frames = 5000;
};

struct ExperimentConfig {
  std::vector<std::uint64_t> seeds = {1};
  SeverityConfig severity;
  std::vector<RoundSpec> rounds = {{"S1-Baseline", 1, false, 60},
                                   {"S1-Learning", 1, true, 60},
                                   {"S2-Learning", 2, true, 60}};
  std::string persistence_dir = "snapshots";
  BanditConfig bandit;
  PostProcessConfig post;
  GameOptions game;
  double action_rate = 1.0 / 3.0;
  SimPlayerPolicy player;
  SourceConfig source;
  int k = 25;
  int stall_factor = 10;  // round budget: stall_factor * path_length attempts

  int dim() const { return bandit.dim; }
  void validate() const;
};

// Defaults with every 40 ms-derived quantity resolved for source.frames_per_second:
// post-processing window, credit window, refractory period and gesture length
// all cover 40 ms, the report timeout equals the gesture length.
ExperimentConfig default_config(double frames_per_second = 25.0);

// Keys mirror ExperimentConfig; absent keys keep default_config() values for
// the file's frames_per_second.
ExperimentConfig load_config(const nlohmann::json& doc);
ExperimentConfig load_config_file(const std::string& path);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

// "a..b" (inclusive) or a single integer.
std::vector<std::uint64_t> parse_seed_range(const std::string& text);

struct UserContext {
  int id = 0;
  std::uint64_t seed = 0;
  double severity = 0.0;
  double baseline_accuracy = 0.0;
  UserPerturbation perturbation;
};

struct RoundResult {
  std::vector<TrialRecord> records;
  std::vector<EventRecord> events;
  Model model;
  bool completed = false;
  std::int64_t frames = 0;
  int stalled_cells = 0;
};

RoundResult run_round(const ExperimentConfig& cfg, const Population& pop, const UserContext& user,
                      Model model, bool learning, int round_index, int path_length);

struct CalibrationResult {
  double severity = 0.0;
  double accuracy = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Bisection on severity so the population head's per-frame accuracy on this
// user is within `tolerance` of `target` (common random numbers across
// probes). Reports the closest probe when the target is unreachable.
CalibrationResult calibrate_severity(const Population& pop, std::uint64_t user_seed, double target,
                                     double tolerance, int frames);

struct UserRounds {
  UserContext user;
  std::vector<MetricsReport> reports;
  std::vector<RoundResult> rounds;
  std::vector<Model> models_before_round;
};

struct ProtocolResult {
  std::vector<UserRounds> users;
  std::vector<std::string> warnings;

  std::vector<MetricsReport> reports() const;
};

struct ProtocolHooks {
  // Called after the end-of-session snapshot is written, before it is read back.
  std::function<void(const UserContext&, const std::string& snapshot_path)> between_sessions;
};

ProtocolResult run_protocol(const ExperimentConfig& cfg, const ProtocolHooks& hooks = {});

// Users the protocol will run: one per seed, times the severity grid in fixed mode.
std::vector<UserContext> make_users(const ExperimentConfig& cfg, const Population& pop);

// rounds.csv, series.csv, users.csv, events/<user>_<round>.ndjson, summary.json.
void write_outputs(const std::string& dir, const ExperimentConfig& cfg, const ProtocolResult& result);

struct RoundAggregate {
  std::string round;
  int users = 0;
  double mean_delta = 0.0;
  double se_delta = 0.0;
  int users_with_delta = 0;
  double mean_fnr = 0.0;
  double se_fnr = 0.0;
  double completion_rate = 0.0;
};

std::vector<RoundAggregate> aggregate(const std::vector<MetricsReport>& reports,
                                      const std::vector<std::string>& round_order);

// Reads rounds.csv from `dir` and aggregates it per round.
std::vector<RoundAggregate> aggregate_csv(const std::string& dir);

std::string rounds_csv(const ProtocolResult& result);

}  // namespace gmab
