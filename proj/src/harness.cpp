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

#include "gmab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <future>
#include <limits>
#include <map>
#include <thread>

#include "gmab/snapshot.hpp"

namespace gmab {

namespace {

struct OpenAttempt {
  int intended = 0;
  int cell = 0;
  std::int64_t start = 0;
};

}  // namespace

RoundResult run_round(const ExperimentConfig& cfg, const Population& pop, const UserContext& user,
                      Model model, bool learning, int round_index, int path_length) {
  if (model.dim() != pop.head.dim() || model.n_arms() != pop.head.n_classes())
    throw DimensionError("bandit model does not match the population head");
  clear_history(model);

  const auto salt = static_cast<std::uint64_t>(round_index);
  Rng rng(mix_seed(user.seed, 1000 + salt));
  PathSpec path = generate_path(mix_seed(user.seed, 2000 + salt), path_length, cfg.action_rate);

  Pipeline pipeline(std::move(model), cfg.post);
  pipeline.set_learning(learning);
  GameSession session(std::move(pipeline), GameState(std::move(path), cfg.game));

  const int active = cfg.source.active_frames();
  const long long budget = static_cast<long long>(cfg.stall_factor) * path_length;
  std::uniform_int_distribution<int> gap(cfg.source.rest_min, cfg.source.rest_max);

  // cadence 0: each attempt draws its own gap after the gesture
  SimPlayerPolicy policy = cfg.player;
  if (policy.cadence == 0) policy.cadence = active + gap(rng);
  std::deque<Frame> queue;
  std::vector<TrialRecord> records;
  std::map<int, int> attempts_per_cell;
  OpenAttempt open;
  bool attempt_open = false;
  std::optional<int> first_emission;  // since the previous resolution
  int since_attempt = std::numeric_limits<int>::max() / 2;
  bool responded = true;
  bool dnf = false;
  std::int64_t t = 0;

  auto close = [&](int intended, int cell, std::optional<int> emitted, bool spacebar, int frames) {
    TrialRecord r;
    r.user = user.id;
    r.round = round_index;
    r.attempt = static_cast<int>(records.size());
    r.cell = cell;
    r.intended = intended;
    r.emitted = emitted;
    r.spacebar = spacebar;
    r.frames_to_response = frames;
    records.push_back(r);
    first_emission.reset();
  };

  while (!session.game().completed()) {
    const PlayerAction action = sim_player_step(policy, session.game(), since_attempt, responded);

    if (action == PlayerAction::spacebar) {
      const int pending = session.game().pending();
      session.on_report(t);
      const OpenAttempt a = attempt_open ? open : OpenAttempt{pending, session.game().position(), t};
      close(a.intended, a.cell, first_emission, true, -1);
      attempt_open = false;
      responded = true;
    } else if (action == PlayerAction::attempt) {
      const long long attempted = static_cast<long long>(records.size()) + (attempt_open ? 1 : 0);
      if (attempted >= budget) {
        dnf = true;
        break;
      }
      const int pending = session.game().pending();
      const int cell = session.game().position();
      open = OpenAttempt{pending, cell, t};
      attempt_open = true;
      ++attempts_per_cell[cell];
      since_attempt = 0;
      responded = false;
      if (cfg.player.cadence == 0) policy.cadence = active + gap(rng);
      auto burst = gesture_burst(pop, user.perturbation, pending, rng, BurstShape{0, active, 0});
      queue.insert(queue.end(), std::make_move_iterator(burst.begin()),
                   std::make_move_iterator(burst.end()));
    }

    Frame frame;
    if (queue.empty()) {
      frame = rest_frame(pop, user.perturbation, rng);
    } else {
      frame = std::move(queue.front());
      queue.pop_front();
    }
    const int pending_before = session.game().pending();
    const int cell_before = session.game().position();
    const FrameOutcome out = session.on_frame(frame, t);
    if (out.event) {
      if (!first_emission) first_emission = out.emission;
      if (out.event->kind == EventKind::advanced) {
        if (attempt_open && !responded) {
          close(open.intended, open.cell, first_emission, false, static_cast<int>(t - open.start));
          attempt_open = false;
          responded = true;
        } else {
          close(pending_before, cell_before, first_emission, false, 0);
        }
      }
    }
    ++t;
    ++since_attempt;
  }

  RoundResult result{records, session.events(), session.mutable_pipeline().release_model(),
                     session.game().completed() && !dnf, t, 0};
  for (const auto& [cell, n] : attempts_per_cell)
    if (n > cfg.player.retry_limit) ++result.stalled_cells;
  return result;
}

CalibrationResult calibrate_severity(const Population& pop, std::uint64_t user_seed, double target,
                                     double tolerance, int frames) {
  const std::uint64_t probe_seed = mix_seed(user_seed, 0xca11b);
  auto accuracy_at = [&](double s) {
    return measure_accuracy(pop, make_user(user_seed, pop.prototypes, s), frames, probe_seed);
  };
  CalibrationResult best;
  best.severity = 0.0;
  const double lo_acc = accuracy_at(0.0);
  best.accuracy = lo_acc;
  auto consider = [&](double s, double acc) {
    if (std::abs(acc - target) < std::abs(best.accuracy - target)) {
      best.severity = s;
      best.accuracy = acc;
    }
  };
  const double hi_acc = accuracy_at(1.0);
  consider(1.0, hi_acc);
  double lo = 0.0, hi = 1.0;
  int it = 0;
  if (lo_acc > target && hi_acc < target) {
    for (; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double acc = accuracy_at(mid);
      consider(mid, acc);
      if (std::abs(acc - target) <= 0.2 * tolerance) break;
      if (acc > target) lo = mid;
      else hi = mid;
      if (hi - lo < 1e-6) break;
    }
  }
  best.iterations = it;
  best.converged = std::abs(best.accuracy - target) <= tolerance;
  return best;
}

std::vector<UserContext> make_users(const ExperimentConfig& cfg, const Population& pop) {
  std::vector<UserContext> users;
  int id = 0;
  auto add = [&](std::uint64_t seed, double severity) {
    UserContext u;
    u.id = id++;
    u.seed = seed;
    u.severity = severity;
    u.perturbation = make_user(seed, pop.prototypes, severity);
    u.baseline_accuracy =
        measure_accuracy(pop, u.perturbation, cfg.severity.calibration_frames, mix_seed(seed, 0xacc));
    users.push_back(std::move(u));
  };
  for (auto seed : cfg.seeds) {
    if (cfg.severity.mode == SeverityConfig::Mode::fixed) {
      for (double s : cfg.severity.grid) add(seed, s);
    } else {
      const auto cal = calibrate_severity(pop, seed, cfg.severity.target_accuracy,
                                          cfg.severity.tolerance, cfg.severity.calibration_frames);
      add(seed, cal.severity);
    }
  }
  return users;
}

std::vector<MetricsReport> ProtocolResult::reports() const {
  std::vector<MetricsReport> out;
  for (const auto& u : users) out.insert(out.end(), u.reports.begin(), u.reports.end());
  return out;
}

namespace {

UserRounds run_user(const ExperimentConfig& cfg, const Population& pop, UserContext user,
                    const ProtocolHooks& hooks, std::vector<std::string>& warnings) {
  namespace fs = std::filesystem;
  UserRounds out;
  Model model(cfg.bandit);
  const std::string snap_path =
      (fs::path(cfg.persistence_dir) / ("user_" + std::to_string(user.id) + ".json")).string();
  int session = cfg.rounds.front().session;

  for (std::size_t i = 0; i < cfg.rounds.size(); ++i) {
    const auto& spec = cfg.rounds[i];
    if (spec.session != session) {
      save_snapshot_file(snap_path, snapshot(model));
      if (hooks.between_sessions) hooks.between_sessions(user, snap_path);
      if (fs::exists(snap_path)) {
        model = restore(load_snapshot_file(snap_path));
      } else {
        warnings.push_back("user " + std::to_string(user.id) + ": snapshot " + snap_path +
                           " missing before session " + std::to_string(spec.session) +
                           "; starting from a fresh bandit");
        model = Model(cfg.bandit);
      }
      session = spec.session;
    }
    out.models_before_round.push_back(model);
    RoundResult rr = run_round(cfg, pop, user, std::move(model), spec.learning,
                               static_cast<int>(i), spec.path_length);
    model = rr.model;
    out.reports.push_back(compute_report(rr.records, cfg.k, rr.completed, user.id, spec.name));
    out.rounds.push_back(std::move(rr));
  }
  save_snapshot_file(snap_path, snapshot(model));
  out.user = std::move(user);
  return out;
}

}  // namespace

ProtocolResult run_protocol(const ExperimentConfig& cfg, const ProtocolHooks& hooks) {
  cfg.validate();
  const Population pop = synth_population(cfg.source.population_seed, cfg.dim(), kNumGestures);
  std::vector<UserContext> users = make_users(cfg, pop);

  ProtocolResult result;
  result.users.resize(users.size(), UserRounds{UserContext{}, {}, {}, {}});
  std::vector<std::vector<std::string>> warnings(users.size());

  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), users.size()));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t u = w; u < users.size(); u += workers)
        result.users[u] = run_user(cfg, pop, users[u], hooks, warnings[u]);
    }));
  }
  for (auto& j : jobs) j.get();
  for (auto& w : warnings) result.warnings.insert(result.warnings.end(), w.begin(), w.end());
  return result;
}

}  // namespace gmab
