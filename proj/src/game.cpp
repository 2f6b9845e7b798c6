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

#include "gmab/game.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "gmab/context_source.hpp"

namespace gmab {

std::string_view gesture_name(int g) {
  if (g < 0 || g >= kNumGestures) throw std::out_of_range("gesture index out of range");
  return kGestureNames[static_cast<std::size_t>(g)];
}

std::optional<int> gesture_from_name(std::string_view name) {
  for (int g = 0; g < kNumGestures; ++g)
    if (kGestureNames[static_cast<std::size_t>(g)] == name) return g;
  return std::nullopt;
}

bool is_directional(int g) { return g >= 0 && g < 4; }

int reverse_of(int g) {
  switch (static_cast<Gesture>(g)) {
    case Gesture::up: return static_cast<int>(Gesture::down);
    case Gesture::down: return static_cast<int>(Gesture::up);
    case Gesture::left: return static_cast<int>(Gesture::right);
    case Gesture::right: return static_cast<int>(Gesture::left);
    default: return -1;
  }
}

namespace {

bool compatible(int prev, int next) { return prev < 0 || reverse_of(prev) != next; }

}  // namespace

PathSpec generate_path(std::uint64_t seed, int length, double action_rate) {
  if (length < 1) throw std::invalid_argument("path length must be >= 1");
  if (!(action_rate >= 0.0 && action_rate <= 1.0))
    throw std::invalid_argument("action_rate must lie in [0, 1]");
  Rng rng(mix_seed(seed, 0x70617468));

  std::array<int, kNumGestures> counts{};
  const int actions = static_cast<int>(std::lround(action_rate * length));
  const int directions = length - actions;
  auto spread = [&](int total, int first, int n) {
    for (int k = 0; k < n; ++k) counts[static_cast<std::size_t>(first + k)] = total / n;
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) idx[static_cast<std::size_t>(k)] = first + k;
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int k = 0; k < total % n; ++k) ++counts[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
  };
  spread(directions, 0, 4);
  spread(actions, 4, 2);

  // Draw proportionally to remaining counts among gestures that are not the
  // reverse of the previous cell; if only reversals remain, insert the cell
  // at the first earlier slot where it fits.
  std::vector<int> cells;
  cells.reserve(static_cast<std::size_t>(length));
  for (int placed = 0; placed < length; ++placed) {
    const int prev = cells.empty() ? -1 : cells.back();
    int total = 0;
    for (int g = 0; g < kNumGestures; ++g)
      if (compatible(prev, g)) total += counts[static_cast<std::size_t>(g)];
    if (total > 0) {
      std::uniform_int_distribution<int> pick(0, total - 1);
      int r = pick(rng);
      for (int g = 0; g < kNumGestures; ++g) {
        if (!compatible(prev, g)) continue;
        r -= counts[static_cast<std::size_t>(g)];
        if (r < 0) {
          cells.push_back(g);
          --counts[static_cast<std::size_t>(g)];
          break;
        }
      }
      continue;
    }
    int g = 0;
    while (counts[static_cast<std::size_t>(g)] == 0) ++g;
    --counts[static_cast<std::size_t>(g)];
    bool inserted = false;
    for (std::size_t slot = 0; slot <= cells.size() && !inserted; ++slot) {
      const int before = slot == 0 ? -1 : cells[slot - 1];
      const int after = slot == cells.size() ? -1 : cells[slot];
      if (compatible(before, g) && (after < 0 || compatible(g, after))) {
        cells.insert(cells.begin() + static_cast<std::ptrdiff_t>(slot), g);
        inserted = true;
      }
    }
    if (!inserted) throw std::logic_error("path generator could not place a cell");
  }

  PathSpec spec;
  spec.cells = std::move(cells);
  spec.seed = seed;
  spec.action_rate = action_rate;
  return spec;
}

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::advanced: return "advanced";
    case EventKind::ignored: return "ignored";
    case EventKind::user_report: return "user_report";
  }
  return "?";
}

GameState::GameState(PathSpec path, GameOptions options)
    : path_(std::move(path)), options_(options) {
  if (path_.cells.empty()) throw std::invalid_argument("game path is empty");
  for (int c : path_.cells)
    if (c < 0 || c >= kNumGestures) throw std::invalid_argument("game path holds an invalid gesture");
}

int GameState::pending() const {
  return completed() ? -1 : path_.cells[static_cast<std::size_t>(position_)];
}

GameEvent GameState::step(std::optional<int> emitted, bool spacebar) {
  if (completed()) throw GameError("game_step on a completed game");
  if (spacebar && emitted) throw std::invalid_argument("game_step takes an emission or a spacebar, not both");
  if (spacebar) {
    ++spacebar_count_;
    return {EventKind::user_report, RewardSignal::report()};
  }
  if (!emitted) throw std::invalid_argument("game_step needs an emission or a spacebar");
  if (*emitted < 0 || *emitted >= kNumGestures) throw std::out_of_range("emitted class out of range");
  ++emission_count_;
  if (*emitted == pending()) {
    ++position_;
    ++advance_count_;
    return {EventKind::advanced, RewardSignal::advance()};
  }
  if (options_.penalize_wrong_emission) return {EventKind::ignored, RewardSignal::report()};
  return {EventKind::ignored, std::nullopt};
}

PlayerAction sim_player_step(const SimPlayerPolicy& policy, const GameState& state,
                             int frames_since_attempt, bool responded) {
  if (state.completed()) throw GameError("simulated player stepped on a completed game");
  if (!responded && frames_since_attempt == policy.report_timeout) return PlayerAction::spacebar;
  if (frames_since_attempt >= policy.cadence) return PlayerAction::attempt;
  return PlayerAction::wait;
}

nlohmann::json to_json(const EventRecord& r) {
  nlohmann::json j = {{"t", r.t},
                      {"pending", r.pending},
                      {"kind", std::string(event_kind_name(r.kind))},
                      {"reward", r.reward},
                      {"position", r.position}};
  j["emitted"] = r.emitted ? nlohmann::json(*r.emitted) : nlohmann::json(nullptr);
  return j;
}

EventRecord event_from_json(const nlohmann::json& j) {
  EventRecord r{};
  r.t = j.at("t").get<std::int64_t>();
  r.pending = j.at("pending").get<int>();
  if (!j.at("emitted").is_null()) r.emitted = j["emitted"].get<int>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "advanced") r.kind = EventKind::advanced;
  else if (kind == "ignored") r.kind = EventKind::ignored;
  else if (kind == "user_report") r.kind = EventKind::user_report;
  else throw std::invalid_argument("unknown event kind '" + kind + "'");
  r.reward = j.at("reward").get<int>();
  r.position = j.at("position").get<int>();
  return r;
}

void write_event_log(std::ostream& out, const std::vector<EventRecord>& events) {
  for (const auto& e : events) out << to_json(e).dump() << '\n';
}

std::vector<EventRecord> read_event_log(std::istream& in) {
  std::vector<EventRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(event_from_json(nlohmann::json::parse(line)));
  return out;
}

}  // namespace gmab
