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

// 2-D navigation game: a fixed-length path of required gestures, a character
// that advances only on the correct gesture, and the reward each game event
// implies for the bandit.

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "gmab/bandit.hpp"
#include "json.hpp"

namespace gmab {

enum class Gesture : int { up = 0, down = 1, left = 2, right = 3, index_pinch = 4, thumb_tap = 5 };

inline constexpr int kNumGestures = 6;
inline constexpr std::array<std::string_view, kNumGestures> kGestureNames = {
    "up", "down", "left", "right", "index_pinch", "thumb_tap"};

std::string_view gesture_name(int g);
std::optional<int> gesture_from_name(std::string_view name);
bool is_directional(int g);
// The directional gesture that undoes `g`, or -1 for action gestures.
int reverse_of(int g);

struct PathSpec {
  std::vector<int> cells;
  std::uint64_t seed = 0;
  double action_rate = 0.0;

  int length() const { return static_cast<int>(cells.size()); }
};

// Class counts are fixed before ordering: round(length * action_rate) action
// cells split evenly between pinch and tap, the rest split evenly among the
// four directions, leftovers assigned at random. No directional cell is
// followed directly by its reverse.
PathSpec generate_path(std::uint64_t seed, int length, double action_rate);

enum class EventKind { advanced, ignored, user_report };
std::string_view event_kind_name(EventKind k);

struct GameEvent {
  EventKind kind;
  std::optional<RewardSignal> reward;
};

struct GameOptions {
  bool penalize_wrong_emission = false;
};

class GameState {
 public:
  explicit GameState(PathSpec path, GameOptions options = {});

  const PathSpec& path() const { return path_; }
  int position() const { return position_; }
  bool completed() const { return position_ == path_.length(); }
  int pending() const;  // -1 once completed
  int remaining() const { return path_.length() - position_; }
  int advance_count() const { return advance_count_; }
  int spacebar_count() const { return spacebar_count_; }
  int emission_count() const { return emission_count_; }
  const GameOptions& options() const { return options_; }

  // One of `emitted` or `spacebar` per call.
  GameEvent step(std::optional<int> emitted, bool spacebar);

 private:
  PathSpec path_;
  GameOptions options_;
  int position_ = 0;
  int advance_count_ = 0;
  int spacebar_count_ = 0;
  int emission_count_ = 0;
};

inline GameEvent game_step(GameState& state, std::optional<int> emitted, bool spacebar) {
  return state.step(emitted, spacebar);
}

class GameError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// --- simulated player -------------------------------------------------------

struct SimPlayerPolicy {
  int report_timeout = 1;  // frames after an attempt starts before pressing the spacebar
  int retry_limit = 20;    // attempts on one cell after which the cell counts as stalled
  int cadence = 10;        // frames between consecutive attempt starts; > report_timeout
};

enum class PlayerAction { attempt, wait, spacebar };

// Stateless policy. `frames_since_attempt` counts frames since the current
// attempt began (0 on the attempt frame); `responded` is whether the game
// advanced during it. The spacebar fires exactly once, at report_timeout,
// for an unresponded attempt; a new attempt starts at `cadence`.
PlayerAction sim_player_step(const SimPlayerPolicy& policy, const GameState& state,
                             int frames_since_attempt, bool responded);

// --- event log ----------------------------------------------------------------

struct EventRecord {
  std::int64_t t;
  int pending;
  std::optional<int> emitted;
  EventKind kind;
  int reward;  // 0 when absent
  int position;
};

nlohmann::json to_json(const EventRecord& r);
EventRecord event_from_json(const nlohmann::json& j);
void write_event_log(std::ostream& out, const std::vector<EventRecord>& events);
std::vector<EventRecord> read_event_log(std::istream& in);

}  // namespace gmab
