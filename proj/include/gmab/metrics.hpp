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

#include <optional>
#include <string>
#include <vector>

#include "gmab/game.hpp"

namespace gmab {

// One attempted action. An attempt resolves either when the character
// advances or when the player presses the spacebar; `emitted` is the first
// emission since the previous resolution.
struct TrialRecord {
  int user = 0;
  int round = 0;
  int attempt = 0;
  int cell = 0;  // path position the attempt targeted
  int intended = 0;
  std::optional<int> emitted;
  bool spacebar = false;
  int frames_to_response = -1;  // -1 when the attempt was reported
};

enum class WindowSide { first, last };

struct WindowPrecision {
  std::optional<double> precision;  // absent when the window holds no emission
  int attempts = 0;                 // attempts of the gesture in the whole round
  int window_attempts = 0;
  int window_emissions = 0;
  bool overlap = false;             // attempts < 2K: first and last windows share attempts
};

// Correct emissions / all emissions over the first (or last) K attempts of
// `gesture`. Throws std::invalid_argument when the gesture was never attempted.
WindowPrecision precision_window_detail(const std::vector<TrialRecord>& records, int gesture,
                                        WindowSide side, int k);
std::optional<double> precision_window(const std::vector<TrialRecord>& records, int gesture,
                                       WindowSide side, int k);

// Spacebar presses / attempted actions. Throws on an empty round.
double fnr(const std::vector<TrialRecord>& records);

struct GestureMetrics {
  int gesture = 0;
  std::optional<double> first_k;
  std::optional<double> last_k;
  std::optional<double> delta;
  bool overlap = false;
  int attempts = 0;
};

struct MetricsReport {
  int user = 0;
  std::string round;
  std::vector<GestureMetrics> gestures;  // only gestures attempted in the round
  std::optional<double> mean_delta;      // over gestures with both windows defined
  double fnr = 0.0;
  std::vector<std::optional<double>> five_trial_series;
  bool completed = false;
  int attempts = 0;
};

// Precision per block of `trials_per_point` consecutive path cells; a trial
// is one cell. Length is floor(#cells attempted / trials_per_point).
std::vector<std::optional<double>> trial_series(const std::vector<TrialRecord>& records,
                                                int trials_per_point = 5);

MetricsReport compute_report(const std::vector<TrialRecord>& records, int k, bool completed,
                             int user = 0, std::string round = {});

// Rebuilds the trial records from the event log alone.
std::vector<TrialRecord> trials_from_events(const std::vector<EventRecord>& events, int user = 0,
                                            int round = 0);

}  // namespace gmab
