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

#include "gmab/metrics.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace gmab {

WindowPrecision precision_window_detail(const std::vector<TrialRecord>& records, int gesture,
                                        WindowSide side, int k) {
  if (k < 1) throw std::invalid_argument("K must be >= 1");
  std::vector<const TrialRecord*> of_gesture;
  for (const auto& r : records)
    if (r.intended == gesture) of_gesture.push_back(&r);
  if (of_gesture.empty())
    throw std::invalid_argument("gesture " + std::to_string(gesture) + " was never attempted");

  WindowPrecision out;
  out.attempts = static_cast<int>(of_gesture.size());
  out.overlap = out.attempts < 2 * k;
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(k), of_gesture.size());
  const std::size_t begin = side == WindowSide::first ? 0 : of_gesture.size() - n;
  int correct = 0;
  for (std::size_t i = begin; i < begin + n; ++i) {
    const auto& r = *of_gesture[i];
    if (!r.emitted) continue;
    ++out.window_emissions;
    if (*r.emitted == gesture) ++correct;
  }
  out.window_attempts = static_cast<int>(n);
  if (out.window_emissions > 0)
    out.precision = static_cast<double>(correct) / out.window_emissions;
  return out;
}

std::optional<double> precision_window(const std::vector<TrialRecord>& records, int gesture,
                                       WindowSide side, int k) {
  return precision_window_detail(records, gesture, side, k).precision;
}

double fnr(const std::vector<TrialRecord>& records) {
  if (records.empty()) throw std::invalid_argument("false-negative rate of an empty round");
  const auto reports = std::count_if(records.begin(), records.end(),
                                     [](const TrialRecord& r) { return r.spacebar; });
  return static_cast<double>(reports) / static_cast<double>(records.size());
}

std::vector<std::optional<double>> trial_series(const std::vector<TrialRecord>& records,
                                                int trials_per_point) {
  if (trials_per_point < 1) throw std::invalid_argument("trials_per_point must be >= 1");
  std::map<int, std::pair<int, int>> per_cell;  // cell -> (correct, emissions)
  for (const auto& r : records) {
    auto& c = per_cell[r.cell];
    if (r.emitted) {
      ++c.second;
      if (*r.emitted == r.intended) ++c.first;
    }
  }
  std::vector<std::optional<double>> series;
  const std::size_t points = per_cell.size() / static_cast<std::size_t>(trials_per_point);
  auto it = per_cell.begin();
  for (std::size_t p = 0; p < points; ++p) {
    int correct = 0, emissions = 0;
    for (int i = 0; i < trials_per_point; ++i, ++it) {
      correct += it->second.first;
      emissions += it->second.second;
    }
    series.push_back(emissions > 0 ? std::optional<double>(static_cast<double>(correct) / emissions)
                                   : std::nullopt);
  }
  return series;
}

MetricsReport compute_report(const std::vector<TrialRecord>& records, int k, bool completed,
                             int user, std::string round) {
  MetricsReport rep;
  rep.user = user;
  rep.round = std::move(round);
  rep.completed = completed;
  rep.attempts = static_cast<int>(records.size());
  rep.fnr = records.empty() ? 0.0 : fnr(records);
  rep.five_trial_series = trial_series(records, 5);

  double delta_sum = 0.0;
  int delta_n = 0;
  for (int g = 0; g < kNumGestures; ++g) {
    const bool attempted = std::any_of(records.begin(), records.end(),
                                       [g](const TrialRecord& r) { return r.intended == g; });
    if (!attempted) continue;
    GestureMetrics gm;
    gm.gesture = g;
    const auto first = precision_window_detail(records, g, WindowSide::first, k);
    const auto last = precision_window_detail(records, g, WindowSide::last, k);
    gm.first_k = first.precision;
    gm.last_k = last.precision;
    gm.overlap = first.overlap;
    gm.attempts = first.attempts;
    if (gm.first_k && gm.last_k) {
      gm.delta = *gm.last_k - *gm.first_k;
      delta_sum += *gm.delta;
      ++delta_n;
    }
    rep.gestures.push_back(gm);
  }
  if (delta_n > 0) rep.mean_delta = delta_sum / delta_n;
  return rep;
}

std::vector<TrialRecord> trials_from_events(const std::vector<EventRecord>& events, int user,
                                            int round) {
  std::vector<TrialRecord> out;
  std::optional<int> first_emission;
  for (const auto& ev : events) {
    if (ev.kind == EventKind::ignored) {
      if (!first_emission) first_emission = ev.emitted;
      continue;
    }
    TrialRecord r;
    r.user = user;
    r.round = round;
    r.attempt = static_cast<int>(out.size());
    r.intended = ev.pending;
    r.cell = ev.kind == EventKind::advanced ? ev.position - 1 : ev.position;
    r.spacebar = ev.kind == EventKind::user_report;
    r.emitted = first_emission ? first_emission : (r.spacebar ? std::nullopt : ev.emitted);
    out.push_back(r);
    first_emission.reset();
  }
  return out;
}

}  // namespace gmab
