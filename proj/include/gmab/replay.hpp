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

// Offline evaluation of a recorded frame log through the shared pipeline.

#include <cstdint>
#include <optional>
#include <vector>

#include "gmab/pipeline.hpp"

namespace gmab {

struct ReplayRunOptions {
  double alpha = 1.0;
  int recompute_interval = 256;
  std::optional<PostProcessConfig> post;  // default: 40 ms windows at the log's frame rate
  std::optional<int> credit_window;       // default: post window
  GameOptions game;
  bool learning = true;
  std::optional<Model> model;  // initial model; fresh when absent
  // Path mode only: frames before whose pull the spacebar was pressed.
  std::vector<std::int64_t> report_frames;
};

struct ReplayRun {
  std::vector<EventRecord> events;
  std::vector<std::optional<int>> emissions;  // one per frame
  Model model;
  long long frames = 0;
  bool path_mode = false;
};

// With a path in the header the frames drive a game over that path and the
// spacebar is pressed at `report_frames`. Without one, an emission equal to
// the frame label earns +1 and an active segment that ends without a correct
// emission earns -1, applied before the first rest frame's pull.
ReplayRun replay_run(ReplayStream& stream, const ReplayRunOptions& options = {});

// Frame indices of the user reports in an event log.
std::vector<std::int64_t> report_frames(const std::vector<EventRecord>& events);

}  // namespace gmab
