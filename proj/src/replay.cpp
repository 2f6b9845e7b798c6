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

#include "gmab/replay.hpp"

#include <algorithm>
#include <cmath>

namespace gmab {

namespace {

PostProcessConfig post_for_rate(double frame_rate) {
  const int w = std::max(1, static_cast<int>(std::lround(0.040 * frame_rate)));
  PostProcessConfig post;
  post.window = w;
  post.refractory = w;
  return post;
}

}  // namespace

std::vector<std::int64_t> report_frames(const std::vector<EventRecord>& events) {
  std::vector<std::int64_t> out;
  for (const auto& e : events)
    if (e.kind == EventKind::user_report) out.push_back(e.t);
  return out;
}

ReplayRun replay_run(ReplayStream& stream, const ReplayRunOptions& options) {
  const auto& header = stream.header();
  const PostProcessConfig post = options.post.value_or(post_for_rate(header.frame_rate));
  Model model = options.model ? *options.model
                              : Model(header.dim, header.n_classes, options.alpha,
                                      options.credit_window.value_or(post.window),
                                      options.recompute_interval);
  if (model.dim() != header.dim || model.n_arms() != header.n_classes)
    throw DimensionError("replay: model is " + std::to_string(model.dim()) + "x" +
                         std::to_string(model.n_arms()) + " but the log holds d=" +
                         std::to_string(header.dim) + ", N=" + std::to_string(header.n_classes));

  ReplayRun run;
  run.path_mode = header.path.has_value();

  if (run.path_mode) {
    PathSpec path;
    path.cells = *header.path;
    Pipeline pipeline(std::move(model), post);
    pipeline.set_learning(options.learning);
    GameSession session(std::move(pipeline), GameState(std::move(path), options.game));
    auto reports = options.report_frames;
    std::sort(reports.begin(), reports.end());
    std::size_t next_report = 0;
    std::int64_t t = 0;
    while (auto frame = stream.next()) {
      for (; next_report < reports.size() && reports[next_report] <= t; ++next_report)
        if (!session.game().completed()) session.on_report(t);
      run.emissions.push_back(session.on_frame(*frame, t).emission);
      ++t;
    }
    run.events = session.events();
    run.model = session.mutable_pipeline().release_model();
    run.frames = t;
    return run;
  }

  Pipeline pipeline(std::move(model), post);
  pipeline.set_learning(options.learning);
  int correct = 0;
  bool in_segment = false;
  bool segment_hit = false;
  int segment_label = -1;
  std::int64_t t = 0;
  while (auto frame = stream.next()) {
    const bool active = frame->phase == Phase::active;
    if (in_segment && !active) {
      if (!segment_hit) {
        pipeline.reward(RewardSignal::report());
        run.events.push_back({t, segment_label, std::nullopt, EventKind::user_report, -1, correct});
      }
      in_segment = false;
    }
    if (active && !in_segment) {
      in_segment = true;
      segment_hit = false;
      segment_label = frame->label;
    }
    const FrameOutcome out = pipeline.process(*frame);
    run.emissions.push_back(out.emission);
    if (out.emission) {
      if (*out.emission == frame->label) {
        pipeline.reward(RewardSignal::advance());
        ++correct;
        segment_hit = segment_hit || active;
        run.events.push_back({t, frame->label, out.emission, EventKind::advanced, 1, correct});
      } else {
        run.events.push_back({t, frame->label, out.emission, EventKind::ignored, 0, correct});
      }
    }
    ++t;
  }
  run.model = pipeline.release_model();
  run.frames = t;
  return run;
}

}  // namespace gmab
