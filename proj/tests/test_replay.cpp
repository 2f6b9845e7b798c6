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

#include <gtest/gtest.h>

#include <filesystem>

#include "gmab/replay.hpp"

using namespace gmab;
namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "gmab_replay_test";
  fs::create_directories(dir);
  return (dir / name).string();
}

Frame hand_frame(int label, int peak, double total, Phase phase) {
  Frame f;
  f.embedding = Eigen::VectorXd::Zero(6);
  f.embedding(0) = 1.0;
  f.prob = Eigen::VectorXd::Constant(6, 0.01 * total);
  f.prob(peak) = 0.95 * total;
  f.label = label;
  f.phase = phase;
  return f;
}

bool same_events(const std::vector<EventRecord>& a, const std::vector<EventRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].t != b[i].t || a[i].pending != b[i].pending || a[i].emitted != b[i].emitted ||
        a[i].kind != b[i].kind || a[i].reward != b[i].reward || a[i].position != b[i].position)
      return false;
  }
  return true;
}

}  // namespace

TEST(ReplayRun, LabelModeRewardsAndReports) {
  // rest, hit on class 2, rest, miss on class 3 (emits 1), rest.
  std::vector<Frame> frames = {hand_frame(-1, 0, 0.05, Phase::rest),
                               hand_frame(2, 2, 0.9, Phase::active),
                               hand_frame(-1, 0, 0.05, Phase::rest),
                               hand_frame(-1, 0, 0.05, Phase::rest),
                               hand_frame(3, 1, 0.9, Phase::active),
                               hand_frame(-1, 0, 0.05, Phase::rest)};
  ReplayHeader header;
  header.dim = 6;
  header.n_classes = 6;
  header.frames = static_cast<long long>(frames.size());
  const auto path = scratch("labels.ndjson");
  write_replay(path, header, frames);

  auto stream = replay_open(path);
  ReplayRunOptions opts;
  opts.alpha = 0.0;
  const ReplayRun run = replay_run(stream, opts);
  EXPECT_FALSE(run.path_mode);
  EXPECT_EQ(run.frames, 6);
  ASSERT_EQ(run.emissions.size(), 6u);
  EXPECT_EQ(run.emissions[1], 2);
  EXPECT_EQ(run.emissions[4], 1);
  ASSERT_EQ(run.events.size(), 3u);
  EXPECT_EQ(run.events[0].kind, EventKind::advanced);
  EXPECT_EQ(run.events[1].kind, EventKind::ignored);
  EXPECT_EQ(run.events[2].kind, EventKind::user_report);
  EXPECT_EQ(run.events[2].t, 5);
  EXPECT_EQ(run.events[2].pending, 3);
  // Credit window 1: arm 2 got +1 from frame 1, arm 1 got -1 from frame 4.
  EXPECT_GT(run.model.arm(2).b.norm(), 0.0);
  EXPECT_LT(run.model.arm(1).b(0), 0.0);
  EXPECT_EQ(run.model.arm(0).b.norm(), 0.0);
}

TEST(ReplayRun, StaticReplayLeavesModelUntouched) {
  std::vector<Frame> frames = {hand_frame(2, 2, 0.9, Phase::active), hand_frame(-1, 0, 0.05, Phase::rest)};
  ReplayHeader header;
  header.dim = 6;
  header.n_classes = 6;
  const auto path = scratch("static.ndjson");
  write_replay(path, header, frames);
  auto stream = replay_open(path);
  ReplayRunOptions opts;
  opts.learning = false;
  const ReplayRun run = replay_run(stream, opts);
  for (int a = 0; a < 6; ++a) EXPECT_EQ(run.model.arm(a).b.norm(), 0.0);
}

TEST(ReplayRun, PathModeReproducesLiveSession) {
  const Population pop = synth_population(7, 8, 6);
  const auto user = make_user(3, pop.prototypes, 0.6);
  const PathSpec path = generate_path(11, 12, 1.0 / 3.0);
  Rng rng(21);

  std::vector<Frame> frames;
  for (int rep = 0; rep < 3; ++rep)
    for (int g : path.cells)
      for (auto& f : gesture_burst(pop, user, g, rng, {3, 2, 0})) frames.push_back(std::move(f));

  PostProcessConfig post;
  Model fresh(8, 6, 1.0, 1);
  GameSession live(Pipeline(fresh, post), GameState(path));
  std::vector<std::optional<int>> live_emissions;
  for (std::int64_t t = 0; t < static_cast<std::int64_t>(frames.size()); ++t) {
    if (t % 17 == 9 && !live.game().completed()) live.on_report(t);
    live_emissions.push_back(live.on_frame(frames[static_cast<std::size_t>(t)], t).emission);
  }

  ReplayHeader header;
  header.dim = 8;
  header.n_classes = 6;
  header.path = path.cells;
  const auto file = scratch("path.ndjson");
  write_replay(file, header, frames);
  auto stream = replay_open(file);
  ReplayRunOptions opts;
  opts.post = post;
  opts.model = fresh;
  opts.report_frames = report_frames(live.events());
  const ReplayRun run = replay_run(stream, opts);

  EXPECT_TRUE(run.path_mode);
  EXPECT_FALSE(opts.report_frames.empty());
  EXPECT_EQ(run.emissions, live_emissions);
  EXPECT_TRUE(same_events(run.events, live.events()));
  for (int a = 0; a < 6; ++a) {
    EXPECT_EQ(run.model.arm(a).A, live.pipeline().model().arm(a).A);
    EXPECT_EQ(run.model.arm(a).b, live.pipeline().model().arm(a).b);
  }
}

TEST(ReplayRun, ModelShapeMustMatchLog) {
  ReplayHeader header;
  header.dim = 6;
  header.n_classes = 6;
  const auto path = scratch("shape.ndjson");
  write_replay(path, header, {});
  auto stream = replay_open(path);
  ReplayRunOptions opts;
  opts.model = Model(8, 6, 1.0, 1);
  EXPECT_THROW(replay_run(stream, opts), DimensionError);
}
