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

// Per-frame core shared by the experiment harness, the replay tool and the
// live gateway: pull -> post-process -> game step -> reward.

#include <cstdint>
#include <optional>
#include <vector>

#include "gmab/bandit.hpp"
#include "gmab/context_source.hpp"
#include "gmab/game.hpp"
#include "gmab/postprocess.hpp"

namespace gmab {

using Model = BanditModel<double>;

struct FrameOutcome {
  int arm = 0;
  Eigen::VectorXd scores;
  std::optional<int> emission;
  std::optional<GameEvent> event;
  int credited = 0;  // pull records updated by this frame's reward
};

struct ReportOutcome {
  GameEvent event;
  int credited = 0;
};

class Pipeline {
 public:
  Pipeline(Model model, const PostProcessConfig& post);

  // Pull and post-process one frame; no game involvement.
  FrameOutcome process(const Frame& frame);
  // Applies `r` when learning is enabled; returns records credited.
  int reward(const RewardSignal& r);

  const Model& model() const { return model_; }
  Model& mutable_model() { return model_; }
  Model release_model() { return std::move(model_); }
  const PostProcessor& post() const { return post_; }
  bool learning() const { return learning_; }
  void set_learning(bool on) { learning_ = on; }

 private:
  Model model_;
  PostProcessor post_;
  bool learning_ = true;
};

// Pipeline wired to one game instance with an event log.
class GameSession {
 public:
  GameSession(Pipeline pipeline, GameState game);

  // Frame `t`: pull, post-process and, on emission, step the game and credit
  // its reward.
  FrameOutcome on_frame(const Frame& frame, std::int64_t t);
  // Spacebar at the start of frame `t`, before that frame's pull.
  ReportOutcome on_report(std::int64_t t);

  const GameState& game() const { return game_; }
  const Pipeline& pipeline() const { return pipeline_; }
  Pipeline& mutable_pipeline() { return pipeline_; }
  const std::vector<EventRecord>& events() const { return events_; }

 private:
  void log(std::int64_t t, int pending, std::optional<int> emitted, const GameEvent& ev);

  Pipeline pipeline_;
  GameState game_;
  std::vector<EventRecord> events_;
};

// Drops any pending pull records; rewards never span rounds.
void clear_history(Model& model);

}  // namespace gmab
