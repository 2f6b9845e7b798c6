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

#include "gmab/pipeline.hpp"

namespace gmab {

Pipeline::Pipeline(Model model, const PostProcessConfig& post)
    : model_(std::move(model)), post_(post, model_.n_arms()) {}

FrameOutcome Pipeline::process(const Frame& frame) {
  auto pulled = pull(model_, frame.embedding, frame.prob);
  FrameOutcome out;
  out.arm = pulled.arm;
  out.scores = std::move(pulled.scores);
  out.emission = post_.step(out.arm, frame.prob);
  return out;
}

int Pipeline::reward(const RewardSignal& r) {
  return learning_ ? apply_reward(model_, r) : 0;
}

GameSession::GameSession(Pipeline pipeline, GameState game)
    : pipeline_(std::move(pipeline)), game_(std::move(game)) {
  if (pipeline_.model().n_arms() != kNumGestures)
    throw DimensionError("game sessions need a model with one arm per gesture");
}

FrameOutcome GameSession::on_frame(const Frame& frame, std::int64_t t) {
  FrameOutcome out = pipeline_.process(frame);
  if (out.emission && !game_.completed()) {
    const int pending = game_.pending();
    GameEvent ev = game_.step(out.emission, false);
    if (ev.reward) out.credited = pipeline_.reward(*ev.reward);
    log(t, pending, out.emission, ev);
    out.event = ev;
  }
  return out;
}

ReportOutcome GameSession::on_report(std::int64_t t) {
  const int pending = game_.pending();
  GameEvent ev = game_.step(std::nullopt, true);
  ReportOutcome out{ev, 0};
  if (ev.reward) out.credited = pipeline_.reward(*ev.reward);
  log(t, pending, std::nullopt, ev);
  return out;
}

void GameSession::log(std::int64_t t, int pending, std::optional<int> emitted, const GameEvent& ev) {
  events_.push_back(EventRecord{t, pending, emitted, ev.kind, ev.reward ? ev.reward->value : 0,
                                game_.position()});
}

void clear_history(Model& model) { model.mutable_history().clear(); }

}  // namespace gmab
