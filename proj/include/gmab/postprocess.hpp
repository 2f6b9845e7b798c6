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

// Turns per-frame bandit pulls into discrete gesture events.
//
// Two sliding windows of `window` frames: the summed population probability
// per frame (activity gate, tau_b) and the pulled arm as a one-hot vote. Once
// the vote window is full, the vote mean m is compared against tau_e; a class
// is emitted when some m_i > tau_e. The vote window is cleared whenever the
// gate closes and after every emission, and a refractory period suppresses a
// second event from the same physical gesture.

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

namespace gmab {

struct PostProcessConfig {
  double tau_b = 0.5;
  double tau_e = 0.5;
  int window = 1;
  int refractory = 1;

  void validate() const;
};

class PostProcessor {
 public:
  PostProcessor(const PostProcessConfig& config, int n_classes);

  std::optional<int> step(int arm, const Eigen::Ref<const Eigen::VectorXd>& prob);

  const PostProcessConfig& config() const { return config_; }
  int n_classes() const { return n_classes_; }
  const std::deque<double>& prob_buffer() const { return prob_buffer_; }
  const std::deque<int>& arm_buffer() const { return arm_buffer_; }
  int refractory_remaining() const { return refractory_remaining_; }

  // Vote mean over the current arm buffer, divided by the window size.
  Eigen::VectorXd vote_mean() const;
  // One-hot encoding of the arm buffer, one row per entry.
  Eigen::MatrixXd one_hot_buffer() const;

  void reset();

 private:
  PostProcessConfig config_;
  int n_classes_;
  std::deque<double> prob_buffer_;
  std::deque<int> arm_buffer_;
  std::vector<int> votes_;
  int refractory_remaining_ = 0;
};

struct GateFrame {
  int arm;
  Eigen::VectorXd prob;
};

// Runs `frames` through `pp` and returns (frame offset, class) per emission.
std::vector<std::pair<std::size_t, int>> run_frames(PostProcessor& pp,
                                                    const std::vector<GateFrame>& frames);

}  // namespace gmab
