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

#include "gmab/postprocess.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "gmab/bandit.hpp"

namespace gmab {

void PostProcessConfig::validate() const {
  if (!(tau_b > 0.0)) throw std::invalid_argument("postprocess.tau_b must be > 0");
  if (!(tau_e > 0.0 && tau_e <= 1.0)) throw std::invalid_argument("postprocess.tau_e must be in (0, 1]");
  if (window < 1) throw std::invalid_argument("postprocess.window_frames must be >= 1");
  if (refractory < 0) throw std::invalid_argument("postprocess.refractory_frames must be >= 0");
}

PostProcessor::PostProcessor(const PostProcessConfig& config, int n_classes)
    : config_(config), n_classes_(n_classes), votes_(static_cast<std::size_t>(std::max(n_classes, 0)), 0) {
  config_.validate();
  if (n_classes < 2) throw DimensionError("post-processor needs >= 2 classes");
}

void PostProcessor::reset() {
  prob_buffer_.clear();
  arm_buffer_.clear();
  std::fill(votes_.begin(), votes_.end(), 0);
  refractory_remaining_ = 0;
}

std::optional<int> PostProcessor::step(int arm, const Eigen::Ref<const Eigen::VectorXd>& prob) {
  if (arm < 0 || arm >= n_classes_)
    throw std::out_of_range("arm " + std::to_string(arm) + " outside [0, " +
                            std::to_string(n_classes_) + ")");
  if (prob.size() != n_classes_)
    throw DimensionError("probability vector has length " + std::to_string(prob.size()) +
                         ", post-processor expects " + std::to_string(n_classes_));

  const auto window = static_cast<std::size_t>(config_.window);
  prob_buffer_.push_back(prob.sum());
  if (prob_buffer_.size() > window) prob_buffer_.pop_front();

  const bool blocked = refractory_remaining_ > 0;
  if (blocked) --refractory_remaining_;

  const double activity = *std::max_element(prob_buffer_.begin(), prob_buffer_.end());
  if (!(activity > config_.tau_b)) {
    arm_buffer_.clear();
    std::fill(votes_.begin(), votes_.end(), 0);
    return std::nullopt;
  }

  arm_buffer_.push_back(arm);
  ++votes_[static_cast<std::size_t>(arm)];
  if (arm_buffer_.size() > window) {
    --votes_[static_cast<std::size_t>(arm_buffer_.front())];
    arm_buffer_.pop_front();
  }
  if (arm_buffer_.size() < window || blocked) return std::nullopt;

  // Constant tau_e: argmax(m - tau_e) == argmax(m), so only the existence test uses it.
  int best = 0;
  for (int i = 1; i < n_classes_; ++i)
    if (votes_[static_cast<std::size_t>(i)] > votes_[static_cast<std::size_t>(best)]) best = i;
  const double m_best = static_cast<double>(votes_[static_cast<std::size_t>(best)]) /
                        static_cast<double>(config_.window);
  if (!(m_best > config_.tau_e)) return std::nullopt;

  arm_buffer_.clear();
  std::fill(votes_.begin(), votes_.end(), 0);
  refractory_remaining_ = config_.refractory;
  return best;
}

Eigen::VectorXd PostProcessor::vote_mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n_classes_);
  for (int a : arm_buffer_) m(a) += 1.0;
  return m / static_cast<double>(config_.window);
}

Eigen::MatrixXd PostProcessor::one_hot_buffer() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(arm_buffer_.size()), n_classes_);
  for (std::size_t r = 0; r < arm_buffer_.size(); ++r) out(static_cast<Eigen::Index>(r), arm_buffer_[r]) = 1.0;
  return out;
}

std::vector<std::pair<std::size_t, int>> run_frames(PostProcessor& pp,
                                                    const std::vector<GateFrame>& frames) {
  std::vector<std::pair<std::size_t, int>> out;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (auto c = pp.step(frames[i].arm, frames[i].prob)) out.emplace_back(i, *c);
  return out;
}

}  // namespace gmab
