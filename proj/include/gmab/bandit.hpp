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

// Contextual bandit over frozen population-model embeddings.
//
// Each gesture class is an arm with a unit-ridge linear reward model
// (A_i, b_i). A frame's score for arm i is
//
//   p_i = prob_i + theta_i . e + alpha * sqrt(e^T A_i^{-1} e),  theta_i = A_i^{-1} b_i
//
// so the population probabilities act as a warm start and the bandit terms
// learn the user-specific correction. Rewards are sparse and delayed: when
// one arrives it is credited to the most recent `credit_window` pulls, each
// pull at most once.
//
// A_i^{-1} is maintained with Sherman-Morrison rank-one updates and rebuilt
// from A_i by a Cholesky solve every `recompute_interval` updates of that arm.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmab {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class RewardSource { system_advance, user_report };

// r = +1 when the previous gesture advanced the game, -1 when the user
// reported an undetected gesture. No other values exist.
struct RewardSignal {
  int value;
  RewardSource source;

  static constexpr RewardSignal advance() { return {+1, RewardSource::system_advance}; }
  static constexpr RewardSignal report() { return {-1, RewardSource::user_report}; }
};

template <typename Scalar>
struct ArmState {
  MatrixX<Scalar> A;
  MatrixX<Scalar> A_inv;
  VectorX<Scalar> b;
  VectorX<Scalar> theta;  // A_inv * b, refreshed on every update
  std::size_t updates_since_recompute = 0;

  explicit ArmState(Eigen::Index dim)
      : A(MatrixX<Scalar>::Identity(dim, dim)),
        A_inv(MatrixX<Scalar>::Identity(dim, dim)),
        b(VectorX<Scalar>::Zero(dim)),
        theta(VectorX<Scalar>::Zero(dim)) {}
};

template <typename Scalar>
struct PullRecord {
  std::uint64_t step;
  int arm;
  VectorX<Scalar> embedding;
};

struct BanditConfig {
  int dim = 64;
  int n_arms = 6;
  double alpha = 1.0;
  int credit_window = 1;
  int recompute_interval = 256;
};

template <typename Scalar>
class BanditModel {
 public:
  using Vector = VectorX<Scalar>;
  using Matrix = MatrixX<Scalar>;

  BanditModel(int dim, int n_arms, Scalar alpha, int credit_window,
              int recompute_interval = 256)
      : dim_(dim),
        alpha_(alpha),
        credit_window_(credit_window),
        recompute_interval_(recompute_interval) {
    if (dim < 1) throw DimensionError("bandit dimension must be >= 1, got " + std::to_string(dim));
    if (n_arms < 2) throw DimensionError("bandit needs >= 2 arms, got " + std::to_string(n_arms));
    if (!(alpha >= Scalar(0)) || !std::isfinite(static_cast<double>(alpha)))
      throw std::invalid_argument("alpha must be finite and >= 0");
    if (credit_window < 1) throw std::invalid_argument("credit_window must be >= 1");
    if (recompute_interval < 1) throw std::invalid_argument("recompute_interval must be >= 1");
    arms_.assign(static_cast<std::size_t>(n_arms), ArmState<Scalar>(dim));
  }

  BanditModel() : BanditModel(BanditConfig{}) {}

  explicit BanditModel(const BanditConfig& cfg)
      : BanditModel(cfg.dim, cfg.n_arms, static_cast<Scalar>(cfg.alpha), cfg.credit_window,
                    cfg.recompute_interval) {}

  int dim() const { return dim_; }
  int n_arms() const { return static_cast<int>(arms_.size()); }
  Scalar alpha() const { return alpha_; }
  int credit_window() const { return credit_window_; }
  int recompute_interval() const { return recompute_interval_; }
  std::uint64_t step() const { return step_; }

  const std::vector<ArmState<Scalar>>& arms() const { return arms_; }
  const ArmState<Scalar>& arm(int i) const {
    check_arm(i);
    return arms_[static_cast<std::size_t>(i)];
  }
  const std::deque<PullRecord<Scalar>>& history() const { return history_; }

  void check_arm(int i) const {
    if (i < 0 || i >= n_arms())
      throw std::out_of_range("arm index " + std::to_string(i) + " outside [0, " +
                              std::to_string(n_arms()) + ")");
  }

  // Mutable access for the free functions below and for snapshot restore.
  std::vector<ArmState<Scalar>>& mutable_arms() { return arms_; }
  std::deque<PullRecord<Scalar>>& mutable_history() { return history_; }
  void advance_step() { ++step_; }

 private:
  int dim_;
  Scalar alpha_;
  int credit_window_;
  int recompute_interval_;
  std::uint64_t step_ = 0;
  std::vector<ArmState<Scalar>> arms_;
  std::deque<PullRecord<Scalar>> history_;  // newest at back, size <= credit_window_
};

template <typename Scalar>
struct PullResult {
  int arm;
  VectorX<Scalar> scores;
};

namespace detail {

template <typename Scalar, typename EmbeddingT, typename ProbT>
void check_inputs(const BanditModel<Scalar>& model, const Eigen::MatrixBase<EmbeddingT>& e,
                  const Eigen::MatrixBase<ProbT>& prob) {
  if (e.size() != model.dim())
    throw DimensionError("embedding has length " + std::to_string(e.size()) +
                         ", model expects " + std::to_string(model.dim()));
  if (prob.size() != model.n_arms())
    throw DimensionError("probability vector has length " + std::to_string(prob.size()) +
                         ", model expects " + std::to_string(model.n_arms()));
  if (!e.allFinite()) throw std::domain_error("embedding contains non-finite values");
  for (Eigen::Index i = 0; i < prob.size(); ++i) {
    const Scalar p = prob(i);
    if (!(p >= Scalar(0) && p <= Scalar(1)))
      throw std::domain_error("probability entries must lie in [0, 1]");
  }
}

template <typename Scalar>
void recompute_inverse(ArmState<Scalar>& arm) {
  const Eigen::Index d = arm.A.rows();
  MatrixX<Scalar> inv = arm.A.llt().solve(MatrixX<Scalar>::Identity(d, d));
  arm.A_inv = (inv + inv.transpose()) * Scalar(0.5);
  arm.updates_since_recompute = 0;
}

}  // namespace detail

// Upper-confidence width sqrt(e^T A_i^{-1} e), without the alpha factor.
template <typename Scalar, typename EmbeddingT>
Scalar uncertainty(const ArmState<Scalar>& arm, const Eigen::MatrixBase<EmbeddingT>& e) {
  const Scalar quad = e.dot(arm.A_inv * e);
  return std::sqrt(std::max(quad, Scalar(0)));
}

// p_{t,i} for every arm. Pure.
template <typename Scalar, typename EmbeddingT, typename ProbT>
VectorX<Scalar> score(const BanditModel<Scalar>& model, const Eigen::MatrixBase<EmbeddingT>& e,
                      const Eigen::MatrixBase<ProbT>& prob) {
  detail::check_inputs(model, e, prob);
  VectorX<Scalar> scores(model.n_arms());
  for (int i = 0; i < model.n_arms(); ++i) {
    const auto& arm = model.arms()[static_cast<std::size_t>(i)];
    scores(i) = prob(i) + arm.theta.dot(e) + model.alpha() * uncertainty(arm, e);
  }
  return scores;
}

// Lowest index wins ties.
template <typename Scalar>
int argmax_lowest(const VectorX<Scalar>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

// Scores every arm, picks the argmax and records the pull so a later reward
// can be credited to it.
template <typename Scalar, typename EmbeddingT, typename ProbT>
PullResult<Scalar> pull(BanditModel<Scalar>& model, const Eigen::MatrixBase<EmbeddingT>& e,
                        const Eigen::MatrixBase<ProbT>& prob) {
  PullResult<Scalar> result{0, score(model, e, prob)};
  result.arm = argmax_lowest(result.scores);
  auto& history = model.mutable_history();
  if (static_cast<int>(history.size()) == model.credit_window()) history.pop_front();
  history.push_back(PullRecord<Scalar>{model.step(), result.arm, VectorX<Scalar>(e)});
  model.advance_step();
  return result;
}

// A += e e^T, b += r e, with the cached inverse kept in step.
template <typename Scalar, typename EmbeddingT>
void rank_one_update(ArmState<Scalar>& arm, const Eigen::MatrixBase<EmbeddingT>& e, Scalar reward,
                     int recompute_interval) {
  const VectorX<Scalar> u = arm.A_inv * e;
  const Scalar denom = Scalar(1) + e.dot(u);
  arm.A_inv.noalias() -= (u * u.transpose()) / denom;
  arm.A.noalias() += e * e.transpose();
  arm.b.noalias() += reward * e;
  if (++arm.updates_since_recompute >= static_cast<std::size_t>(recompute_interval))
    detail::recompute_inverse(arm);
  arm.theta.noalias() = arm.A_inv * arm.b;
}

// Credits `r` to the most recent min(credit_window, |history|) pulls, newest
// first, and evicts them. Returns the number of records credited.
template <typename Scalar>
int apply_reward(BanditModel<Scalar>& model, const RewardSignal& r) {
  if (r.value != 1 && r.value != -1) throw std::invalid_argument("reward must be +1 or -1");
  auto& history = model.mutable_history();
  auto& arms = model.mutable_arms();
  int credited = 0;
  while (!history.empty() && credited < model.credit_window()) {
    const PullRecord<Scalar>& rec = history.back();
    rank_one_update(arms[static_cast<std::size_t>(rec.arm)], rec.embedding,
                    static_cast<Scalar>(r.value), model.recompute_interval());
    history.pop_back();
    ++credited;
  }
  return credited;
}

template <typename Scalar>
VectorX<Scalar> theta(const BanditModel<Scalar>& model, int arm) {
  return model.arm(arm).A_inv * model.arm(arm).b;
}

// max |A A_inv - I| over all arms.
template <typename Scalar>
Scalar inverse_residual(const BanditModel<Scalar>& model) {
  Scalar worst = 0;
  for (const auto& arm : model.arms()) {
    const auto d = arm.A.rows();
    worst = std::max(worst, (arm.A * arm.A_inv - MatrixX<Scalar>::Identity(d, d)).cwiseAbs().maxCoeff());
  }
  return worst;
}

extern template class BanditModel<double>;

}  // namespace gmab
