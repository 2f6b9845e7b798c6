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

#include <random>

#include "gmab/postprocess.hpp"

using namespace gmab;
using Eigen::VectorXd;

namespace {

// Probability vector with the given total mass, spread evenly.
VectorXd mass(double total, int n = 6) { return VectorXd::Constant(n, total / n); }

PostProcessConfig cfg(double tau_b, double tau_e, int window, int refractory) {
  PostProcessConfig c;
  c.tau_b = tau_b;
  c.tau_e = tau_e;
  c.window = window;
  c.refractory = refractory;
  return c;
}

}  // namespace

TEST(PostProcess, ConsistentBurstEmitsOnThirdFrame) {
  PostProcessor pp(cfg(0.5, 0.6, 3, 3), 6);
  EXPECT_FALSE(pp.step(2, mass(0.9)));
  EXPECT_FALSE(pp.step(2, mass(0.9)));
  const VectorXd m_before = pp.vote_mean();
  EXPECT_DOUBLE_EQ(m_before(2), 2.0 / 3.0);
  const auto e = pp.step(2, mass(0.9));
  ASSERT_TRUE(e);
  EXPECT_EQ(*e, 2);
  EXPECT_TRUE(pp.arm_buffer().empty());
  EXPECT_EQ(pp.refractory_remaining(), 3);
}

TEST(PostProcess, ClosedGateNeverEmits) {
  PostProcessor pp(cfg(0.5, 0.5, 3, 3), 6);
  for (int t = 0; t < 50; ++t) {
    EXPECT_FALSE(pp.step(t % 6, mass(0.1)));
    EXPECT_TRUE(pp.arm_buffer().empty());
  }
}

TEST(PostProcess, AlternatingArmsAreAmbiguous) {
  PostProcessor pp(cfg(0.5, 0.6, 4, 4), 6);
  for (int arm : {1, 2, 1, 2}) EXPECT_FALSE(pp.step(arm, mass(0.9)));
  const VectorXd m = pp.vote_mean();
  EXPECT_DOUBLE_EQ(m(1), 0.5);
  EXPECT_DOUBLE_EQ(m(2), 0.5);
  EXPECT_DOUBLE_EQ(m.sum(), 1.0);
  for (int t = 0; t < 40; ++t) EXPECT_FALSE(pp.step(1 + t % 2, mass(0.9)));
}

TEST(PostProcess, RefractoryBlocksRepeat) {
  PostProcessor pp(cfg(0.5, 0.5, 1, 3), 6);
  EXPECT_TRUE(pp.step(4, mass(0.9)));
  for (int t = 0; t < 3; ++t) EXPECT_FALSE(pp.step(4, mass(0.9))) << t;
  EXPECT_TRUE(pp.step(4, mass(0.9)));
}

TEST(PostProcess, OneHotAndReset) {
  PostProcessor pp(cfg(0.5, 0.9, 3, 1), 6);
  pp.step(0, mass(0.9));
  pp.step(5, mass(0.9));
  const Eigen::MatrixXd oh = pp.one_hot_buffer();
  ASSERT_EQ(oh.rows(), 2);
  EXPECT_EQ(oh(0, 0), 1.0);
  EXPECT_EQ(oh(1, 5), 1.0);
  EXPECT_EQ(oh.sum(), 2.0);
  pp.reset();
  EXPECT_TRUE(pp.arm_buffer().empty());
  EXPECT_TRUE(pp.prob_buffer().empty());
  EXPECT_EQ(pp.refractory_remaining(), 0);
}

TEST(PostProcess, Validation) {
  EXPECT_THROW(PostProcessor(cfg(0.5, 0.5, 0, 1), 6), std::invalid_argument);
  EXPECT_THROW(PostProcessor(cfg(0.5, 0.5, 1, -1), 6), std::invalid_argument);
  EXPECT_THROW(PostProcessor(cfg(-0.1, 0.5, 1, 1), 6), std::invalid_argument);
  PostProcessor pp(cfg(0.5, 0.5, 1, 1), 6);
  EXPECT_THROW(pp.step(6, mass(0.9)), std::out_of_range);
  EXPECT_THROW(pp.step(0, mass(0.9, 5)), std::invalid_argument);
}

// Randomized cases: generated windows, thresholds and frame sequences.
class PostProcessProperties : public ::testing::TestWithParam<int> {};

TEST_P(PostProcessProperties, GateVotesRefractoryAndChunking) {
  std::mt19937_64 rng(GetParam());
  std::uniform_int_distribution<int> w_dist(1, 6), arm_dist(0, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int w = w_dist(rng);
  const int r = w_dist(rng);
  const double tau_b = 0.2 + 0.6 * u(rng);
  const double tau_e = 0.5 + 0.45 * u(rng);
  PostProcessor pp(cfg(tau_b, tau_e, w, r), 6);
  PostProcessor chunked(cfg(tau_b, tau_e, w, r), 6);

  std::vector<GateFrame> frames;
  for (int t = 0; t < 400; ++t) frames.push_back({arm_dist(rng), mass(u(rng))});

  int since_emission = 1 << 20;
  std::vector<std::pair<std::size_t, int>> streamed;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const VectorXd m = pp.vote_mean();
    EXPECT_LE(m.sum(), 1.0 + 1e-12);
    EXPECT_GE(m.minCoeff(), 0.0);
    const auto e = pp.step(frames[t].arm, frames[t].prob);
    ++since_emission;
    if (!e) continue;
    streamed.push_back({t, *e});
    // Gate: some summed probability in the window exceeded tau_b.
    double window_max = 0.0;
    for (std::size_t k = t + 1 - std::min<std::size_t>(t + 1, static_cast<std::size_t>(w)); k <= t; ++k)
      window_max = std::max(window_max, frames[k].prob.sum());
    EXPECT_GT(window_max, tau_b);
    // Strict majority of the last w arms, which are all gate-open frames.
    int votes = 0;
    for (std::size_t k = t + 1 - static_cast<std::size_t>(w); k <= t; ++k) votes += frames[k].arm == *e;
    EXPECT_GT(static_cast<double>(votes) / w, tau_e);
    EXPECT_GT(since_emission, r);
    since_emission = 0;
  }
  // Streaming equivalence under arbitrary re-chunking.
  std::vector<std::pair<std::size_t, int>> pieces;
  std::size_t start = 0;
  while (start < frames.size()) {
    const std::size_t len = std::min<std::size_t>(frames.size() - start, 1 + rng() % 17);
    std::vector<GateFrame> chunk(frames.begin() + static_cast<long>(start),
                                 frames.begin() + static_cast<long>(start + len));
    for (auto [off, cls] : run_frames(chunked, chunk)) pieces.push_back({start + off, cls});
    start += len;
  }
  EXPECT_EQ(pieces, streamed);
}

TEST_P(PostProcessProperties, CleanBurstEmitsOnce) {
  std::mt19937_64 rng(1000 + GetParam());
  std::uniform_int_distribution<int> w_dist(1, 6), arm_dist(0, 5);
  const int w = w_dist(rng);
  const int r = w + static_cast<int>(rng() % static_cast<unsigned>(w + 1));
  const int len = w + static_cast<int>(rng() % static_cast<unsigned>(r - w + 2));  // w..r+1
  PostProcessor pp(cfg(0.5, 0.5, w, r), 6);
  const int arm = arm_dist(rng);
  int emissions = 0;
  for (int t = 0; t < 10; ++t) emissions += pp.step(arm_dist(rng), mass(0.05)).has_value();
  for (int t = 0; t < len; ++t) {
    const auto e = pp.step(arm, mass(0.95));
    if (e) EXPECT_EQ(*e, arm);
    emissions += e.has_value();
  }
  for (int t = 0; t < 3 * w + r; ++t) emissions += pp.step(arm_dist(rng), mass(0.05)).has_value();
  EXPECT_EQ(emissions, 1);
}

INSTANTIATE_TEST_SUITE_P(Seeds, PostProcessProperties, ::testing::Range(1, 101));
