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

// Stand-in for the frozen population model: a synthetic embedding geometry
// with a fixed linear softmax head, plus per-user distortions of that
// geometry and a newline-delimited JSON replay format for recorded frames.

#include <Eigen/Dense>

#include <cstdint>
#include <fstream>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gmab/bandit.hpp"  // DimensionError

namespace gmab {

using Rng = std::mt19937_64;

// SplitMix64 finaliser; derives independent stream seeds from (seed, salt).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

enum class Phase { rest = 0, active = 1 };

struct Frame {
  Eigen::VectorXd embedding;
  Eigen::VectorXd prob;
  int label = -1;  // intended gesture, -1 when unknown or at rest
  Phase phase = Phase::rest;
};

// Frozen classification layer: prob = softmax((W e + bias) / T) scaled by a
// logistic activity factor of ||e - rest_mean||, so rest frames carry little
// total probability mass.
struct PopulationHead {
  Eigen::MatrixXd weights;  // N x d
  Eigen::VectorXd bias;     // N
  double temperature = 1.0;
  Eigen::VectorXd rest_mean;
  double activity_radius = 1.0;
  double activity_slope = 1.0;

  int dim() const { return static_cast<int>(weights.cols()); }
  int n_classes() const { return static_cast<int>(weights.rows()); }
  double activity(const Eigen::Ref<const Eigen::VectorXd>& e) const;
  Eigen::VectorXd probabilities(const Eigen::Ref<const Eigen::VectorXd>& e) const;
  int predict(const Eigen::Ref<const Eigen::VectorXd>& e) const;
};

struct GesturePrototypes {
  Eigen::MatrixXd means;      // d x N, one class centre per column
  Eigen::MatrixXd basis;      // d x N orthonormal class directions
  double radius = 2.0;        // ||mean_g - rest_mean||
  double covariance_scale = 0.35;  // per-coordinate std of active frames
  double rest_scale = 0.1;         // per-coordinate std of rest frames
  Eigen::VectorXd rest_mean;

  int dim() const { return static_cast<int>(means.rows()); }
  int n_classes() const { return static_cast<int>(means.cols()); }
};

struct Population {
  PopulationHead head;
  GesturePrototypes prototypes;
};

// Builds prototypes and a head that classifies undistorted prototype frames
// with per-frame accuracy >= 0.95 (checked on 10k frames before returning).
// Requires d >= N >= 2.
Population synth_population(std::uint64_t seed, int dim, int n_classes);

// User-specific distortion: e_user = rest + gain * Q (x - rest) + bias_shift,
// with active/rest noise multiplied by noise_scale. Q is orthogonal.
struct UserPerturbation {
  Eigen::MatrixXd rotation;
  double gain = 1.0;
  Eigen::VectorXd bias_shift;
  double noise_scale = 1.0;
  double severity = 0.0;

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& x,
                        const Eigen::Ref<const Eigen::VectorXd>& rest_mean) const;
};

UserPerturbation identity_user(int dim);

// Severity in [0, 1]. Classes are paired and each pair's directions are
// rotated towards each other by up to ~90 degrees (per-pair factor drawn from
// the user seed), on top of a small generic rotation, gain loss, offset and
// extra noise that all grow with severity. The pairing, angles and offsets
// depend only on `user_seed`, so severity sweeps one user along one path.
UserPerturbation make_user(std::uint64_t user_seed, const GesturePrototypes& prototypes,
                           double severity);

struct BurstShape {
  int rest_before = 0;
  int active = 1;
  int rest_after = 0;
};

Frame rest_frame(const Population& pop, const UserPerturbation& user, Rng& rng);
Frame active_frame(const Population& pop, const UserPerturbation& user, int gesture, Rng& rng);

// rest_before rest frames, `active` frames of `gesture`, rest_after rest frames.
std::vector<Frame> gesture_burst(const Population& pop, const UserPerturbation& user, int gesture,
                                 Rng& rng, const BurstShape& shape);

// Fraction of active frames whose head argmax equals the intended gesture,
// over `n_frames` frames with uniformly drawn gestures.
double measure_accuracy(const Population& pop, const UserPerturbation& user, int n_frames,
                        std::uint64_t seed);

// --- replay files ---------------------------------------------------------

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReplayHeader {
  int version = 1;
  int dim = 0;
  int n_classes = 0;
  double frame_rate = 25.0;
  std::optional<long long> frames;  // optional declared count, checked at end
  std::optional<std::vector<int>> path;  // game path the frames were played against
};

class ReplayWriter {
 public:
  ReplayWriter(const std::string& path, const ReplayHeader& header);
  void write(const Frame& frame);
  void close();
  long long written() const { return written_; }

 private:
  std::ofstream out_;
  ReplayHeader header_;
  long long written_ = 0;
};

class ReplayStream {
 public:
  // expected_dim / expected_classes <= 0 disable the respective check.
  static ReplayStream open(const std::string& path, int expected_dim = 0, int expected_classes = 0);

  const ReplayHeader& header() const { return header_; }
  std::optional<Frame> next();
  long long read() const { return read_; }

 private:
  ReplayStream() = default;
  std::ifstream in_;
  std::string path_;
  ReplayHeader header_;
  long long read_ = 0;
  long long line_ = 1;
};

inline ReplayStream replay_open(const std::string& path, int expected_dim = 0,
                                int expected_classes = 0) {
  return ReplayStream::open(path, expected_dim, expected_classes);
}
inline std::optional<Frame> replay_next(ReplayStream& stream) { return stream.next(); }

void write_replay(const std::string& path, const ReplayHeader& header,
                  const std::vector<Frame>& frames);

}  // namespace gmab
