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

#include "gmab/context_source.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "gmab/bandit.hpp"
#include "json.hpp"

namespace gmab {

namespace {

constexpr double kRadius = 2.0;
constexpr double kActiveNoise = 0.35;
constexpr double kRestNoise = 0.1;
constexpr double kRestOffset = 0.2;
constexpr double kLogitScale = 3.0;
constexpr double kMinAccuracy = 0.95;

Eigen::VectorXd gaussian_vector(int n, double scale, Rng& rng) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Eigen::VectorXd unit_vector(int n, Rng& rng) {
  Eigen::VectorXd v = gaussian_vector(n, 1.0, rng);
  return v / v.norm();
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double PopulationHead::activity(const Eigen::Ref<const Eigen::VectorXd>& e) const {
  const double r = (e - rest_mean).norm();
  return 1.0 / (1.0 + std::exp(-activity_slope * (r - activity_radius)));
}

Eigen::VectorXd PopulationHead::probabilities(const Eigen::Ref<const Eigen::VectorXd>& e) const {
  if (e.size() != dim())
    throw DimensionError("embedding has length " + std::to_string(e.size()) + ", head expects " +
                         std::to_string(dim()));
  Eigen::VectorXd logits = (weights * e + bias) / temperature;
  logits.array() -= logits.maxCoeff();
  Eigen::VectorXd p = logits.array().exp();
  p /= p.sum();
  return p * activity(e);
}

int PopulationHead::predict(const Eigen::Ref<const Eigen::VectorXd>& e) const {
  const Eigen::VectorXd logits = weights * e + bias;
  Eigen::Index best = 0;
  logits.maxCoeff(&best);
  return static_cast<int>(best);
}

Population synth_population(std::uint64_t seed, int dim, int n_classes) {
  if (n_classes < 2) throw DimensionError("population needs >= 2 classes");
  if (dim < n_classes)
    throw DimensionError("population embedding dimension " + std::to_string(dim) +
                         " is smaller than the class count " + std::to_string(n_classes));
  Rng rng(mix_seed(seed, 0x706f70));

  Eigen::MatrixXd g(dim, dim);
  for (int c = 0; c < dim; ++c) g.col(c) = gaussian_vector(dim, 1.0, rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);

  Population pop;
  auto& proto = pop.prototypes;
  proto.basis = q.leftCols(n_classes);
  // Rest centre sits off the class directions so it does not bias the head.
  Eigen::VectorXd off = dim > n_classes ? Eigen::VectorXd(q.col(n_classes))
                                        : unit_vector(dim, rng);
  proto.rest_mean = kRestOffset * off;
  proto.radius = kRadius;
  proto.covariance_scale = kActiveNoise;
  proto.rest_scale = kRestNoise;
  proto.means = (kRadius * proto.basis).colwise() + proto.rest_mean;

  auto& head = pop.head;
  head.weights = kLogitScale * proto.basis.transpose();
  head.bias = -(head.weights * proto.rest_mean);
  head.temperature = 1.0;
  head.rest_mean = proto.rest_mean;
  const double rest_norm = kRestNoise * std::sqrt(static_cast<double>(dim));
  const double active_norm =
      std::sqrt(kRadius * kRadius + kActiveNoise * kActiveNoise * static_cast<double>(dim));
  head.activity_radius = 0.5 * (rest_norm + active_norm);
  head.activity_slope = 8.0 / (active_norm - rest_norm);

  const double acc = measure_accuracy(pop, identity_user(dim), 10000, mix_seed(seed, 0x636865636b));
  if (acc < kMinAccuracy)
    throw std::runtime_error("synthetic population failed its accuracy self-check (" +
                             std::to_string(acc) + ")");
  return pop;
}

Eigen::VectorXd UserPerturbation::apply(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        const Eigen::Ref<const Eigen::VectorXd>& rest_mean) const {
  return rest_mean + gain * (rotation * (x - rest_mean)) + bias_shift;
}

UserPerturbation identity_user(int dim) {
  UserPerturbation u;
  u.rotation = Eigen::MatrixXd::Identity(dim, dim);
  u.bias_shift = Eigen::VectorXd::Zero(dim);
  return u;
}

UserPerturbation make_user(std::uint64_t user_seed, const GesturePrototypes& prototypes,
                           double severity) {
  if (!(severity >= 0.0 && severity <= 1.0))
    throw std::invalid_argument("severity must lie in [0, 1]");
  const int d = prototypes.dim();
  const int n = prototypes.n_classes();
  Rng rng(mix_seed(user_seed, 0x75736572));

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  // Skew-symmetric generator; the Cayley transform of t * (u_h u_g^T - u_g u_h^T)
  // rotates the (u_g, u_h) plane by 2 atan(t).
  Eigen::MatrixXd skew = Eigen::MatrixXd::Zero(d, d);
  std::uniform_real_distribution<double> pair_weight(0.6, 1.0);
  for (int k = 0; k + 1 < n; k += 2) {
    const auto ug = prototypes.basis.col(order[static_cast<std::size_t>(k)]);
    const auto uh = prototypes.basis.col(order[static_cast<std::size_t>(k + 1)]);
    const double angle = severity * pair_weight(rng) * std::numbers::pi / 2.0;
    const double t = std::tan(angle / 2.0);
    skew += t * (uh * ug.transpose() - ug * uh.transpose());
  }
  Eigen::MatrixXd generic(d, d);
  for (int c = 0; c < d; ++c) generic.col(c) = gaussian_vector(d, 1.0, rng);
  skew += (0.1 * severity / std::sqrt(static_cast<double>(d))) *
          (generic - generic.transpose()) * 0.5;

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  UserPerturbation u;
  u.rotation = (id - skew).partialPivLu().solve(id + skew);
  u.gain = 1.0 - 0.15 * severity;
  u.bias_shift = (0.25 * prototypes.radius * severity) * unit_vector(d, rng);
  u.noise_scale = 1.0 + 0.5 * severity;
  u.severity = severity;
  return u;
}

Frame rest_frame(const Population& pop, const UserPerturbation& user, Rng& rng) {
  const auto& proto = pop.prototypes;
  const Eigen::VectorXd x =
      proto.rest_mean + gaussian_vector(proto.dim(), proto.rest_scale * user.noise_scale, rng);
  Frame f;
  f.embedding = user.apply(x, proto.rest_mean);
  f.prob = pop.head.probabilities(f.embedding);
  f.label = -1;
  f.phase = Phase::rest;
  return f;
}

Frame active_frame(const Population& pop, const UserPerturbation& user, int gesture, Rng& rng) {
  const auto& proto = pop.prototypes;
  if (gesture < 0 || gesture >= proto.n_classes())
    throw std::out_of_range("gesture index " + std::to_string(gesture) + " out of range");
  const Eigen::VectorXd x =
      proto.means.col(gesture) +
      gaussian_vector(proto.dim(), proto.covariance_scale * user.noise_scale, rng);
  Frame f;
  f.embedding = user.apply(x, proto.rest_mean);
  f.prob = pop.head.probabilities(f.embedding);
  f.label = gesture;
  f.phase = Phase::active;
  return f;
}

std::vector<Frame> gesture_burst(const Population& pop, const UserPerturbation& user, int gesture,
                                 Rng& rng, const BurstShape& shape) {
  if (gesture < 0 || gesture >= pop.prototypes.n_classes())
    throw std::out_of_range("gesture index " + std::to_string(gesture) + " out of range");
  if (shape.rest_before < 0 || shape.active < 1 || shape.rest_after < 0)
    throw std::invalid_argument("burst shape needs >= 1 active frame and non-negative rest");
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(shape.rest_before + shape.active + shape.rest_after));
  for (int i = 0; i < shape.rest_before; ++i) frames.push_back(rest_frame(pop, user, rng));
  for (int i = 0; i < shape.active; ++i) frames.push_back(active_frame(pop, user, gesture, rng));
  for (int i = 0; i < shape.rest_after; ++i) frames.push_back(rest_frame(pop, user, rng));
  return frames;
}

double measure_accuracy(const Population& pop, const UserPerturbation& user, int n_frames,
                        std::uint64_t seed) {
  if (n_frames < 1) throw std::invalid_argument("n_frames must be >= 1");
  Rng rng(seed);
  std::uniform_int_distribution<int> pick(0, pop.prototypes.n_classes() - 1);
  int correct = 0;
  for (int i = 0; i < n_frames; ++i) {
    const int g = pick(rng);
    const Frame f = active_frame(pop, user, g, rng);
    if (pop.head.predict(f.embedding) == g) ++correct;
  }
  return static_cast<double>(correct) / n_frames;
}

// --- replay -----------------------------------------------------------------

namespace {

nlohmann::json frame_to_json(const Frame& f) {
  return {{"e", std::vector<double>(f.embedding.data(), f.embedding.data() + f.embedding.size())},
          {"prob", std::vector<double>(f.prob.data(), f.prob.data() + f.prob.size())},
          {"label", f.label},
          {"phase", static_cast<int>(f.phase)}};
}

Eigen::VectorXd read_vector(const nlohmann::json& j, int expected, const char* field,
                            const std::string& where) {
  if (!j.is_array()) throw ReplayError(where + ": field '" + field + "' is not an array");
  if (static_cast<int>(j.size()) != expected)
    throw ReplayError(where + ": field '" + field + "' has " + std::to_string(j.size()) +
                      " values, header declares " + std::to_string(expected));
  Eigen::VectorXd v(expected);
  for (int i = 0; i < expected; ++i) {
    const auto& x = j[static_cast<std::size_t>(i)];
    if (!x.is_number()) throw ReplayError(where + ": field '" + field + "' holds a non-number");
    v(i) = x.get<double>();
  }
  return v;
}

}  // namespace

ReplayWriter::ReplayWriter(const std::string& path, const ReplayHeader& header)
    : out_(path, std::ios::trunc), header_(header) {
  if (!out_) throw ReplayError("cannot open replay file for writing: " + path);
  nlohmann::json h = {{"version", header.version},
                      {"d", header.dim},
                      {"N", header.n_classes},
                      {"frame_rate", header.frame_rate}};
  if (header.frames) h["frames"] = *header.frames;
  if (header.path) h["path"] = *header.path;
  out_ << h.dump() << '\n';
}

void ReplayWriter::write(const Frame& frame) {
  if (frame.embedding.size() != header_.dim || frame.prob.size() != header_.n_classes)
    throw ReplayError("frame dimensions do not match replay header");
  out_ << frame_to_json(frame).dump() << '\n';
  ++written_;
}

void ReplayWriter::close() {
  out_.flush();
  out_.close();
}

ReplayStream ReplayStream::open(const std::string& path, int expected_dim, int expected_classes) {
  ReplayStream s;
  s.path_ = path;
  s.in_.open(path);
  if (!s.in_) throw ReplayError("replay file not found: " + path);
  std::string line;
  if (!std::getline(s.in_, line)) throw ReplayError(path + ": missing header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
    s.header_.version = h.at("version").get<int>();
    s.header_.dim = h.at("d").get<int>();
    s.header_.n_classes = h.at("N").get<int>();
    s.header_.frame_rate = h.at("frame_rate").get<double>();
    if (h.contains("frames")) s.header_.frames = h["frames"].get<long long>();
    if (h.contains("path")) s.header_.path = h["path"].get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ReplayError(path + ": malformed header: " + e.what());
  }
  if (s.header_.version != 1)
    throw ReplayError(path + ": unsupported replay version " + std::to_string(s.header_.version));
  if (s.header_.dim < 1 || s.header_.n_classes < 2)
    throw ReplayError(path + ": header declares invalid dimensions");
  if (expected_dim > 0 && s.header_.dim != expected_dim)
    throw ReplayError(path + ": embedding dimension mismatch: file has d=" +
                      std::to_string(s.header_.dim) + ", config expects d=" +
                      std::to_string(expected_dim));
  if (expected_classes > 0 && s.header_.n_classes != expected_classes)
    throw ReplayError(path + ": class count mismatch: file has N=" +
                      std::to_string(s.header_.n_classes) + ", config expects N=" +
                      std::to_string(expected_classes));
  return s;
}

std::optional<Frame> ReplayStream::next() {
  std::string line;
  while (true) {
    if (!std::getline(in_, line)) {
      if (header_.frames && read_ != *header_.frames)
        throw ReplayError(path_ + ": truncated: header declares " + std::to_string(*header_.frames) +
                          " frames, found " + std::to_string(read_));
      return std::nullopt;
    }
    ++line_;
    if (!line.empty()) break;
  }
  if (in_.eof())
    throw ReplayError(path_ + ": truncated record at line " + std::to_string(line_));
  const std::string where = path_ + ":" + std::to_string(line_);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ReplayError(where + ": malformed record: " + e.what());
  }
  if (!j.is_object() || !j.contains("e") || !j.contains("prob") || !j.contains("label") ||
      !j.contains("phase"))
    throw ReplayError(where + ": record missing one of e, prob, label, phase");
  Frame f;
  f.embedding = read_vector(j["e"], header_.dim, "e", where);
  f.prob = read_vector(j["prob"], header_.n_classes, "prob", where);
  if (!j["label"].is_number_integer() || !j["phase"].is_number_integer())
    throw ReplayError(where + ": label and phase must be integers");
  f.label = j["label"].get<int>();
  const int phase = j["phase"].get<int>();
  if (phase != 0 && phase != 1) throw ReplayError(where + ": phase must be 0 or 1");
  if (f.label < -1 || f.label >= header_.n_classes) throw ReplayError(where + ": label out of range");
  f.phase = static_cast<Phase>(phase);
  ++read_;
  return f;
}

void write_replay(const std::string& path, const ReplayHeader& header,
                  const std::vector<Frame>& frames) {
  ReplayHeader h = header;
  h.frames = static_cast<long long>(frames.size());
  ReplayWriter w(path, h);
  for (const auto& f : frames) w.write(f);
  w.close();
}

}  // namespace gmab
