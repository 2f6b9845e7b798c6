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

// Versioned JSON persistence for BanditModel.
//
//   {"version": 1, "d": .., "n_arms": .., "alpha": ..,
//    "arms": [{"A": [row-major d*d], "b": [d], "A_inv": [d*d], "updates_since_recompute": k}]}
//
// "A_inv" and "updates_since_recompute" are optional on read; when present
// they make a restored model score bit-identically to the one that was saved.
// "credit_window" and "recompute_interval" are written as well and default to
// 1 and 256 when absent. Pull history is not persisted: rewards never span
// sessions.

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gmab/bandit.hpp"
#include "json.hpp"

namespace gmab {

inline constexpr int kSnapshotVersion = 1;

class SnapshotError : public std::runtime_error {
 public:
  enum class Kind { version_mismatch, corrupt_document, io };

  SnapshotError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

template <typename Derived>
nlohmann::json row_major(const Eigen::MatrixBase<Derived>& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(static_cast<double>(m(r, c)));
  return out;
}

template <typename Scalar>
MatrixX<Scalar> read_matrix(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                            const char* field) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows * cols)
    throw SnapshotError(SnapshotError::Kind::corrupt_document,
                        std::string("snapshot field '") + field + "' has wrong shape");
  MatrixX<Scalar> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = j[static_cast<std::size_t>(r * cols + c)];
      if (!v.is_number())
        throw SnapshotError(SnapshotError::Kind::corrupt_document,
                            std::string("snapshot field '") + field + "' holds a non-number");
      const double x = v.get<double>();
      if (!std::isfinite(x))
        throw SnapshotError(SnapshotError::Kind::corrupt_document,
                            std::string("snapshot field '") + field + "' holds a non-finite value");
      m(r, c) = static_cast<Scalar>(x);
    }
  }
  return m;
}

}  // namespace detail

template <typename Scalar>
nlohmann::json to_json(const BanditModel<Scalar>& model) {
  nlohmann::json doc;
  doc["version"] = kSnapshotVersion;
  doc["d"] = model.dim();
  doc["n_arms"] = model.n_arms();
  doc["alpha"] = static_cast<double>(model.alpha());
  doc["credit_window"] = model.credit_window();
  doc["recompute_interval"] = model.recompute_interval();
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& arm : model.arms()) {
    arms.push_back({{"A", detail::row_major(arm.A)},
                    {"b", detail::row_major(arm.b)},
                    {"A_inv", detail::row_major(arm.A_inv)},
                    {"updates_since_recompute", arm.updates_since_recompute}});
  }
  doc["arms"] = std::move(arms);
  return doc;
}

template <typename Scalar>
std::string snapshot(const BanditModel<Scalar>& model) {
  return to_json(model).dump();
}

template <typename Scalar = double>
BanditModel<Scalar> from_json(const nlohmann::json& doc) {
  using Kind = SnapshotError::Kind;
  try {
    if (!doc.is_object()) throw SnapshotError(Kind::corrupt_document, "snapshot is not an object");
    if (!doc.contains("version") || !doc["version"].is_number_integer())
      throw SnapshotError(Kind::corrupt_document, "snapshot has no integer version");
    const int version = doc["version"].get<int>();
    if (version != kSnapshotVersion)
      throw SnapshotError(Kind::version_mismatch, "snapshot version " + std::to_string(version) +
                                                      " unsupported (expected " +
                                                      std::to_string(kSnapshotVersion) + ")");
    const int d = doc.at("d").get<int>();
    const int n = doc.at("n_arms").get<int>();
    const double alpha = doc.at("alpha").get<double>();
    const int window = doc.value("credit_window", 1);
    const int interval = doc.value("recompute_interval", 256);
    const auto& arms_doc = doc.at("arms");
    if (!arms_doc.is_array() || static_cast<int>(arms_doc.size()) != n)
      throw SnapshotError(Kind::corrupt_document, "snapshot arm count does not match n_arms");

    BanditModel<Scalar> model(d, n, static_cast<Scalar>(alpha), window, interval);
    auto& arms = model.mutable_arms();
    for (int i = 0; i < n; ++i) {
      const auto& a = arms_doc[static_cast<std::size_t>(i)];
      auto& arm = arms[static_cast<std::size_t>(i)];
      arm.A = detail::read_matrix<Scalar>(a.at("A"), d, d, "A");
      arm.b = detail::read_matrix<Scalar>(a.at("b"), d, 1, "b");
      if (arm.A != arm.A.transpose())
        throw SnapshotError(Kind::corrupt_document, "snapshot matrix A is not symmetric");
      if (a.contains("A_inv")) {
        arm.A_inv = detail::read_matrix<Scalar>(a["A_inv"], d, d, "A_inv");
        arm.updates_since_recompute = a.value("updates_since_recompute", std::size_t{0});
      } else {
        if (arm.A.llt().info() != Eigen::Success)
          throw SnapshotError(Kind::corrupt_document, "snapshot matrix A is not positive definite");
        detail::recompute_inverse(arm);
      }
      arm.theta.noalias() = arm.A_inv * arm.b;
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotError(Kind::corrupt_document, std::string("malformed snapshot: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw SnapshotError(Kind::corrupt_document, std::string("invalid snapshot: ") + e.what());
  }
}

template <typename Scalar = double>
BanditModel<Scalar> restore(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SnapshotError(SnapshotError::Kind::corrupt_document,
                        std::string("snapshot is not valid JSON: ") + e.what());
  }
  return from_json<Scalar>(doc);
}

// Writes to `path` atomically (temporary file, then rename).
void save_snapshot_file(const std::string& path, const std::string& document);
std::string load_snapshot_file(const std::string& path);

}  // namespace gmab
