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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gmab/harness.hpp"

namespace gmab {

namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc()) throw std::invalid_argument("rounds.csv: bad number '" + s + "'");
  return v;
}

void mean_se(const std::vector<double>& xs, double& mean, double& se) {
  mean = se = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  se = std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace

std::string rounds_csv(const ProtocolResult& result) {
  std::ostringstream out;
  out << "user,round,gesture,first_k_precision,last_k_precision,delta,fnr,completed\n";
  for (const auto& u : result.users) {
    for (const auto& r : u.reports) {
      for (const auto& g : r.gestures) {
        out << r.user << ',' << r.round << ',' << gesture_name(g.gesture) << ','
            << opt(g.first_k) << ',' << opt(g.last_k) << ',' << opt(g.delta) << ',' << num(r.fnr) << ','
            << (r.completed ? 1 : 0) << '\n';
      }
    }
  }
  return out.str();
}

void write_outputs(const std::string& dir, const ExperimentConfig& cfg, const ProtocolResult& result) {
  const fs::path root(dir);
  fs::create_directories(root / "events");
  write_text(root / "rounds.csv", rounds_csv(result));

  std::ostringstream series;
  series << "user,round,point,precision\n";
  std::ostringstream users;
  users << "user,seed,severity,baseline_accuracy\n";
  for (const auto& u : result.users) {
    users << u.user.id << ',' << u.user.seed << ',' << num(u.user.severity) << ','
          << num(u.user.baseline_accuracy) << '\n';
    for (const auto& r : u.reports)
      for (std::size_t i = 0; i < r.five_trial_series.size(); ++i)
        series << r.user << ',' << r.round << ',' << i << ',' << opt(r.five_trial_series[i]) << '\n';
    for (std::size_t i = 0; i < u.rounds.size(); ++i) {
      const fs::path path =
          root / "events" / (std::to_string(u.user.id) + "_" + u.reports[i].round + ".ndjson");
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path.string());
      write_event_log(out, u.rounds[i].events);
    }
  }
  write_text(root / "series.csv", series.str());
  write_text(root / "users.csv", users.str());

  std::vector<std::string> order;
  for (const auto& r : cfg.rounds) order.push_back(r.name);
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& a : aggregate(result.reports(), order)) {
    rounds.push_back({{"round", a.round},
                      {"users", a.users},
                      {"mean_delta", a.mean_delta},
                      {"se_delta", a.se_delta},
                      {"users_with_delta", a.users_with_delta},
                      {"mean_fnr", a.mean_fnr},
                      {"se_fnr", a.se_fnr},
                      {"completion_rate", a.completion_rate}});
  }
  nlohmann::json summary = {{"config", config_to_json(cfg)},
                            {"rounds", rounds},
                            {"warnings", result.warnings}};
  write_text(root / "summary.json", summary.dump(2) + "\n");
}

std::vector<RoundAggregate> aggregate(const std::vector<MetricsReport>& reports,
                                      const std::vector<std::string>& round_order) {
  std::vector<RoundAggregate> out;
  for (const auto& name : round_order) {
    std::vector<double> deltas, fnrs;
    int completed = 0;
    for (const auto& r : reports) {
      if (r.round != name) continue;
      if (r.mean_delta) deltas.push_back(*r.mean_delta);
      fnrs.push_back(r.fnr);
      completed += r.completed ? 1 : 0;
    }
    RoundAggregate a;
    a.round = name;
    a.users = static_cast<int>(fnrs.size());
    a.users_with_delta = static_cast<int>(deltas.size());
    mean_se(deltas, a.mean_delta, a.se_delta);
    mean_se(fnrs, a.mean_fnr, a.se_fnr);
    a.completion_rate = a.users ? static_cast<double>(completed) / a.users : 0.0;
    out.push_back(a);
  }
  return out;
}

std::vector<RoundAggregate> aggregate_csv(const std::string& dir) {
  const fs::path path = fs::path(dir) / "rounds.csv";
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("user,round,gesture", 0) != 0) throw std::invalid_argument(path.string() + ": unexpected header");

  // (user, round) -> report rebuilt from per-gesture rows
  std::map<std::pair<int, std::string>, MetricsReport> by_key;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split(line);
    if (c.size() != 8) throw std::invalid_argument(path.string() + ": expected 8 columns in '" + line + "'");
    const int user = std::stoi(c[0]);
    auto [it, fresh] = by_key.try_emplace({user, c[1]});
    auto& r = it->second;
    if (fresh) {
      r.user = user;
      r.round = c[1];
      r.fnr = parse_opt(c[6]).value_or(0.0);
      r.completed = c[7] == "1";
      if (std::find(order.begin(), order.end(), c[1]) == order.end()) order.push_back(c[1]);
    }
    GestureMetrics g;
    const auto gesture = gesture_from_name(c[2]);
    if (!gesture) throw std::invalid_argument(path.string() + ": unknown gesture '" + c[2] + "'");
    g.gesture = *gesture;
    g.first_k = parse_opt(c[3]);
    g.last_k = parse_opt(c[4]);
    g.delta = parse_opt(c[5]);
    r.gestures.push_back(g);
  }
  std::vector<MetricsReport> reports;
  for (auto& [key, r] : by_key) {
    double sum = 0.0;
    int n = 0;
    for (const auto& g : r.gestures)
      if (g.delta) {
        sum += *g.delta;
        ++n;
      }
    if (n > 0) r.mean_delta = sum / n;
    reports.push_back(std::move(r));
  }
  return aggregate(reports, order);
}

}  // namespace gmab
