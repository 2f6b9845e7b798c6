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

// Command-line front end: experiments, calibration, replay, reports and the
// live gateway.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "gmab/gateway_server.hpp"
#include "gmab/harness.hpp"
#include "gmab/replay.hpp"
#include "gmab/snapshot.hpp"

namespace {

using namespace gmab;

void print_aggregates(const std::vector<RoundAggregate>& rows) {
  std::printf("%-16s %6s %10s %9s %9s %9s %10s\n", "round", "users", "mean_delta", "se", "mean_fnr", "se",
              "completed");
  for (const auto& a : rows)
    std::printf("%-16s %6d %10.4f %9.4f %9.4f %9.4f %10.3f\n", a.round.c_str(), a.users, a.mean_delta,
                a.se_delta, a.mean_fnr, a.se_fnr, a.completion_rate);
}

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? default_config() : load_config_file(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bandit personalization for gesture decoding: experiments and live play"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", seeds;
  auto* run = app.add_subcommand("run", "run the multi-session protocol over synthetic users");
  run->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seeds", seeds, "seed range a..b, overrides the config");

  double target_acc = 0.6;
  int cal_frames = 5000;
  std::string cal_seeds = "1..20", cal_config;
  auto* cal = app.add_subcommand("calibrate-severity", "find the severity giving a target baseline accuracy");
  cal->add_option("--target-acc", target_acc, "target per-frame accuracy")->required()->check(CLI::Range(0.0, 1.0));
  cal->add_option("--seeds", cal_seeds, "seed range a..b");
  cal->add_option("--frames", cal_frames, "frames per accuracy probe")->check(CLI::PositiveNumber);
  cal->add_option("--config", cal_config, "experiment config for d and the population seed");

  std::string log_path, events_path, model_path, replay_out;
  double alpha = 1.0;
  bool static_model = false;
  auto* rep = app.add_subcommand("replay", "run a recorded frame log through the pipeline");
  rep->add_option("--log", log_path, "frame log (NDJSON)")->required()->check(CLI::ExistingFile);
  rep->add_option("--events", events_path, "event log whose user reports are replayed")->check(CLI::ExistingFile);
  rep->add_option("--model", model_path, "initial bandit snapshot")->check(CLI::ExistingFile);
  rep->add_option("--alpha", alpha, "exploration weight for a fresh model");
  rep->add_flag("--static", static_model, "disable learning");
  rep->add_option("--out", replay_out, "write the resulting event log here");

  std::string in_dir;
  auto* report = app.add_subcommand("report", "aggregate rounds.csv per round");
  report->add_option("--in", in_dir, "directory holding rounds.csv")->required()->check(CLI::ExistingDirectory);

  std::string address = "127.0.0.1", snapshot_dir = "players", frame_log_dir, serve_config;
  std::uint16_t port = 8080;
  auto* serve = app.add_subcommand("serve", "start the live WebSocket gateway");
  serve->add_option("--address", address, "listen address");
  serve->add_option("--port", port, "listen port");
  serve->add_option("--snapshots", snapshot_dir, "per-player snapshot directory");
  serve->add_option("--frame-log", frame_log_dir, "write per-round frame logs here");
  serve->add_option("--config", serve_config, "experiment config for bandit and post-processing settings");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg = load_config_file(config_path);
      if (!seeds.empty()) cfg.seeds = parse_seed_range(seeds);
      const ProtocolResult result = run_protocol(cfg);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      write_outputs(out_dir, cfg, result);
      std::vector<std::string> order;
      for (const auto& r : cfg.rounds) order.push_back(r.name);
      print_aggregates(aggregate(result.reports(), order));
      std::cout << "wrote " << out_dir << '\n';
    } else if (*cal) {
      const ExperimentConfig cfg = config_or_default(cal_config);
      const Population pop = synth_population(cfg.source.population_seed, cfg.dim(), kNumGestures);
      int failures = 0;
      std::printf("%6s %9s %9s %5s\n", "seed", "severity", "accuracy", "ok");
      for (auto seed : parse_seed_range(cal_seeds)) {
        const auto c = calibrate_severity(pop, seed, target_acc, cfg.severity.tolerance, cal_frames);
        std::printf("%6llu %9.4f %9.4f %5s\n", static_cast<unsigned long long>(seed), c.severity, c.accuracy,
                    c.converged ? "yes" : "no");
        failures += c.converged ? 0 : 1;
      }
      return failures == 0 ? 0 : 2;
    } else if (*rep) {
      auto stream = replay_open(log_path);
      ReplayRunOptions opts;
      opts.alpha = alpha;
      opts.learning = !static_model;
      if (!model_path.empty()) opts.model = restore(load_snapshot_file(model_path));
      if (!events_path.empty()) {
        std::ifstream in(events_path);
        opts.report_frames = report_frames(read_event_log(in));
      }
      const ReplayRun result = replay_run(stream, opts);
      int emissions = 0, advances = 0, reports = 0;
      for (const auto& e : result.emissions) emissions += e ? 1 : 0;
      for (const auto& e : result.events) {
        advances += e.kind == EventKind::advanced ? 1 : 0;
        reports += e.kind == EventKind::user_report ? 1 : 0;
      }
      std::printf("frames %lld  emissions %d  advanced %d  reports %d  mode %s\n", result.frames, emissions,
                  advances, reports, result.path_mode ? "game" : "label");
      if (!replay_out.empty()) {
        std::ofstream out(replay_out);
        write_event_log(out, result.events);
      }
    } else if (*report) {
      print_aggregates(aggregate_csv(in_dir));
    } else if (*serve) {
      GatewayConfig gc;
      if (!serve_config.empty()) gc.base = load_config_file(serve_config);
      gc.snapshot_dir = snapshot_dir;
      gc.frame_log_dir = frame_log_dir;
      GatewayServer server(gc, address, port);
      std::cout << "listening on " << address << ':' << server.port() << std::endl;
      server.run();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
