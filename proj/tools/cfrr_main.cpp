// Copyright 2026 The CFRR Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfrr/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cfrr: counterfactual reciprocal recommendation experiments"};
  app.require_subcommand(1);

  // synth
  cfrr::SynthCommandOptions synth_opts;
  bool dump_theta_always = false, dump_theta_never = false;
  auto* synth = app.add_subcommand("synth", "generate a synthetic world and exposure log");
  synth->add_option("--users", synth_opts.config.n_users, "number of users");
  synth->add_option("--dim", synth_opts.config.latent_dim, "latent dimension");
  synth->add_option("--log-size", synth_opts.config.target_log_size,
                    "target number of exposed pairs");
  synth->add_option("--bias-strength", synth_opts.config.bias_strength,
                    "popularity effect on exposure");
  synth->add_option("--spread", synth_opts.config.popularity_spread,
                    "std of per-user factor means");
  synth->add_option("--match-rate", synth_opts.config.target_match_rate,
                    "calibrated mean match probability");
  synth->add_option("--seed", synth_opts.config.seed, "master seed");
  synth->add_option("--out", synth_opts.out_dir, "output directory")->required();
  synth->add_flag("--dump-theta", dump_theta_always,
                  "always dump the full true-theta table");
  synth->add_flag("--no-dump-theta", dump_theta_never, "never dump the theta table");

  // ingest
  cfrr::IngestCommandOptions ingest_opts;
  auto* ingest = app.add_subcommand("ingest", "build an exposure log from an edge list");
  ingest->add_option("path", ingest_opts.path, "edge list file")->required();
  ingest->add_flag("--directed", ingest_opts.directed,
                   "treat edges as directed (mutual pairs become positives)");
  ingest->add_option("--max-users", ingest_opts.max_users,
                     "cap to the highest-degree users (0 = no cap)");
  ingest->add_option("--seed", ingest_opts.seed, "negative sampling seed");
  ingest->add_option("--out", ingest_opts.out_dir, "output directory")->required();

  // run
  std::string run_config_path, run_out_override, run_method_override;
  std::vector<std::uint64_t> run_seed_override;
  auto* run = app.add_subcommand("run", "execute a multi-seed experiment");
  run->add_option("--config", run_config_path, "experiment config JSON")->required();
  run->add_option("--out", run_out_override, "override out_dir");
  run->add_option("--seed", run_seed_override, "override the seed list");
  run->add_option("--method", run_method_override, "run a single method by name");

  // report
  std::string report_dir;
  auto* report = app.add_subcommand("report", "render tables from a run directory");
  report->add_option("dir", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth->parsed()) {
      if (dump_theta_always) synth_opts.dump_theta = 1;
      if (dump_theta_never) synth_opts.dump_theta = 0;
      cfrr::cmd_synth(synth_opts);
    } else if (ingest->parsed()) {
      cfrr::cmd_ingest(ingest_opts);
    } else if (run->parsed()) {
      std::ifstream in(run_config_path);
      if (!in) throw cfrr::DataError("cannot open config: " + run_config_path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw cfrr::ConfigError(run_config_path + ": invalid JSON: " + e.what());
      }
      cfrr::ExperimentConfig config = cfrr::ExperimentConfig::from_json(j);
      if (!run_out_override.empty()) config.out_dir = run_out_override;
      if (!run_seed_override.empty()) config.seeds = run_seed_override;
      if (!run_method_override.empty()) {
        std::vector<cfrr::MethodSpec> kept;
        for (const auto& m : config.methods)
          if (m.name == run_method_override) kept.push_back(m);
        if (kept.empty())
          throw cfrr::ConfigError("--method not found in config: " + run_method_override);
        config.methods = std::move(kept);
        config.baseline_method.clear();
      }
      cfrr::cmd_run(config);
    } else if (report->parsed()) {
      cfrr::cmd_report(report_dir);
    }
  } catch (const cfrr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const cfrr::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
