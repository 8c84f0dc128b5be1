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

#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfrr/core.hpp"
#include "cfrr/eval.hpp"
#include "cfrr/ingest.hpp"
#include "cfrr/synthgen.hpp"
#include "cfrr/trainer.hpp"

namespace cfrr {

// Exit-code buckets for the CLI: config 2, data 3, runtime 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MethodSpec {
  std::string name;  // report label, defaults to the objective name
  ObjectiveKind objective = ObjectiveKind::kNaive;
  nlohmann::json train_override;       // partial TrainConfig fields
  nlohmann::json propensity_override;  // partial propensity fields
};

struct DatasetSpec {
  std::string kind = "synth";  // synth | log
  SynthConfig synth;
  std::string log_path;
  std::uint32_t n_users = 0;  // kind=log; 0 infers max id + 1
};

struct PropensitySpec {
  PropensityKind kind = PropensityKind::kGbdt;
  GbdtConfig gbdt;
  double floor = 0.02;
  double unexposed_ratio = 1.0;
  PropensityFeatureMode feature_mode = PropensityFeatureMode::kFull;
  double degrade_noise = 2.0;
};

struct MatchingSpec {
  bool enabled = false;
  std::string algorithm = "gale_shapley";  // gale_shapley | max_weight
  std::size_t top_k = 50;
  std::size_t exact_threshold = 512;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  SplitSpec split;
  std::vector<MethodSpec> methods;
  std::vector<std::uint64_t> seeds;
  TrainConfig train;
  PropensitySpec propensity;
  EvalProtocol eval;
  MatchingSpec matching;
  std::string baseline_method;  // defaults to first method
  std::string out_dir;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;  // normalized echo, hash source
  std::string config_hash() const;
  void validate() const;
};

struct RunRow {
  std::string method;
  std::uint64_t seed = 0;
  std::string dataset_hash;
  std::string config_hash;
  MetricsReport metrics;
  int best_epoch = -1;
  int epochs_trained = 0;
  double propensity_auc = 0.0;  // exposure AUC on the propensity log; 0 for naive
  double outcome_auc = 0.0;     // snips_dr only
  std::string ips_normalization;
  std::string status = "ok";  // ok | diverged | failed:<what>
};

void write_runs_csv(const std::vector<RunRow>& rows, const std::string& path);
std::vector<RunRow> read_runs_csv(const std::string& path);

// Mean/std per method plus paired tests against the baseline, Bonferroni
// over all comparisons, Cohen's d. Throws DataError when two methods share a
// seed but not a dataset hash.
nlohmann::json aggregate_runs(const std::vector<RunRow>& rows,
                              const std::string& baseline_method);

struct SynthCommandOptions {
  SynthConfig config;
  std::string out_dir;
  int dump_theta = -1;  // -1 auto (n_users <= 2000), 0 never, 1 always
};
void cmd_synth(const SynthCommandOptions& options);

struct IngestCommandOptions {
  std::string path;
  bool directed = false;
  std::uint32_t max_users = 0;  // 0 = no cap
  std::uint64_t seed = 0;
  std::string out_dir;
};
void cmd_ingest(const IngestCommandOptions& options);

void cmd_run(const ExperimentConfig& config);
void cmd_report(const std::string& run_dir);

// Single (method, seed) execution; exposed for tests and reused by cmd_run.
struct SingleRunResult {
  RunRow row;
  TrainResult train_result;
  double total_seconds = 0.0;
};
SingleRunResult run_single(const ExperimentConfig& config, const MethodSpec& method,
                           std::uint64_t seed);

}  // namespace cfrr
