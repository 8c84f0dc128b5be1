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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfrr/core.hpp"
#include "cfrr/objectives.hpp"
#include "cfrr/propensity.hpp"

namespace cfrr {

struct TrainConfig {
  double learning_rate = 0.001;
  std::uint32_t embedding_dim = 16;
  std::size_t batch_size = 512;
  int max_epochs = 20;
  ObjectiveSpec objective;
  bool joint_propensity = false;
  int joint_refit_rounds = 10;  // per-epoch warm-start budget
  int patience = 3;             // early stopping on validation NDCG@10
  std::size_t valid_user_cap = 500;
  std::size_t valid_candidates = 100;
  MlpConfig outcome;  // snips_dr only
  std::uint64_t seed = 0;

  void validate() const;
};

// Adam moments mirroring the scoring-model parameter shapes. Updates are
// sparse: only parameters named in the gradient move; untouched entries are
// bit-identical across the step.
struct AdamState {
  std::vector<double> mP, vP, mQ, vQ, mB, vB;
  double mb0 = 0.0, vb0 = 0.0;
  long t = 0;

  static AdamState like(const ScoringModel& model);
};

void adam_step(ScoringModel& model, AdamState& state, const SparseGrad& grad, double lr);

// Stop iff no improvement over the running best during the last `patience`
// epochs; ties count as no improvement.
bool early_stop(const std::vector<double>& history, int patience);
// Argmax with earliest-index tie-break.
std::size_t best_epoch(const std::vector<double>& history);

struct EpochRecord {
  int epoch = 0;
  double train_objective = 0.0;   // mean per-batch objective value
  double snips_full = 0.0;        // full-train SNIPS value at epoch end
  double valid_ndcg10 = 0.0;
  double wall_seconds = 0.0;      // excluded from deterministic artifacts
  std::string propensity_hash;
};

enum class TrainStatus { kOk, kDiverged };

struct TrainResult {
  ScoringModel model;  // best-validation checkpoint
  std::vector<EpochRecord> epochs;
  TrainStatus status = TrainStatus::kOk;
  int best_epoch = -1;  // -1 when no epoch ran
  double outcome_model_auc = 0.0;      // snips_dr only
  double outcome_fit_seconds = 0.0;    // snips_dr only
  std::string ips_normalization;       // flagged for the report
};

// Algorithm: per epoch, shuffle the train examples, walk mini-batches with
// clipped inverse-propensity weights under the configured objective, then
// optionally refit the propensity model with the scorer frozen. Validation
// NDCG@10 on a fixed subsample drives early stopping; the returned model is
// the best-epoch checkpoint.
TrainResult train(const ExposureLog& train_log, const ExposureLog& valid_log,
                  const ExposureLog& propensity_log, const PropensityModel* propensity,
                  const PairFeaturizer* featurizer, const TrainConfig& config);

}  // namespace cfrr
