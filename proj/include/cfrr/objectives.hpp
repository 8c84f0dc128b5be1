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
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cfrr/core.hpp"
#include "cfrr/mlp.hpp"
#include "cfrr/propensity.hpp"

namespace cfrr {

// Reciprocal latent-factor scorer. Each user carries an initiator embedding
// p_u, a receiver embedding q_u, and a bias; the score
//   s(u,v) = sigma(<p_u, q_v> + <p_v, q_u> + b_u + b_v + b0)
// is symmetric under (u,v) swap by construction.
struct ScoringModel {
  std::uint32_t n_users = 0;
  std::uint32_t dim = 0;
  std::vector<double> P;  // n_users x dim initiator embeddings
  std::vector<double> Q;  // n_users x dim receiver embeddings
  std::vector<double> B;  // per-user bias
  double b0 = 0.0;

  static ScoringModel init_random(std::uint32_t n_users, std::uint32_t dim, std::uint64_t seed,
                                  double scale = 0.1);

  std::span<const double> p(UserId u) const {
    return {P.data() + static_cast<std::size_t>(u) * dim, dim};
  }
  std::span<const double> q(UserId u) const {
    return {Q.data() + static_cast<std::size_t>(u) * dim, dim};
  }
  std::span<double> p(UserId u) { return {P.data() + static_cast<std::size_t>(u) * dim, dim}; }
  std::span<double> q(UserId u) { return {Q.data() + static_cast<std::size_t>(u) * dim, dim}; }

  double raw(UserId u, UserId v) const;
  double score(UserId u, UserId v) const;  // throws when u == v

  nlohmann::json to_json() const;
  static ScoringModel from_json(const nlohmann::json& j);
  std::uint64_t hash() const;
};

// Gradient over the parameters touched by a batch.
struct SparseGrad {
  std::unordered_map<UserId, std::vector<double>> dP, dQ;
  std::unordered_map<UserId, double> dB;
  double db0 = 0.0;

  bool finite() const;
  void accumulate_example(const ScoringModel& model, UserId u, UserId v, double coeff);
};

struct TrainExample {
  UserId u = 0;
  UserId v = 0;
  double r = 0.0;
};

// Exposed interactions of a log as training examples.
std::vector<TrainExample> to_examples(const ExposureLog& log);

enum class ObjectiveKind { kNaive, kIps, kSnips, kSnipsDr };

ObjectiveKind objective_kind_from_string(const std::string& s);
std::string to_string(ObjectiveKind k);

enum class IpsNormalization { kPopulation, kBatchMean };

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::kSnips;
  double clip_c = 50.0;
  double reg_lambda = 0.001;
  std::size_t dr_uniform_sample_size = 512;
  // Eq-faithful population normalization for risk estimation; batch-mean is
  // the optimization variant and is flagged in reports.
  IpsNormalization ips_normalization = IpsNormalization::kBatchMean;
  bool dr_resample_per_batch = true;
};

struct ObjectiveResult {
  double value = 0.0;
  SparseGrad grad;
};

// Binary cross-entropy with soft labels; s is clamped to [1e-7, 1-1e-7]
// before the logs.
double pointwise_loss(double r, double s);

ObjectiveResult naive_objective(const ScoringModel& model, std::span<const TrainExample> batch,
                                double reg_lambda);

ObjectiveResult ips_objective(const ScoringModel& model, std::span<const TrainExample> batch,
                              std::span<const double> weights, double pair_space_size,
                              double reg_lambda,
                              IpsNormalization norm = IpsNormalization::kPopulation);

ObjectiveResult snips_objective(const ScoringModel& model, std::span<const TrainExample> batch,
                                std::span<const double> weights, double reg_lambda);

using OutcomeFn = std::function<double(UserId, UserId)>;

ObjectiveResult snips_dr_objective(const ScoringModel& model,
                                   std::span<const TrainExample> batch,
                                   std::span<const double> weights, const OutcomeFn& outcome,
                                   std::span<const std::pair<UserId, UserId>> uniform_sample,
                                   double reg_lambda);

// Outcome regressor m_hat(u,v): MLP over pair features, fitted on exposed
// interactions with AUC early stopping.
struct OutcomeModel {
  Mlp net;
  double validation_auc = 0.0;

  double predict(const PairFeaturizer& featurizer, UserId u, UserId v) const;
  OutcomeFn fn(const PairFeaturizer& featurizer) const;
};

OutcomeModel fit_outcome_model(const ExposureLog& train, const PairFeaturizer& featurizer,
                               const MlpConfig& config);

}  // namespace cfrr
