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

#include "cfrr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "cfrr/eval.hpp"

namespace cfrr {

namespace {

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
  if (embedding_dim < 1) throw std::invalid_argument("TrainConfig: embedding_dim must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
  if (max_epochs < 0) throw std::invalid_argument("TrainConfig: max_epochs must be >= 0");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (objective.clip_c <= 0.0) throw std::invalid_argument("TrainConfig: clip_c must be > 0");
  if (objective.reg_lambda < 0.0)
    throw std::invalid_argument("TrainConfig: reg_lambda must be >= 0");
}

AdamState AdamState::like(const ScoringModel& model) {
  AdamState s;
  s.mP.assign(model.P.size(), 0.0);
  s.vP.assign(model.P.size(), 0.0);
  s.mQ.assign(model.Q.size(), 0.0);
  s.vQ.assign(model.Q.size(), 0.0);
  s.mB.assign(model.B.size(), 0.0);
  s.vB.assign(model.B.size(), 0.0);
  return s;
}

void adam_step(ScoringModel& model, AdamState& state, const SparseGrad& grad, double lr) {
  if (!grad.finite()) throw std::invalid_argument("adam_step: non-finite gradient");
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  state.t += 1;
  const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));

  const auto update = [&](double& param, double& m, double& v, double g) {
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    param -= lr * (m / corr1) / (std::sqrt(v / corr2) + eps);
  };

  for (const auto& [u, g] : grad.dP) {
    const std::size_t base = static_cast<std::size_t>(u) * model.dim;
    for (std::uint32_t k = 0; k < model.dim; ++k)
      update(model.P[base + k], state.mP[base + k], state.vP[base + k], g[k]);
  }
  for (const auto& [u, g] : grad.dQ) {
    const std::size_t base = static_cast<std::size_t>(u) * model.dim;
    for (std::uint32_t k = 0; k < model.dim; ++k)
      update(model.Q[base + k], state.mQ[base + k], state.vQ[base + k], g[k]);
  }
  for (const auto& [u, g] : grad.dB) update(model.B[u], state.mB[u], state.vB[u], g);
  update(model.b0, state.mb0, state.vb0, grad.db0);
}

bool early_stop(const std::vector<double>& history, int patience) {
  if (history.empty()) throw std::invalid_argument("early_stop: empty history");
  // Index of the last strict improvement over the running best.
  std::size_t last_improvement = 0;
  double best = history[0];
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i] > best) {
      best = history[i];
      last_improvement = i;
    }
  }
  return history.size() - 1 - last_improvement >= static_cast<std::size_t>(patience);
}

std::size_t best_epoch(const std::vector<double>& history) {
  if (history.empty()) throw std::invalid_argument("best_epoch: empty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i] > history[best]) best = i;
  return best;
}

TrainResult train(const ExposureLog& train_log, const ExposureLog& valid_log,
                  const ExposureLog& propensity_log, const PropensityModel* propensity,
                  const PairFeaturizer* featurizer, const TrainConfig& config) {
  config.validate();
  const auto examples = to_examples(train_log);
  if (examples.empty()) throw std::invalid_argument("train: empty train split");
  if (valid_log.exposed_count() == 0 && config.max_epochs > 0)
    throw std::invalid_argument("train: empty valid split");
  const bool needs_weights = config.objective.kind != ObjectiveKind::kNaive;
  if (needs_weights && (!propensity || !featurizer))
    throw std::invalid_argument("train: objective requires a fitted propensity model");

  const std::uint32_t n_users = train_log.pair_space.symmetric
                                    ? train_log.pair_space.side_u
                                    : std::max(train_log.pair_space.side_u,
                                               train_log.pair_space.side_v);

  RngStream master(config.seed);
  ScoringModel model =
      ScoringModel::init_random(n_users, config.embedding_dim, master.derive(0).seed());

  TrainResult result;
  result.model = model;
  result.ips_normalization =
      config.objective.ips_normalization == IpsNormalization::kBatchMean ? "batch_mean"
                                                                         : "population";
  if (config.max_epochs == 0) return result;

  AdamState adam = AdamState::like(model);
  PropensityModel current_prop;
  if (propensity) current_prop = *propensity;

  // Clipped inverse-propensity weights per train example, refreshed only
  // when the propensity model changes.
  std::vector<double> weights(examples.size(), 1.0);
  const auto refresh_weights = [&]() {
    if (!needs_weights) return;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const double theta =
          current_prop.predict_theta(*featurizer, examples[i].u, examples[i].v);
      weights[i] = clip_weight(theta, config.objective.clip_c);
    }
  };
  refresh_weights();

  // Outcome model for the DR objective, trained up front on the train split.
  OutcomeFn outcome_fn;
  if (config.objective.kind == ObjectiveKind::kSnipsDr) {
    if (!featurizer)
      throw std::invalid_argument("train: snips_dr requires a featurizer");
    const auto t0 = std::chrono::steady_clock::now();
    MlpConfig outcome_cfg = config.outcome;
    outcome_cfg.seed = master.derive(1).seed();
    const OutcomeModel outcome_model = fit_outcome_model(train_log, *featurizer, outcome_cfg);
    result.outcome_model_auc = outcome_model.validation_auc;
    result.outcome_fit_seconds = elapsed_seconds(t0);
    // Copy the model into the closure; the featurizer outlives training.
    const Mlp net = outcome_model.net;
    const PairFeaturizer* feats = featurizer;
    outcome_fn = [net, feats](UserId u, UserId v) {
      return net.predict(feats->featurize(u, v));
    };
  }

  // Fixed validation candidate sets, re-scored each epoch.
  EvalProtocol valid_protocol;
  valid_protocol.n_eval_users = config.valid_user_cap;
  valid_protocol.candidates_per_user = config.valid_candidates;
  valid_protocol.seed = master.derive(2).seed();
  const auto valid_sets =
      build_candidate_sets(valid_log, train_log, n_users, valid_protocol);

  RngStream dr_rng = master.derive(3);
  const std::uint64_t pair_count = train_log.pair_space.num_pairs();
  const auto draw_uniform_pairs = [&](std::size_t count) {
    std::vector<std::pair<UserId, UserId>> sample;
    sample.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      sample.push_back(train_log.pair_space.pair_at(dr_rng.uniform_int(pair_count)));
    return sample;
  };

  std::vector<double> ndcg_history;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ScoringModel best_model = model;
  double best_metric = -1.0;
  int best_epoch_index = -1;

  std::vector<TrainExample> batch;
  std::vector<double> batch_weights;
  std::vector<std::pair<UserId, UserId>> fixed_epoch_sample;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    RngStream shuffle_rng = master.derive(100 + static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    if (config.objective.kind == ObjectiveKind::kSnipsDr &&
        !config.objective.dr_resample_per_batch)
      fixed_epoch_sample = draw_uniform_pairs(config.objective.dr_uniform_sample_size);

    double epoch_objective = 0.0;
    std::size_t n_batches = 0;
    bool diverged = false;
    for (std::size_t start = 0; start < order.size() && !diverged;
         start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      batch_weights.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(examples[order[i]]);
        batch_weights.push_back(weights[order[i]]);
      }

      ObjectiveResult res;
      switch (config.objective.kind) {
        case ObjectiveKind::kNaive:
          res = naive_objective(model, batch, config.objective.reg_lambda);
          break;
        case ObjectiveKind::kIps:
          res = ips_objective(model, batch, batch_weights,
                              static_cast<double>(pair_count), config.objective.reg_lambda,
                              config.objective.ips_normalization);
          break;
        case ObjectiveKind::kSnips:
          res = snips_objective(model, batch, batch_weights, config.objective.reg_lambda);
          break;
        case ObjectiveKind::kSnipsDr: {
          const auto sample = config.objective.dr_resample_per_batch
                                  ? draw_uniform_pairs(config.objective.dr_uniform_sample_size)
                                  : fixed_epoch_sample;
          res = snips_dr_objective(model, batch, batch_weights, outcome_fn, sample,
                                   config.objective.reg_lambda);
          break;
        }
      }
      if (!std::isfinite(res.value) || !res.grad.finite()) {
        diverged = true;
        break;
      }
      adam_step(model, adam, res.grad, config.learning_rate);
      epoch_objective += res.value;
      ++n_batches;
    }

    if (diverged) {
      result.status = TrainStatus::kDiverged;
      break;
    }

    // Full-train SNIPS value for the log (weights are 1 under naive).
    const auto snips_full =
        snips_objective(model, examples, weights, 0.0).value;

    double ndcg_sum = 0.0;
    for (const auto& set : valid_sets) ndcg_sum += ndcg_at_k(rank_candidates(model, set), 10);
    const double valid_ndcg = ndcg_sum / static_cast<double>(valid_sets.size());

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_objective = n_batches > 0 ? epoch_objective / static_cast<double>(n_batches) : 0.0;
    rec.snips_full = snips_full;
    rec.valid_ndcg10 = valid_ndcg;
    rec.propensity_hash = propensity ? hash_hex(current_prop.hash()) : std::string("none");
    rec.wall_seconds = elapsed_seconds(epoch_start);
    result.epochs.push_back(rec);

    ndcg_history.push_back(valid_ndcg);
    if (valid_ndcg > best_metric) {
      best_metric = valid_ndcg;
      best_model = model;
      best_epoch_index = epoch;
    }

    // Joint propensity learning: freeze the scorer, refit beta on the
    // exposure likelihood, refresh weights.
    if (config.joint_propensity && propensity) {
      current_prop = joint_reestimate(current_prop, propensity_log, *featurizer,
                                      config.joint_refit_rounds);
      refresh_weights();
    }

    if (early_stop(ndcg_history, config.patience)) break;
  }

  if (best_epoch_index >= 0) {
    result.model = best_model;
    result.best_epoch = best_epoch_index;
  } else {
    result.model = model;
  }
  return result;
}

}  // namespace cfrr
