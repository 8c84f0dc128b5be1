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

#include "cfrr/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace cfrr {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kScoreEps = 1e-7;

// L2 over the parameters touched by the given users, plus the global bias.
// Value and gradient are added to `result`; returns the squared norm.
double add_regularization(const ScoringModel& model,
                          const std::unordered_set<UserId>& touched, double reg_lambda,
                          ObjectiveResult* result) {
  double norm2 = model.b0 * model.b0;
  for (const UserId u : touched) {
    for (const double x : model.p(u)) norm2 += x * x;
    for (const double x : model.q(u)) norm2 += x * x;
    norm2 += model.B[u] * model.B[u];
  }
  if (result) {
    result->value += reg_lambda * norm2;
    result->grad.db0 += 2.0 * reg_lambda * model.b0;
    for (const UserId u : touched) {
      auto& dp = result->grad.dP[u];
      auto& dq = result->grad.dQ[u];
      if (dp.empty()) dp.assign(model.dim, 0.0);
      if (dq.empty()) dq.assign(model.dim, 0.0);
      const auto pu = model.p(u);
      const auto qu = model.q(u);
      for (std::uint32_t k = 0; k < model.dim; ++k) {
        dp[k] += 2.0 * reg_lambda * pu[k];
        dq[k] += 2.0 * reg_lambda * qu[k];
      }
      result->grad.dB[u] += 2.0 * reg_lambda * model.B[u];
    }
  }
  return norm2;
}

}  // namespace

ScoringModel ScoringModel::init_random(std::uint32_t n_users, std::uint32_t dim,
                                       std::uint64_t seed, double scale) {
  ScoringModel m;
  m.n_users = n_users;
  m.dim = dim;
  m.P.resize(static_cast<std::size_t>(n_users) * dim);
  m.Q.resize(static_cast<std::size_t>(n_users) * dim);
  m.B.assign(n_users, 0.0);
  m.b0 = 0.0;
  RngStream rng(seed);
  const double sd = scale / std::sqrt(static_cast<double>(dim));
  for (auto& x : m.P) x = rng.normal(0.0, sd);
  for (auto& x : m.Q) x = rng.normal(0.0, sd);
  return m;
}

double ScoringModel::raw(UserId u, UserId v) const {
  const auto pu = p(u), qu = q(u), pv = p(v), qv = q(v);
  double z = b0 + B[u] + B[v];
  for (std::uint32_t k = 0; k < dim; ++k) z += pu[k] * qv[k] + pv[k] * qu[k];
  return z;
}

double ScoringModel::score(UserId u, UserId v) const {
  if (u == v) throw std::invalid_argument("score: u == v");
  if (u >= n_users || v >= n_users)
    throw std::invalid_argument("score: user id out of range");
  return sigmoid(raw(u, v));
}

nlohmann::json ScoringModel::to_json() const {
  return {{"n_users", n_users}, {"dim", dim}, {"P", P}, {"Q", Q}, {"B", B}, {"b0", b0}};
}

ScoringModel ScoringModel::from_json(const nlohmann::json& j) {
  ScoringModel m;
  m.n_users = j.at("n_users").get<std::uint32_t>();
  m.dim = j.at("dim").get<std::uint32_t>();
  m.P = j.at("P").get<std::vector<double>>();
  m.Q = j.at("Q").get<std::vector<double>>();
  m.B = j.at("B").get<std::vector<double>>();
  m.b0 = j.at("b0").get<double>();
  return m;
}

std::uint64_t ScoringModel::hash() const { return fnv1a64(to_json().dump()); }

bool SparseGrad::finite() const {
  if (!std::isfinite(db0)) return false;
  for (const auto& [u, g] : dP)
    for (const double x : g)
      if (!std::isfinite(x)) return false;
  for (const auto& [u, g] : dQ)
    for (const double x : g)
      if (!std::isfinite(x)) return false;
  for (const auto& [u, g] : dB)
    if (!std::isfinite(g)) return false;
  return true;
}

// Adds coeff * d(raw(u,v))/d(params) into the gradient.
void SparseGrad::accumulate_example(const ScoringModel& model, UserId u, UserId v,
                                    double coeff) {
  auto& dpu = dP[u];
  auto& dpv = dP[v];
  auto& dqu = dQ[u];
  auto& dqv = dQ[v];
  if (dpu.empty()) dpu.assign(model.dim, 0.0);
  if (dpv.empty()) dpv.assign(model.dim, 0.0);
  if (dqu.empty()) dqu.assign(model.dim, 0.0);
  if (dqv.empty()) dqv.assign(model.dim, 0.0);
  const auto pu = model.p(u), qu = model.q(u), pv = model.p(v), qv = model.q(v);
  for (std::uint32_t k = 0; k < model.dim; ++k) {
    dpu[k] += coeff * qv[k];
    dqv[k] += coeff * pu[k];
    dpv[k] += coeff * qu[k];
    dqu[k] += coeff * pv[k];
  }
  dB[u] += coeff;
  dB[v] += coeff;
  db0 += coeff;
}

std::vector<TrainExample> to_examples(const ExposureLog& log) {
  std::vector<TrainExample> out;
  out.reserve(log.size());
  for (const auto& it : log.interactions)
    if (it.exposed) out.push_back({it.u, it.v, *it.outcome});
  return out;
}

ObjectiveKind objective_kind_from_string(const std::string& s) {
  if (s == "naive") return ObjectiveKind::kNaive;
  if (s == "ips") return ObjectiveKind::kIps;
  if (s == "snips") return ObjectiveKind::kSnips;
  if (s == "snips_dr") return ObjectiveKind::kSnipsDr;
  throw std::invalid_argument("unknown objective kind: " + s);
}

std::string to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::kNaive: return "naive";
    case ObjectiveKind::kIps: return "ips";
    case ObjectiveKind::kSnips: return "snips";
    case ObjectiveKind::kSnipsDr: return "snips_dr";
  }
  return "?";
}

double pointwise_loss(double r, double s) {
  if (r < 0.0 || r > 1.0) throw std::invalid_argument("pointwise_loss: r outside [0,1]");
  const double sc = std::clamp(s, kScoreEps, 1.0 - kScoreEps);
  return -r * std::log(sc) - (1.0 - r) * std::log(1.0 - sc);
}

ObjectiveResult naive_objective(const ScoringModel& model, std::span<const TrainExample> batch,
                                double reg_lambda) {
  if (batch.empty()) throw std::invalid_argument("naive_objective: empty batch");
  ObjectiveResult res;
  std::unordered_set<UserId> touched;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    const double s = model.score(ex.u, ex.v);
    res.value += inv * pointwise_loss(ex.r, s);
    res.grad.accumulate_example(model, ex.u, ex.v, inv * (s - ex.r));
    touched.insert(ex.u);
    touched.insert(ex.v);
  }
  add_regularization(model, touched, reg_lambda, &res);
  return res;
}

ObjectiveResult ips_objective(const ScoringModel& model, std::span<const TrainExample> batch,
                              std::span<const double> weights, double pair_space_size,
                              double reg_lambda, IpsNormalization norm) {
  if (batch.empty()) throw std::invalid_argument("ips_objective: empty batch");
  if (batch.size() != weights.size())
    throw std::invalid_argument("ips_objective: weight/batch length mismatch");
  if (norm == IpsNormalization::kPopulation && pair_space_size <= 0.0)
    throw std::invalid_argument("ips_objective: pair_space_size must be > 0");
  ObjectiveResult res;
  std::unordered_set<UserId> touched;
  const double inv = norm == IpsNormalization::kPopulation
                         ? 1.0 / pair_space_size
                         : 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    const double s = model.score(ex.u, ex.v);
    res.value += inv * weights[i] * pointwise_loss(ex.r, s);
    res.grad.accumulate_example(model, ex.u, ex.v, inv * weights[i] * (s - ex.r));
    touched.insert(ex.u);
    touched.insert(ex.v);
  }
  add_regularization(model, touched, reg_lambda, &res);
  return res;
}

ObjectiveResult snips_objective(const ScoringModel& model, std::span<const TrainExample> batch,
                                std::span<const double> weights, double reg_lambda) {
  if (batch.empty()) throw std::invalid_argument("snips_objective: empty batch");
  if (batch.size() != weights.size())
    throw std::invalid_argument("snips_objective: weight/batch length mismatch");
  double weight_sum = 0.0;
  for (const double w : weights) weight_sum += w;
  if (!(weight_sum > 0.0)) throw std::invalid_argument("snips_objective: sum of weights <= 0");

  ObjectiveResult res;
  std::unordered_set<UserId> touched;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    const double s = model.score(ex.u, ex.v);
    const double wn = weights[i] / weight_sum;
    res.value += wn * pointwise_loss(ex.r, s);
    res.grad.accumulate_example(model, ex.u, ex.v, wn * (s - ex.r));
    touched.insert(ex.u);
    touched.insert(ex.v);
  }
  add_regularization(model, touched, reg_lambda, &res);
  return res;
}

ObjectiveResult snips_dr_objective(const ScoringModel& model,
                                   std::span<const TrainExample> batch,
                                   std::span<const double> weights, const OutcomeFn& outcome,
                                   std::span<const std::pair<UserId, UserId>> uniform_sample,
                                   double reg_lambda) {
  if (batch.empty()) throw std::invalid_argument("snips_dr_objective: empty batch");
  if (batch.size() != weights.size())
    throw std::invalid_argument("snips_dr_objective: weight/batch length mismatch");
  if (uniform_sample.empty())
    throw std::invalid_argument("snips_dr_objective: empty uniform sample");
  if (!outcome) throw std::invalid_argument("snips_dr_objective: outcome model missing");
  double weight_sum = 0.0;
  for (const double w : weights) weight_sum += w;
  if (!(weight_sum > 0.0))
    throw std::invalid_argument("snips_dr_objective: sum of weights <= 0");

  ObjectiveResult res;
  std::unordered_set<UserId> touched;
  // Term 1 minus term 2: self-normalized weighted loss on observed outcomes,
  // minus the same against outcome-model pseudo-labels.
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    const double s = model.score(ex.u, ex.v);
    const double m_hat = outcome(ex.u, ex.v);
    const double wn = weights[i] / weight_sum;
    res.value += wn * (pointwise_loss(ex.r, s) - pointwise_loss(m_hat, s));
    res.grad.accumulate_example(model, ex.u, ex.v, wn * ((s - ex.r) - (s - m_hat)));
    touched.insert(ex.u);
    touched.insert(ex.v);
  }
  // Term 3: uniform-sample estimate of the pseudo-label risk over the pair
  // space.
  const double inv_s = 1.0 / static_cast<double>(uniform_sample.size());
  for (const auto& [u, v] : uniform_sample) {
    const double s = model.score(u, v);
    const double m_hat = outcome(u, v);
    res.value += inv_s * pointwise_loss(m_hat, s);
    res.grad.accumulate_example(model, u, v, inv_s * (s - m_hat));
    touched.insert(u);
    touched.insert(v);
  }
  add_regularization(model, touched, reg_lambda, &res);
  return res;
}

double OutcomeModel::predict(const PairFeaturizer& featurizer, UserId u, UserId v) const {
  return net.predict(featurizer.featurize(u, v));
}

OutcomeFn OutcomeModel::fn(const PairFeaturizer& featurizer) const {
  // The featurizer must outlive the returned closure; the net is copied.
  return [net = net, &featurizer](UserId u, UserId v) {
    return net.predict(featurizer.featurize(u, v));
  };
}

OutcomeModel fit_outcome_model(const ExposureLog& train, const PairFeaturizer& featurizer,
                               const MlpConfig& config) {
  const auto examples = to_examples(train);
  if (examples.empty()) throw std::invalid_argument("fit_outcome_model: no exposed rows");
  std::vector<std::vector<double>> X;
  std::vector<double> y;
  X.reserve(examples.size());
  y.reserve(examples.size());
  for (const auto& ex : examples) {
    X.push_back(featurizer.featurize(ex.u, ex.v));
    y.push_back(ex.r);
  }
  OutcomeModel m;
  m.net = Mlp(static_cast<int>(X[0].size()), config.hidden, config.seed);
  m.validation_auc = m.net.fit(X, y, config);
  return m;
}

}  // namespace cfrr
