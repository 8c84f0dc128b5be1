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

#include "cfrr/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

namespace cfrr {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::uint32_t user_bound(const PairSpace& space) {
  return space.symmetric ? space.side_u : std::max(space.side_u, space.side_v);
}

struct Rows {
  std::vector<std::vector<double>> X;
  std::vector<double> y;
};

Rows build_rows(const ExposureLog& log, const PairFeaturizer& featurizer) {
  Rows rows;
  rows.X.reserve(log.size());
  rows.y.reserve(log.size());
  for (const auto& it : log.interactions) {
    rows.X.push_back(featurizer.featurize(it.u, it.v));
    rows.y.push_back(it.exposed ? 1.0 : 0.0);
  }
  return rows;
}

// Subsampling rate of unexposed rows relative to the full unexposed pair set.
double unexposed_rate(const ExposureLog& log) {
  std::unordered_set<std::uint64_t> exposed_pairs;
  std::size_t unexposed_rows = 0;
  for (const auto& it : log.interactions) {
    if (it.exposed)
      exposed_pairs.insert(log.pair_space.pair_index(it.u, it.v));
    else
      ++unexposed_rows;
  }
  const double unexposed_pop =
      static_cast<double>(log.pair_space.num_pairs()) - static_cast<double>(exposed_pairs.size());
  if (unexposed_rows == 0 || unexposed_pop <= 0.0) return 1.0;
  return std::min(1.0, static_cast<double>(unexposed_rows) / unexposed_pop);
}

LogisticModel fit_logistic(const Rows& rows, double l2, int iters,
                           const LogisticModel* init = nullptr) {
  const std::size_t n = rows.X.size();
  const std::size_t d = rows.X[0].size();
  LogisticModel m;
  m.feature_mean.assign(d, 0.0);
  m.feature_sd.assign(d, 0.0);
  for (const auto& x : rows.X)
    for (std::size_t j = 0; j < d; ++j) m.feature_mean[j] += x[j];
  for (std::size_t j = 0; j < d; ++j) m.feature_mean[j] /= static_cast<double>(n);
  for (const auto& x : rows.X)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x[j] - m.feature_mean[j];
      m.feature_sd[j] += c * c;
    }
  for (std::size_t j = 0; j < d; ++j) {
    m.feature_sd[j] = std::sqrt(m.feature_sd[j] / static_cast<double>(n));
    if (m.feature_sd[j] < 1e-12) m.feature_sd[j] = 1.0;
  }

  std::vector<std::vector<double>> Z(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      Z[i][j] = (rows.X[i][j] - m.feature_mean[j]) / m.feature_sd[j];

  // Full-batch Newton with a diagonal Hessian approximation; exact enough
  // for a handful of standardized features.
  if (init && init->weights.size() == d) {
    m.weights = init->weights;
    m.bias = init->bias;
  } else {
    m.weights.assign(d, 0.0);
    m.bias = 0.0;
  }
  for (int iter = 0; iter < iters; ++iter) {
    std::vector<double> g(d, 0.0), h(d, 0.0);
    double gb = 0.0, hb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = m.bias;
      for (std::size_t j = 0; j < d; ++j) z += m.weights[j] * Z[i][j];
      const double p = sigmoid(z);
      const double gi = p - rows.y[i];
      const double hi = std::max(p * (1.0 - p), 1e-12);
      for (std::size_t j = 0; j < d; ++j) {
        g[j] += gi * Z[i][j];
        h[j] += hi * Z[i][j] * Z[i][j];
      }
      gb += gi;
      hb += hi;
    }
    double step = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = (g[j] + l2 * m.weights[j]) / (h[j] + l2);
      m.weights[j] -= delta;
      step = std::max(step, std::abs(delta));
    }
    const double delta_b = gb / hb;
    m.bias -= delta_b;
    step = std::max(step, std::abs(delta_b));
    if (step < 1e-10) break;
  }
  return m;
}

}  // namespace

double LogisticModel::raw_score(const PairFeatures& x) const {
  double z = bias;
  for (std::size_t j = 0; j < weights.size(); ++j)
    z += weights[j] * (x[j] - feature_mean[j]) / feature_sd[j];
  return z;
}

PairFeaturizer::PairFeaturizer(const ExposureLog& log, PropensityFeatureMode mode,
                               double degrade_noise, std::uint64_t degrade_seed)
    : space_(log.pair_space), mode_(mode) {
  const std::uint32_t n = user_bound(space_);
  degree_.assign(n, 0);
  exposure_.assign(n, 0);
  for (const auto& it : log.interactions) {
    if (!it.exposed) continue;
    ++exposure_[it.u];
    ++exposure_[it.v];
    if (it.outcome && *it.outcome >= 0.5) {
      ++degree_[it.u];
      ++degree_[it.v];
    }
  }
  double mean = 0.0;
  for (const auto e : exposure_) mean += static_cast<double>(e);
  mean /= n;
  double var = 0.0;
  for (const auto e : exposure_) {
    const double c = static_cast<double>(e) - mean;
    var += c * c;
  }
  const double sd = std::sqrt(var / n);
  exposure_z_.resize(n);
  for (std::uint32_t u = 0; u < n; ++u)
    exposure_z_[u] = sd > 0.0 ? (static_cast<double>(exposure_[u]) - mean) / sd : 0.0;

  if (mode_ == PropensityFeatureMode::kDegraded) {
    noise_.resize(n);
    for (std::uint32_t u = 0; u < n; ++u) {
      RngStream rng(splitmix64(degrade_seed ^ splitmix64(u + 1)));
      noise_[u] = rng.normal(0.0, degrade_noise);
    }
  }
}

std::size_t PairFeaturizer::feature_dim() const {
  return mode_ == PropensityFeatureMode::kFull ? 5 : 2;
}

PairFeatures PairFeaturizer::featurize(UserId u, UserId v) const {
  const std::uint32_t n = user_bound(space_);
  if (u >= n || v >= n) throw std::invalid_argument("featurize: unknown user");
  auto [a, b] = space_.canonical(u, v);
  if (mode_ == PropensityFeatureMode::kDegraded) {
    return {std::log1p(static_cast<double>(exposure_[a])) + noise_[a],
            std::log1p(static_cast<double>(exposure_[b])) + noise_[b]};
  }
  return {std::log1p(static_cast<double>(degree_[a])),
          std::log1p(static_cast<double>(degree_[b])),
          std::log1p(static_cast<double>(exposure_[a])),
          std::log1p(static_cast<double>(exposure_[b])),
          exposure_z_[a] * exposure_z_[b]};
}

ExposureLog sample_unexposed(const ExposureLog& log, double ratio, std::uint64_t seed) {
  if (ratio <= 0.0) throw std::invalid_argument("sample_unexposed: ratio must be > 0");
  std::unordered_set<std::uint64_t> exposed_pairs;
  for (const auto& it : log.interactions)
    if (it.exposed) exposed_pairs.insert(log.pair_space.pair_index(it.u, it.v));

  const std::uint64_t total = log.pair_space.num_pairs();
  const auto wanted = static_cast<std::uint64_t>(
      std::llround(ratio * static_cast<double>(exposed_pairs.size())));
  if (wanted > total - exposed_pairs.size())
    throw std::invalid_argument("sample_unexposed: not enough unexposed pairs");

  ExposureLog out = log;
  RngStream rng(seed);
  std::unordered_set<std::uint64_t> taken = exposed_pairs;
  std::int64_t t = 0;
  for (const auto& it : log.interactions) t = std::max(t, it.timestamp + 1);
  std::uint64_t added = 0;
  while (added < wanted) {
    const std::uint64_t i = rng.uniform_int(total);
    if (!taken.insert(i).second) continue;
    const auto [u, v] = log.pair_space.pair_at(i);
    LoggedInteraction row;
    row.u = u;
    row.v = v;
    row.exposed = false;
    row.timestamp = t++;
    out.interactions.push_back(row);
    ++added;
  }
  return out;
}

PropensityModel fit_propensity(const ExposureLog& log_all, const PairFeaturizer& featurizer,
                               const PropensityFitConfig& config) {
  if (log_all.interactions.empty()) throw std::invalid_argument("fit_propensity: empty log");
  const Rows rows = build_rows(log_all, featurizer);
  double pos = 0.0;
  for (const double v : rows.y) pos += v;
  if (pos <= 0.0 || pos >= static_cast<double>(rows.y.size()))
    throw std::invalid_argument("fit_propensity: exposure labels are single-class");
  if (!(config.floor > 0.0 && config.floor < 0.5))
    throw std::invalid_argument("fit_propensity: floor must be in (0, 0.5)");

  PropensityModel model;
  model.kind_ = config.kind;
  model.floor_ = config.floor;
  model.config_ = config;
  model.logit_offset_ = std::log(unexposed_rate(log_all));
  if (config.kind == PropensityKind::kGbdt) {
    model.gbdt_.fit(rows.X, rows.y, config.gbdt);
  } else {
    model.logistic_ = fit_logistic(rows, config.logistic_l2, config.logistic_iters);
  }
  return model;
}

double PropensityModel::predict_theta(const PairFeatures& features) const {
  const double raw = kind_ == PropensityKind::kGbdt ? gbdt_.raw_score(features)
                                                    : logistic_.raw_score(features);
  return std::clamp(sigmoid(raw + logit_offset_), floor_, 1.0 - floor_);
}

double PropensityModel::predict_theta(const PairFeaturizer& featurizer, UserId u,
                                      UserId v) const {
  return predict_theta(featurizer.featurize(u, v));
}

double clip_weight(double theta, double c) {
  if (theta <= 0.0) throw std::invalid_argument("clip_weight: theta must be > 0");
  if (c <= 0.0) throw std::invalid_argument("clip_weight: c must be > 0");
  return std::min(1.0 / theta, c);
}

PropensityModel joint_reestimate(const PropensityModel& model, const ExposureLog& log_all,
                                 const PairFeaturizer& featurizer, int extra_rounds) {
  if (extra_rounds <= 0) return model;  // joint learning disabled
  PropensityModel out = model;
  const Rows rows = build_rows(log_all, featurizer);
  if (model.kind_ == PropensityKind::kGbdt) {
    out.gbdt_.boost_more(rows.X, rows.y, extra_rounds);
  } else {
    // Newton steps from the current weights.
    out.logistic_ = fit_logistic(rows, model.config_.logistic_l2, extra_rounds,
                                 &model.logistic_);
  }
  out.logit_offset_ = std::log(unexposed_rate(log_all));
  return out;
}

double cross_validated_loglik(const ExposureLog& log_all, const PairFeaturizer& featurizer,
                              const PropensityFitConfig& config, int folds, std::uint64_t seed) {
  if (folds < 2) throw std::invalid_argument("cross_validated_loglik: folds must be >= 2");
  const std::size_t n = log_all.interactions.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  RngStream rng(seed);
  rng.shuffle(idx);

  double total_ll = 0.0;
  std::size_t total_rows = 0;
  for (int fold = 0; fold < folds; ++fold) {
    ExposureLog train, held;
    train.pair_space = held.pair_space = log_all.pair_space;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& it = log_all.interactions[idx[i]];
      if (static_cast<int>(i % folds) == fold)
        held.interactions.push_back(it);
      else
        train.interactions.push_back(it);
    }
    const PropensityModel m = fit_propensity(train, featurizer, config);
    for (const auto& it : held.interactions) {
      const double theta = m.predict_theta(featurizer, it.u, it.v);
      total_ll += it.exposed ? std::log(theta) : std::log(1.0 - theta);
    }
    total_rows += held.interactions.size();
  }
  return total_ll / static_cast<double>(total_rows);
}

nlohmann::json PropensityModel::to_json() const {
  nlohmann::json j;
  j["kind"] = kind_ == PropensityKind::kGbdt ? "gbdt" : "logistic";
  j["floor"] = floor_;
  j["logit_offset"] = logit_offset_;
  if (kind_ == PropensityKind::kGbdt) {
    j["gbdt"] = gbdt_.to_json();
  } else {
    j["logistic"] = {{"weights", logistic_.weights},
                     {"bias", logistic_.bias},
                     {"feature_mean", logistic_.feature_mean},
                     {"feature_sd", logistic_.feature_sd}};
  }
  return j;
}

PropensityModel PropensityModel::from_json(const nlohmann::json& j) {
  PropensityModel m;
  m.kind_ = j.at("kind").get<std::string>() == "gbdt" ? PropensityKind::kGbdt
                                                      : PropensityKind::kLogistic;
  m.floor_ = j.at("floor").get<double>();
  m.logit_offset_ = j.at("logit_offset").get<double>();
  if (m.kind_ == PropensityKind::kGbdt) {
    m.gbdt_ = Gbdt::from_json(j.at("gbdt"));
  } else {
    const auto& l = j.at("logistic");
    m.logistic_.weights = l.at("weights").get<std::vector<double>>();
    m.logistic_.bias = l.at("bias").get<double>();
    m.logistic_.feature_mean = l.at("feature_mean").get<std::vector<double>>();
    m.logistic_.feature_sd = l.at("feature_sd").get<std::vector<double>>();
  }
  return m;
}

std::uint64_t PropensityModel::hash() const { return fnv1a64(to_json().dump()); }

void PropensityModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json().dump(2) << '\n';
}

PropensityModel PropensityModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  in >> j;
  return from_json(j);
}

}  // namespace cfrr
