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
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfrr/core.hpp"
#include "cfrr/gbdt.hpp"

namespace cfrr {

using PairFeatures = std::vector<double>;

enum class PropensityFeatureMode {
  kFull,
  // Misspecification ablation: exposure-count features only, perturbed by
  // deterministic per-user noise, no interaction term.
  kDegraded,
};

// Per-user counts from a single log (no leakage from other splits):
// degree = exposed rows with positive outcome, exposure = exposed rows.
class PairFeaturizer {
public:
  PairFeaturizer(const ExposureLog& log, PropensityFeatureMode mode = PropensityFeatureMode::kFull,
                 double degrade_noise = 2.0, std::uint64_t degrade_seed = 0);

  // Feature layout (full mode):
  //   log1p(degree_a), log1p(degree_b),
  //   log1p(exposure_a), log1p(exposure_b),
  //   z(exposure_a) * z(exposure_b)
  // where (a, b) is the canonical pair order in symmetric spaces.
  PairFeatures featurize(UserId u, UserId v) const;

  std::size_t feature_dim() const;
  std::uint64_t degree(UserId u) const { return degree_.at(u); }
  std::uint64_t exposure_count(UserId u) const { return exposure_.at(u); }
  const PairSpace& pair_space() const { return space_; }

private:
  PairSpace space_;
  PropensityFeatureMode mode_;
  std::vector<std::uint64_t> degree_;
  std::vector<std::uint64_t> exposure_;
  std::vector<double> exposure_z_;
  std::vector<double> noise_;  // degraded mode only
};

enum class PropensityKind { kGbdt, kLogistic };

struct PropensityFitConfig {
  PropensityKind kind = PropensityKind::kGbdt;
  GbdtConfig gbdt;
  double logistic_l2 = 1e-4;
  int logistic_iters = 100;
  double floor = 0.02;  // min emitted probability; default 1/clip_c at c=50
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_sd;
  double raw_score(const PairFeatures& x) const;
};

// Estimated display probability theta_hat(u, v). Immutable after fitting.
class PropensityModel {
public:
  double predict_theta(const PairFeatures& features) const;
  double predict_theta(const PairFeaturizer& featurizer, UserId u, UserId v) const;

  PropensityKind kind() const { return kind_; }
  double floor() const { return floor_; }
  double logit_offset() const { return logit_offset_; }
  const Gbdt& gbdt() const { return gbdt_; }

  nlohmann::json to_json() const;
  static PropensityModel from_json(const nlohmann::json& j);
  std::uint64_t hash() const;
  void save(const std::string& path) const;
  static PropensityModel load(const std::string& path);

private:
  friend PropensityModel fit_propensity(const ExposureLog&, const PairFeaturizer&,
                                        const PropensityFitConfig&);
  friend PropensityModel joint_reestimate(const PropensityModel&, const ExposureLog&,
                                          const PairFeaturizer&, int);

  PropensityKind kind_ = PropensityKind::kGbdt;
  Gbdt gbdt_;
  LogisticModel logistic_;
  double floor_ = 0.02;
  // Case-control intercept correction for subsampled unexposed rows.
  double logit_offset_ = 0.0;
  PropensityFitConfig config_;
};

// Uniformly samples `ratio` * exposed_count unexposed pairs (pairs absent
// from the log's exposed set) and appends them as exposed=0 rows. The
// subsampling rate is recovered downstream from row counts.
ExposureLog sample_unexposed(const ExposureLog& log, double ratio, std::uint64_t seed);

// Fits theta_hat on a log containing both exposed and unexposed rows.
// Exposure flags are the labels; the intercept is corrected for the
// unexposed subsampling rate. Throws on single-class labels.
PropensityModel fit_propensity(const ExposureLog& log_all, const PairFeaturizer& featurizer,
                               const PropensityFitConfig& config);

// min(1/theta, c). Throws when theta <= 0.
double clip_weight(double theta, double c);

// Warm-started refit on the exposure likelihood of log_all; the input model
// is left untouched. `extra_rounds` bounds the GBDT continuation (logistic
// models take that many Newton steps).
PropensityModel joint_reestimate(const PropensityModel& model, const ExposureLog& log_all,
                                 const PairFeaturizer& featurizer, int extra_rounds = 10);

// Mean held-out exposure log-likelihood over 5 folds split by pair; used for
// propensity hyperparameter selection.
double cross_validated_loglik(const ExposureLog& log_all, const PairFeaturizer& featurizer,
                              const PropensityFitConfig& config, int folds = 5,
                              std::uint64_t seed = 0);

}  // namespace cfrr
