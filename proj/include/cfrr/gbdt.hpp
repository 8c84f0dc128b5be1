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
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace cfrr {

struct GbdtConfig {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 6;
  double leaf_reg = 1.0;        // L2 on leaf values (Newton denominator)
  double min_child_hessian = 1e-3;
  int eval_interval = 10;       // held-out log-likelihood cadence
  double eval_tolerance = 1e-4; // allowed single regression before stopping

  void validate() const;
};

struct GbdtNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct GbdtTree {
  std::vector<GbdtNode> nodes;  // nodes[0] is the root
  double predict(std::span<const double> x) const;
};

// Binary classifier: boosted regression trees on logistic loss, exact
// greedy splits, Newton leaf values. Row-major feature matrix.
class Gbdt {
public:
  // `eval_X`/`eval_y` optional held-out set for the early-stopping guard.
  void fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
           const GbdtConfig& config, const std::vector<std::vector<double>>* eval_X = nullptr,
           const std::vector<double>* eval_y = nullptr);

  // Continues boosting from the current ensemble for `rounds` extra trees.
  void boost_more(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                  int rounds);

  double raw_score(std::span<const double> x) const;
  double predict_prob(std::span<const double> x) const;

  bool fitted() const { return fitted_; }
  std::size_t n_trees() const { return trees_.size(); }
  double base_score() const { return base_score_; }

  // Per-round mean training loss, non-increasing for a sane fit.
  const std::vector<double>& train_loss_curve() const { return train_loss_curve_; }
  // Held-out mean log-likelihood per evaluation point (empty without eval set).
  const std::vector<double>& eval_loglik_curve() const { return eval_loglik_curve_; }

  nlohmann::json to_json() const;
  static Gbdt from_json(const nlohmann::json& j);

private:
  GbdtTree build_tree(const std::vector<std::vector<double>>& X,
                      const std::vector<double>& grad, const std::vector<double>& hess);

  GbdtConfig config_;
  double base_score_ = 0.0;
  std::vector<GbdtTree> trees_;
  std::vector<double> train_loss_curve_;
  std::vector<double> eval_loglik_curve_;
  bool fitted_ = false;
};

// Mean binary cross-entropy of probabilities against labels.
double mean_logistic_loss(const std::vector<double>& prob, const std::vector<double>& y);

}  // namespace cfrr
