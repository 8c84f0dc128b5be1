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
#include <vector>

#include <json.hpp>

#include "cfrr/rng.hpp"

namespace cfrr {

struct MlpConfig {
  std::vector<int> hidden = {64, 32};
  double learning_rate = 0.001;
  int max_epochs = 50;
  int batch_size = 256;
  double valid_fraction = 0.2;
  int patience = 5;  // epochs without validation AUC improvement
  std::uint64_t seed = 0;
};

// Feed-forward binary classifier: ReLU hidden layers, sigmoid output,
// trained with Adam on cross-entropy. Parameters live in one flat vector so
// gradients can be checked against finite differences.
class Mlp {
public:
  Mlp() = default;
  Mlp(int input_dim, const std::vector<int>& hidden, std::uint64_t seed);

  double predict(std::span<const double> x) const;  // sigmoid output in (0,1)
  double raw(std::span<const double> x) const;      // pre-sigmoid logit

  // Mean cross-entropy over the batch plus gradient w.r.t. all parameters.
  double loss_and_grad(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                       std::vector<double>* grad) const;

  // Adam training with early stopping on validation AUC; returns the best
  // validation AUC. Restores the best-epoch parameters.
  double fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
             const MlpConfig& config);

  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  int input_dim() const { return input_dim_; }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

private:
  struct Layer {
    int in = 0, out = 0;
    std::size_t w_offset = 0, b_offset = 0;
  };
  void build_layout(int input_dim, const std::vector<int>& hidden);
  double forward(std::span<const double> x, std::vector<std::vector<double>>* activations) const;

  int input_dim_ = 0;
  std::vector<int> hidden_;
  std::vector<Layer> layers_;  // hidden layers then the scalar output layer
  std::vector<double> params_;
};

// Rank-based AUC with tie handling (ties contribute half credit).
double auc_score(const std::vector<double>& scores, const std::vector<double>& labels);

}  // namespace cfrr
