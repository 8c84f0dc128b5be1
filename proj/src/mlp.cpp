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

#include "cfrr/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cfrr {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kProbEps = 1e-7;

}  // namespace

void Mlp::build_layout(int input_dim, const std::vector<int>& hidden) {
  input_dim_ = input_dim;
  hidden_ = hidden;
  layers_.clear();
  std::size_t offset = 0;
  int prev = input_dim;
  for (const int h : hidden) {
    Layer l;
    l.in = prev;
    l.out = h;
    l.w_offset = offset;
    offset += static_cast<std::size_t>(prev) * h;
    l.b_offset = offset;
    offset += h;
    layers_.push_back(l);
    prev = h;
  }
  Layer out_layer;
  out_layer.in = prev;
  out_layer.out = 1;
  out_layer.w_offset = offset;
  offset += prev;
  out_layer.b_offset = offset;
  offset += 1;
  layers_.push_back(out_layer);
  params_.assign(offset, 0.0);
}

Mlp::Mlp(int input_dim, const std::vector<int>& hidden, std::uint64_t seed) {
  if (input_dim < 1) throw std::invalid_argument("Mlp: input_dim must be >= 1");
  build_layout(input_dim, hidden);
  RngStream rng(seed);
  for (const auto& l : layers_) {
    // He initialization for the ReLU stack.
    const double sd = std::sqrt(2.0 / l.in);
    for (int i = 0; i < l.in * l.out; ++i)
      params_[l.w_offset + i] = rng.normal(0.0, sd);
  }
}

double Mlp::forward(std::span<const double> x,
                    std::vector<std::vector<double>>* activations) const {
  std::vector<double> cur(x.begin(), x.end());
  if (activations) {
    activations->clear();
    activations->push_back(cur);
  }
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    const Layer& l = layers_[li];
    std::vector<double> next(l.out);
    for (int o = 0; o < l.out; ++o) {
      double z = params_[l.b_offset + o];
      const double* w = params_.data() + l.w_offset + static_cast<std::size_t>(o) * l.in;
      for (int i = 0; i < l.in; ++i) z += w[i] * cur[i];
      const bool is_output = li + 1 == layers_.size();
      next[o] = is_output ? z : std::max(0.0, z);
    }
    cur = std::move(next);
    if (activations) activations->push_back(cur);
  }
  return cur[0];
}

double Mlp::raw(std::span<const double> x) const { return forward(x, nullptr); }

double Mlp::predict(std::span<const double> x) const { return sigmoid(raw(x)); }

double Mlp::loss_and_grad(const std::vector<std::vector<double>>& X,
                          const std::vector<double>& y, std::vector<double>* grad) const {
  if (X.empty() || X.size() != y.size())
    throw std::invalid_argument("Mlp::loss_and_grad: bad shapes");
  if (grad) grad->assign(params_.size(), 0.0);

  double total = 0.0;
  std::vector<std::vector<double>> acts;
  for (std::size_t n = 0; n < X.size(); ++n) {
    const double logit = forward(X[n], grad ? &acts : nullptr);
    const double p = sigmoid(logit);
    const double pc = std::clamp(p, kProbEps, 1.0 - kProbEps);
    total += -y[n] * std::log(pc) - (1.0 - y[n]) * std::log(1.0 - pc);
    if (!grad) continue;

    // Backprop. dL/dlogit for cross-entropy + sigmoid.
    std::vector<double> delta{p - y[n]};
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const Layer& l = layers_[li];
      const std::vector<double>& input = acts[li];
      std::vector<double> prev_delta(l.in, 0.0);
      for (int o = 0; o < l.out; ++o) {
        const double d = delta[o];
        double* gw = grad->data() + l.w_offset + static_cast<std::size_t>(o) * l.in;
        const double* w = params_.data() + l.w_offset + static_cast<std::size_t>(o) * l.in;
        for (int i = 0; i < l.in; ++i) {
          gw[i] += d * input[i];
          prev_delta[i] += d * w[i];
        }
        (*grad)[l.b_offset + o] += d;
      }
      if (li > 0) {
        // ReLU mask of the layer below (acts[li] is its post-activation).
        for (int i = 0; i < l.in; ++i)
          if (acts[li][i] <= 0.0) prev_delta[i] = 0.0;
      }
      delta = std::move(prev_delta);
    }
  }
  const double inv = 1.0 / static_cast<double>(X.size());
  if (grad)
    for (auto& g : *grad) g *= inv;
  return total * inv;
}

double Mlp::fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                const MlpConfig& config) {
  if (X.empty() || X.size() != y.size()) throw std::invalid_argument("Mlp::fit: bad shapes");
  double pos = 0.0;
  for (const double v : y) pos += v;
  if (pos <= 0.0 || pos >= static_cast<double>(y.size()))
    throw std::invalid_argument("Mlp::fit: labels are single-class");

  build_layout(static_cast<int>(X[0].size()), config.hidden);
  RngStream rng(config.seed);
  for (const auto& l : layers_) {
    const double sd = std::sqrt(2.0 / l.in);
    for (int i = 0; i < l.in * l.out; ++i) params_[l.w_offset + i] = rng.normal(0.0, sd);
  }

  // Validation slice for AUC early stopping.
  std::vector<std::size_t> order(X.size());
  std::iota(order.begin(), order.end(), 0u);
  rng.shuffle(order);
  const auto n_valid = std::max<std::size_t>(
      1, static_cast<std::size_t>(config.valid_fraction * static_cast<double>(X.size())));
  std::vector<std::size_t> valid_idx(order.begin(), order.begin() + n_valid);
  std::vector<std::size_t> train_idx(order.begin() + n_valid, order.end());
  if (train_idx.empty()) throw std::invalid_argument("Mlp::fit: no training rows left");

  // Adam state.
  std::vector<double> m(params_.size(), 0.0), v(params_.size(), 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;

  double best_auc = -1.0;
  std::vector<double> best_params = params_;
  int stale = 0;

  std::vector<std::vector<double>> bx;
  std::vector<double> by, grad;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(train_idx);
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(train_idx.size(), start + static_cast<std::size_t>(config.batch_size));
      bx.clear();
      by.clear();
      for (std::size_t i = start; i < end; ++i) {
        bx.push_back(X[train_idx[i]]);
        by.push_back(y[train_idx[i]]);
      }
      loss_and_grad(bx, by, &grad);
      ++t;
      const double corr1 = 1.0 - std::pow(beta1, t);
      const double corr2 = 1.0 - std::pow(beta2, t);
      for (std::size_t p = 0; p < params_.size(); ++p) {
        m[p] = beta1 * m[p] + (1.0 - beta1) * grad[p];
        v[p] = beta2 * v[p] + (1.0 - beta2) * grad[p] * grad[p];
        params_[p] -= config.learning_rate * (m[p] / corr1) / (std::sqrt(v[p] / corr2) + eps);
      }
    }

    std::vector<double> vs, vy;
    vs.reserve(valid_idx.size());
    for (const auto i : valid_idx) {
      vs.push_back(predict(X[i]));
      vy.push_back(y[i]);
    }
    double epoch_auc;
    try {
      epoch_auc = auc_score(vs, vy);
    } catch (const std::invalid_argument&) {
      epoch_auc = 0.5;  // single-class validation slice
    }
    if (epoch_auc > best_auc) {
      best_auc = epoch_auc;
      best_params = params_;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  params_ = best_params;
  return best_auc;
}

double auc_score(const std::vector<double>& scores, const std::vector<double>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw std::invalid_argument("auc_score: bad shapes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Rank-sum with averaged ranks over ties.
  double rank_sum_pos = 0.0;
  double n_pos = 0.0, n_neg = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] >= 0.5) {
        rank_sum_pos += avg_rank;
        n_pos += 1.0;
      } else {
        n_neg += 1.0;
      }
    }
    i = j;
  }
  if (n_pos == 0.0 || n_neg == 0.0)
    throw std::invalid_argument("auc_score: labels are single-class");
  return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

nlohmann::json Mlp::to_json() const {
  return {{"input_dim", input_dim_}, {"hidden", hidden_}, {"params", params_}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m;
  m.build_layout(j.at("input_dim").get<int>(), j.at("hidden").get<std::vector<int>>());
  m.params_ = j.at("params").get<std::vector<double>>();
  return m;
}

}  // namespace cfrr
