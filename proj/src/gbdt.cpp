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

#include "cfrr/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cfrr {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kProbEps = 1e-12;

}  // namespace

void GbdtConfig::validate() const {
  if (n_rounds < 0) throw std::invalid_argument("GbdtConfig: n_rounds must be >= 0");
  if (learning_rate <= 0.0) throw std::invalid_argument("GbdtConfig: learning_rate must be > 0");
  if (max_depth < 1) throw std::invalid_argument("GbdtConfig: max_depth must be >= 1");
  if (leaf_reg < 0.0) throw std::invalid_argument("GbdtConfig: leaf_reg must be >= 0");
  if (eval_interval < 1) throw std::invalid_argument("GbdtConfig: eval_interval must be >= 1");
}

double GbdtTree::predict(std::span<const double> x) const {
  int i = 0;
  while (!nodes[i].is_leaf())
    i = x[nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].leaf_value;
}

double mean_logistic_loss(const std::vector<double>& prob, const std::vector<double>& y) {
  if (prob.size() != y.size() || prob.empty())
    throw std::invalid_argument("mean_logistic_loss: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob[i], kProbEps, 1.0 - kProbEps);
    s += -y[i] * std::log(p) - (1.0 - y[i]) * std::log(1.0 - p);
  }
  return s / static_cast<double>(prob.size());
}

// Level-wise exact split search over presorted feature columns. Rows keep a
// node assignment; each level streams every feature once in sorted order and
// maintains per-node running statistics.
GbdtTree Gbdt::build_tree(const std::vector<std::vector<double>>& X,
                          const std::vector<double>& grad, const std::vector<double>& hess) {
  const std::size_t n = X.size();
  const std::size_t n_features = X[0].size();

  // Presorted row indices per feature (cached across trees would be better;
  // recomputing keeps the builder stateless and is cheap at this scale).
  std::vector<std::vector<std::uint32_t>> sorted(n_features);
  for (std::size_t f = 0; f < n_features; ++f) {
    sorted[f].resize(n);
    std::iota(sorted[f].begin(), sorted[f].end(), 0u);
    std::stable_sort(sorted[f].begin(), sorted[f].end(),
                     [&](std::uint32_t a, std::uint32_t b) { return X[a][f] < X[b][f]; });
  }

  GbdtTree tree;
  std::vector<int> row_node(n, 0);

  struct NodeStats {
    double G = 0.0, H = 0.0;
  };
  const auto leaf_value = [&](const NodeStats& s) {
    return -s.G / (s.H + config_.leaf_reg) * config_.learning_rate;
  };

  NodeStats root;
  for (std::size_t i = 0; i < n; ++i) {
    root.G += grad[i];
    root.H += hess[i];
  }
  tree.nodes.push_back(GbdtNode{-1, 0.0, -1, -1, leaf_value(root)});

  std::vector<int> frontier{0};                // node ids open for splitting
  std::vector<NodeStats> node_stats{root};     // indexed by node id

  struct Candidate {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
    NodeStats left, right;
  };

  for (int depth = 0; depth < config_.max_depth && !frontier.empty(); ++depth) {
    std::vector<Candidate> best(tree.nodes.size());
    struct Running {
      double G = 0.0, H = 0.0;
      double last_value = 0.0;
      bool any = false;
    };

    for (std::size_t f = 0; f < n_features; ++f) {
      std::vector<Running> run(tree.nodes.size());
      for (const std::uint32_t row : sorted[f]) {
        const int node = row_node[row];
        if (node < 0) continue;  // finalized leaf
        Running& r = run[node];
        const double value = X[row][f];
        if (r.any && value > r.last_value) {
          // Candidate split between last_value and value.
          const NodeStats& total = node_stats[node];
          const double Gl = r.G, Hl = r.H;
          const double Gr = total.G - Gl, Hr = total.H - Hl;
          if (Hl >= config_.min_child_hessian && Hr >= config_.min_child_hessian) {
            const double gain = Gl * Gl / (Hl + config_.leaf_reg) +
                                Gr * Gr / (Hr + config_.leaf_reg) -
                                total.G * total.G / (total.H + config_.leaf_reg);
            if (gain > best[node].gain + 1e-12) {
              best[node] = {gain, static_cast<int>(f), 0.5 * (r.last_value + value),
                            {Gl, Hl}, {Gr, Hr}};
            }
          }
        }
        r.G += grad[row];
        r.H += hess[row];
        r.last_value = value;
        r.any = true;
      }
    }

    // Materialize accepted splits, then reassign rows.
    std::vector<int> next_frontier;
    std::vector<bool> splits_applied(tree.nodes.size(), false);
    for (const int node : frontier) {
      const Candidate& c = best[node];
      if (c.feature < 0 || c.gain <= 0.0) continue;
      const int left = static_cast<int>(tree.nodes.size());
      const int right = left + 1;
      tree.nodes.push_back(GbdtNode{-1, 0.0, -1, -1, leaf_value(c.left)});
      tree.nodes.push_back(GbdtNode{-1, 0.0, -1, -1, leaf_value(c.right)});
      node_stats.push_back(c.left);
      node_stats.push_back(c.right);
      tree.nodes[node].feature = c.feature;
      tree.nodes[node].threshold = c.threshold;
      tree.nodes[node].left = left;
      tree.nodes[node].right = right;
      tree.nodes[node].leaf_value = 0.0;
      splits_applied[node] = true;
      next_frontier.push_back(left);
      next_frontier.push_back(right);
    }
    // Every live row sits in a frontier node here: send it to a child if its
    // node split, otherwise finalize it.
    for (std::size_t i = 0; i < n; ++i) {
      const int node = row_node[i];
      if (node < 0) continue;
      if (splits_applied[node]) {
        const GbdtNode& nd = tree.nodes[node];
        row_node[i] = X[i][nd.feature] < nd.threshold ? nd.left : nd.right;
      } else {
        row_node[i] = -1;
      }
    }
    frontier = std::move(next_frontier);
  }
  return tree;
}

void Gbdt::fit(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
               const GbdtConfig& config, const std::vector<std::vector<double>>* eval_X,
               const std::vector<double>* eval_y) {
  config.validate();
  if (X.empty() || X.size() != y.size()) throw std::invalid_argument("Gbdt::fit: bad shapes");
  double pos = 0.0;
  for (const double v : y) pos += v;
  if (pos <= 0.0 || pos >= static_cast<double>(y.size()))
    throw std::invalid_argument("Gbdt::fit: labels are single-class");

  config_ = config;
  trees_.clear();
  train_loss_curve_.clear();
  eval_loglik_curve_.clear();

  const double prior = pos / static_cast<double>(y.size());
  base_score_ = std::log(prior / (1.0 - prior));
  fitted_ = true;

  const std::size_t n = X.size();
  std::vector<double> margin(n, base_score_);
  std::vector<double> grad(n), hess(n), prob(n);

  std::vector<double> eval_margin;
  if (eval_X && eval_y) eval_margin.assign(eval_X->size(), base_score_);
  double best_eval = -std::numeric_limits<double>::infinity();
  int regressions = 0;

  for (int round = 0; round < config.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      prob[i] = p;
      grad[i] = p - y[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    train_loss_curve_.push_back(mean_logistic_loss(prob, y));

    GbdtTree tree = build_tree(X, grad, hess);
    for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict(X[i]);
    trees_.push_back(std::move(tree));

    if (eval_X && eval_y && (round + 1) % config.eval_interval == 0) {
      // Fold in every tree added since the previous evaluation.
      for (std::size_t r = trees_.size() - config.eval_interval; r < trees_.size(); ++r)
        for (std::size_t i = 0; i < eval_X->size(); ++i)
          eval_margin[i] += trees_[r].predict((*eval_X)[i]);
      double ll = 0.0;
      for (std::size_t i = 0; i < eval_X->size(); ++i) {
        const double p = std::clamp(sigmoid(eval_margin[i]), kProbEps, 1.0 - kProbEps);
        ll += (*eval_y)[i] * std::log(p) + (1.0 - (*eval_y)[i]) * std::log(1.0 - p);
      }
      ll /= static_cast<double>(eval_X->size());
      eval_loglik_curve_.push_back(ll);
      if (ll < best_eval - config.eval_tolerance) {
        if (++regressions >= 2) break;  // early-stopping guard
      } else {
        regressions = 0;
      }
      best_eval = std::max(best_eval, ll);
    }
  }
}

void Gbdt::boost_more(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                      int rounds) {
  if (!fitted_) throw std::logic_error("Gbdt::boost_more: model not fitted");
  if (X.empty() || X.size() != y.size())
    throw std::invalid_argument("Gbdt::boost_more: bad shapes");
  const std::size_t n = X.size();
  std::vector<double> margin(n);
  for (std::size_t i = 0; i < n; ++i) margin[i] = raw_score(X[i]);
  std::vector<double> grad(n), hess(n), prob(n);
  for (int round = 0; round < rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      prob[i] = p;
      grad[i] = p - y[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    train_loss_curve_.push_back(mean_logistic_loss(prob, y));
    GbdtTree tree = build_tree(X, grad, hess);
    for (std::size_t i = 0; i < n; ++i) margin[i] += tree.predict(X[i]);
    trees_.push_back(std::move(tree));
  }
}

double Gbdt::raw_score(std::span<const double> x) const {
  if (!fitted_) throw std::logic_error("Gbdt::raw_score: model not fitted");
  double s = base_score_;
  for (const auto& t : trees_) s += t.predict(x);
  return s;
}

double Gbdt::predict_prob(std::span<const double> x) const { return sigmoid(raw_score(x)); }

nlohmann::json Gbdt::to_json() const {
  nlohmann::json j;
  j["base_score"] = base_score_;
  j["n_rounds"] = config_.n_rounds;
  j["learning_rate"] = config_.learning_rate;
  j["max_depth"] = config_.max_depth;
  j["leaf_reg"] = config_.leaf_reg;
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& nd : t.nodes)
      nodes.push_back({{"f", nd.feature},
                       {"t", nd.threshold},
                       {"l", nd.left},
                       {"r", nd.right},
                       {"w", nd.leaf_value}});
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j;
}

Gbdt Gbdt::from_json(const nlohmann::json& j) {
  Gbdt g;
  g.base_score_ = j.at("base_score").get<double>();
  g.config_.n_rounds = j.at("n_rounds").get<int>();
  g.config_.learning_rate = j.at("learning_rate").get<double>();
  g.config_.max_depth = j.at("max_depth").get<int>();
  g.config_.leaf_reg = j.at("leaf_reg").get<double>();
  for (const auto& tj : j.at("trees")) {
    GbdtTree t;
    for (const auto& nj : tj)
      t.nodes.push_back(GbdtNode{nj.at("f").get<int>(), nj.at("t").get<double>(),
                                 nj.at("l").get<int>(), nj.at("r").get<int>(),
                                 nj.at("w").get<double>()});
    g.trees_.push_back(std::move(t));
  }
  g.fitted_ = true;
  return g;
}

}  // namespace cfrr
