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

#include "cfrr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace cfrr {

namespace {

// Per-user positive partners above the relevance threshold.
std::vector<std::unordered_set<UserId>> positives_by_user(const ExposureLog& log,
                                                          std::uint32_t n_users,
                                                          double threshold) {
  std::vector<std::unordered_set<UserId>> pos(n_users);
  for (const auto& it : log.interactions) {
    if (!it.exposed || !it.outcome || *it.outcome < threshold) continue;
    if (it.u < n_users && it.v < n_users) {
      pos[it.u].insert(it.v);
      if (log.pair_space.symmetric) pos[it.v].insert(it.u);
    }
  }
  return pos;
}

}  // namespace

std::vector<CandidateSet> build_candidate_sets(const ExposureLog& test,
                                               const ExposureLog& train,
                                               std::uint32_t n_users,
                                               const EvalProtocol& protocol) {
  const auto test_pos = positives_by_user(test, n_users, protocol.relevance_threshold);
  const auto train_pos = positives_by_user(train, n_users, protocol.relevance_threshold);

  std::vector<UserId> eligible;
  for (UserId u = 0; u < n_users; ++u)
    if (!test_pos[u].empty()) eligible.push_back(u);
  if (eligible.empty()) throw std::invalid_argument("build_candidate_sets: no eligible users");

  RngStream rng(protocol.seed);
  std::vector<UserId> chosen;
  if (eligible.size() <= protocol.n_eval_users) {
    chosen = eligible;
  } else {
    const auto picks =
        rng.sample_without_replacement(eligible.size(), protocol.n_eval_users);
    chosen.reserve(picks.size());
    for (const auto i : picks) chosen.push_back(eligible[i]);
    std::sort(chosen.begin(), chosen.end());
  }

  std::vector<CandidateSet> sets;
  sets.reserve(chosen.size());
  for (const UserId u : chosen) {
    CandidateSet set;
    set.user = u;
    for (const UserId v : test_pos[u]) {
      set.candidates.push_back(v);
      set.relevance.push_back(1);
    }
    // Hash-set iteration order is not deterministic across builds.
    std::sort(set.candidates.begin(), set.candidates.end());

    std::vector<UserId> allowed;
    allowed.reserve(n_users);
    for (UserId v = 0; v < n_users; ++v) {
      if (v == u || test_pos[u].count(v) || train_pos[u].count(v)) continue;
      allowed.push_back(v);
    }
    if (protocol.candidates_per_user == 0 || allowed.size() <= protocol.candidates_per_user) {
      for (const UserId v : allowed) {
        set.candidates.push_back(v);
        set.relevance.push_back(0);
      }
    } else {
      RngStream user_rng = rng.derive(u);
      const auto picks =
          user_rng.sample_without_replacement(allowed.size(), protocol.candidates_per_user);
      std::vector<std::uint64_t> sorted_picks(picks.begin(), picks.end());
      std::sort(sorted_picks.begin(), sorted_picks.end());
      for (const auto i : sorted_picks) {
        set.candidates.push_back(allowed[i]);
        set.relevance.push_back(0);
      }
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

RankedList rank_candidates(const ScoringModel& model, const CandidateSet& set) {
  std::vector<double> scores(set.candidates.size());
  for (std::size_t i = 0; i < set.candidates.size(); ++i)
    scores[i] = model.score(set.user, set.candidates[i]);
  std::vector<std::size_t> order(set.candidates.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return set.candidates[a] < set.candidates[b];
  });
  RankedList list;
  list.user = set.user;
  list.ranked.reserve(order.size());
  list.relevance.reserve(order.size());
  for (const auto i : order) {
    list.ranked.push_back(set.candidates[i]);
    list.relevance.push_back(set.relevance[i]);
  }
  return list;
}

std::vector<RankedList> build_eval_lists(const ScoringModel& model, const ExposureLog& test,
                                         const ExposureLog& train,
                                         const EvalProtocol& protocol) {
  const auto sets = build_candidate_sets(test, train, model.n_users, protocol);
  std::vector<RankedList> lists;
  lists.reserve(sets.size());
  for (const auto& set : sets) lists.push_back(rank_candidates(model, set));
  return lists;
}

double ndcg_at_k(const RankedList& list, int k) {
  if (list.ranked.empty()) throw std::invalid_argument("ndcg_at_k: empty list");
  std::size_t n_pos = 0;
  for (const char r : list.relevance) n_pos += r != 0;
  if (n_pos == 0) return 0.0;
  double dcg = 0.0;
  const auto kk = static_cast<std::size_t>(k);
  for (std::size_t i = 0; i < list.ranked.size() && i < kk; ++i)
    if (list.relevance[i]) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  double idcg = 0.0;
  for (std::size_t i = 0; i < n_pos && i < kk; ++i)
    idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / idcg;
}

double mrr(std::span<const RankedList> lists) {
  if (lists.empty()) return 0.0;
  double total = 0.0;
  for (const auto& list : lists) {
    for (std::size_t i = 0; i < list.ranked.size(); ++i) {
      if (list.relevance[i]) {
        total += 1.0 / static_cast<double>(i + 1);
        break;
      }
    }
  }
  return total / static_cast<double>(lists.size());
}

double coverage_at_k(std::span<const RankedList> lists, int k, std::uint32_t total_users) {
  if (total_users < 1) throw std::invalid_argument("coverage_at_k: total_users must be >= 1");
  std::unordered_set<UserId> seen;
  const auto kk = static_cast<std::size_t>(k);
  for (const auto& list : lists)
    for (std::size_t i = 0; i < list.ranked.size() && i < kk; ++i) seen.insert(list.ranked[i]);
  return static_cast<double>(seen.size()) / static_cast<double>(total_users);
}

double gini_sorted(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("gini: empty vector");
  double total = 0.0;
  for (const double v : x) {
    if (v < 0.0) throw std::invalid_argument("gini: negative exposure");
    total += v;
  }
  if (total == 0.0) return 0.0;
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    acc += (2.0 * static_cast<double>(i + 1) - n - 1.0) * sorted[i];
  return acc / (n * total);
}

double gini_pairwise(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("gini: empty vector");
  double total = 0.0;
  for (const double v : x) {
    if (v < 0.0) throw std::invalid_argument("gini: negative exposure");
    total += v;
  }
  if (total == 0.0) return 0.0;
  const double n = static_cast<double>(x.size());
  const double mean = total / n;
  double diff = 0.0;
  for (const double a : x)
    for (const double b : x) diff += std::abs(a - b);
  return diff / (2.0 * n * n * mean);
}

double gini_exposure(std::span<const RankedList> lists, int k, std::uint32_t total_users) {
  if (total_users < 1) throw std::invalid_argument("gini_exposure: total_users must be >= 1");
  std::vector<double> exposure(total_users, 0.0);
  const auto kk = static_cast<std::size_t>(k);
  for (const auto& list : lists)
    for (std::size_t i = 0; i < list.ranked.size() && i < kk; ++i)
      if (list.ranked[i] < total_users) exposure[list.ranked[i]] += 1.0;
  return gini_sorted(exposure);
}

MetricsReport evaluate_model(const ScoringModel& model, const ExposureLog& test,
                             const ExposureLog& train, const EvalProtocol& protocol,
                             std::uint32_t total_users) {
  const auto lists = build_eval_lists(model, test, train, protocol);
  MetricsReport report;
  report.n_eval_users = lists.size();
  double ndcg_sum = 0.0;
  for (const auto& list : lists) ndcg_sum += ndcg_at_k(list, 10);
  report.ndcg_at_10 = ndcg_sum / static_cast<double>(lists.size());
  report.mrr = mrr(lists);
  report.coverage_at_10 = coverage_at_k(lists, 10, total_users);
  report.gini_exposure = gini_exposure(lists, 10, total_users);
  return report;
}

}  // namespace cfrr
