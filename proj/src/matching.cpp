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

#include "cfrr/matching.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cfrr {

namespace {

// rank[side][id] = position in the preference list, INT_MAX if unacceptable.
std::vector<std::vector<int>> build_ranks(const PreferenceProfile& prefs, std::size_t other_n) {
  std::vector<std::vector<int>> ranks(prefs.size(),
                                      std::vector<int>(other_n, std::numeric_limits<int>::max()));
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    for (std::size_t pos = 0; pos < prefs[i].size(); ++pos) {
      const int other = prefs[i][pos];
      if (other < 0 || static_cast<std::size_t>(other) >= other_n)
        throw std::invalid_argument("preference list references an id outside the other side");
      if (ranks[i][other] != std::numeric_limits<int>::max())
        throw std::invalid_argument("preference list contains a duplicate entry");
      ranks[i][other] = static_cast<int>(pos);
    }
  }
  return ranks;
}

}  // namespace

TopKResult topk_retrieval(const ScoringModel& model, UserId user,
                          std::span<const UserId> candidates, std::size_t k) {
  TopKResult result;
  std::vector<std::pair<double, UserId>> scored;
  scored.reserve(candidates.size());
  for (const UserId v : candidates) {
    if (v == user) throw std::invalid_argument("topk_retrieval: candidate equals user");
    scored.emplace_back(model.score(user, v), v);
  }
  if (k > scored.size()) {
    result.truncated = true;
    k = scored.size();
  }
  const auto cmp = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), cmp);
  result.ids.reserve(k);
  for (std::size_t i = 0; i < k; ++i) result.ids.push_back(scored[i].second);
  return result;
}

std::optional<int> Matching::partner_of_proposer(int p) const {
  for (const auto& [a, b] : pairs)
    if (a == p) return b;
  return std::nullopt;
}

std::optional<int> Matching::partner_of_receiver(int r) const {
  for (const auto& [a, b] : pairs)
    if (b == r) return a;
  return std::nullopt;
}

Matching gale_shapley(const PreferenceProfile& proposers, const PreferenceProfile& receivers) {
  const std::size_t n_p = proposers.size();
  const std::size_t n_r = receivers.size();
  build_ranks(proposers, n_r);  // validates proposer lists
  const auto receiver_rank = build_ranks(receivers, n_p);

  std::vector<std::size_t> next_proposal(n_p, 0);
  std::vector<int> engaged_to(n_r, -1);  // receiver -> proposer
  std::vector<int> free_stack;
  for (std::size_t p = 0; p < n_p; ++p) free_stack.push_back(static_cast<int>(p));

  while (!free_stack.empty()) {
    const int p = free_stack.back();
    if (next_proposal[p] >= proposers[p].size()) {
      free_stack.pop_back();  // exhausted list, stays unmatched
      continue;
    }
    const int r = proposers[p][next_proposal[p]++];
    // Receiver entertains only proposers on its own list.
    if (receiver_rank[r][p] == std::numeric_limits<int>::max()) continue;
    const int current = engaged_to[r];
    if (current < 0) {
      engaged_to[r] = p;
      free_stack.pop_back();
    } else if (receiver_rank[r][p] < receiver_rank[r][current]) {
      engaged_to[r] = p;
      free_stack.pop_back();
      free_stack.push_back(current);
    }
  }

  Matching m;
  std::vector<bool> proposer_matched(n_p, false);
  for (std::size_t r = 0; r < n_r; ++r) {
    if (engaged_to[r] >= 0) {
      m.pairs.emplace_back(engaged_to[r], static_cast<int>(r));
      proposer_matched[engaged_to[r]] = true;
    } else {
      m.unmatched_receivers.push_back(static_cast<int>(r));
    }
  }
  for (std::size_t p = 0; p < n_p; ++p)
    if (!proposer_matched[p]) m.unmatched_proposers.push_back(static_cast<int>(p));
  std::sort(m.pairs.begin(), m.pairs.end());
  return m;
}

std::vector<std::pair<int, int>> check_stability(const Matching& matching,
                                                 const PreferenceProfile& proposers,
                                                 const PreferenceProfile& receivers) {
  const std::size_t n_p = proposers.size();
  const std::size_t n_r = receivers.size();
  const auto p_rank = build_ranks(proposers, n_r);
  const auto r_rank = build_ranks(receivers, n_p);
  constexpr int kUnacceptable = std::numeric_limits<int>::max();

  std::vector<int> partner_p(n_p, -1), partner_r(n_r, -1);
  for (const auto& [p, r] : matching.pairs) {
    partner_p[p] = r;
    partner_r[r] = p;
  }

  std::vector<std::pair<int, int>> blocking;
  for (std::size_t p = 0; p < n_p; ++p) {
    for (const int r : proposers[p]) {
      if (partner_p[p] == r) continue;
      if (r_rank[r][p] == kUnacceptable) continue;  // not mutually acceptable
      // p prefers r over p's current state?
      const int p_current = partner_p[p];
      const int p_rank_new = p_rank[p][r];
      const bool p_prefers =
          p_current < 0 || p_rank_new < p_rank[p][p_current];
      if (!p_prefers) continue;
      // r prefers p over r's current state?
      const int r_current = partner_r[r];
      const bool r_prefers =
          r_current < 0 || r_rank[r][p] < r_rank[r][r_current];
      if (r_prefers) blocking.emplace_back(static_cast<int>(p), r);
    }
  }
  return blocking;
}

namespace {

// Potential-based assignment method: minimum-cost perfect matching of rows
// onto columns, rows <= cols. 1-indexed internals.
std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const std::size_t m = cost[0].size();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = static_cast<int>(i);
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, std::numeric_limits<double>::infinity());
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = static_cast<int>(j0);
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = static_cast<int>(j) - 1;
  return row_to_col;
}

}  // namespace

Matching max_weight_matching(const std::vector<std::vector<double>>& weights,
                             std::size_t exact_threshold) {
  if (weights.empty() || weights[0].empty())
    throw std::invalid_argument("max_weight_matching: empty weight matrix");
  const std::size_t rows = weights.size();
  const std::size_t cols = weights[0].size();
  double max_w = 0.0;
  for (const auto& row : weights) {
    if (row.size() != cols)
      throw std::invalid_argument("max_weight_matching: ragged weight matrix");
    for (const double w : row) {
      if (w < 0.0) throw std::invalid_argument("max_weight_matching: negative weight");
      max_w = std::max(max_w, w);
    }
  }

  Matching m;
  std::vector<int> row_to_col(rows, -1);
  if (rows <= exact_threshold && cols <= exact_threshold) {
    // Maximize by minimizing (max_w - w); transpose when rows > cols.
    const bool transpose = rows > cols;
    const std::size_t n = transpose ? cols : rows;
    const std::size_t k = transpose ? rows : cols;
    std::vector<std::vector<double>> cost(n, std::vector<double>(k));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < k; ++j)
        cost[i][j] = max_w - (transpose ? weights[j][i] : weights[i][j]);
    const auto assign = hungarian_min_cost(cost);
    for (std::size_t i = 0; i < n; ++i) {
      if (assign[i] < 0) continue;
      if (transpose)
        row_to_col[assign[i]] = static_cast<int>(i);
      else
        row_to_col[i] = assign[i];
    }
  } else {
    m.approximate = true;
    struct Entry {
      double w;
      std::size_t r, c;
    };
    std::vector<Entry> entries;
    entries.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c)
        if (weights[r][c] > 0.0) entries.push_back({weights[r][c], r, c});
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      if (a.w != b.w) return a.w > b.w;
      if (a.r != b.r) return a.r < b.r;
      return a.c < b.c;
    });
    std::vector<bool> row_used(rows, false), col_used(cols, false);
    for (const auto& e : entries) {
      if (row_used[e.r] || col_used[e.c]) continue;
      row_used[e.r] = col_used[e.c] = true;
      row_to_col[e.r] = static_cast<int>(e.c);
    }
  }

  std::vector<bool> col_matched(cols, false);
  for (std::size_t r = 0; r < rows; ++r) {
    // Zero-weight assignments add nothing; report them unmatched.
    if (row_to_col[r] >= 0 && weights[r][row_to_col[r]] > 0.0) {
      m.pairs.emplace_back(static_cast<int>(r), row_to_col[r]);
      col_matched[row_to_col[r]] = true;
    } else {
      m.unmatched_proposers.push_back(static_cast<int>(r));
    }
  }
  for (std::size_t c = 0; c < cols; ++c)
    if (!col_matched[c]) m.unmatched_receivers.push_back(static_cast<int>(c));
  return m;
}

double matching_total_weight(const Matching& matching,
                             const std::vector<std::vector<double>>& weights) {
  double total = 0.0;
  for (const auto& [r, c] : matching.pairs) total += weights[r][c];
  return total;
}

PreferenceProfile preferences_from_scores(const ScoringModel& model,
                                          std::span<const UserId> side,
                                          std::span<const UserId> other_side, std::size_t k) {
  PreferenceProfile prefs(side.size());
  for (std::size_t i = 0; i < side.size(); ++i) {
    std::vector<std::pair<double, int>> scored;
    scored.reserve(other_side.size());
    for (std::size_t j = 0; j < other_side.size(); ++j) {
      if (side[i] == other_side[j]) continue;
      scored.emplace_back(model.score(side[i], other_side[j]), static_cast<int>(j));
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    const std::size_t take = std::min(k, scored.size());
    prefs[i].reserve(take);
    for (std::size_t t = 0; t < take; ++t) prefs[i].push_back(scored[t].second);
  }
  return prefs;
}

}  // namespace cfrr
