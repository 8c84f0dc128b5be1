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
#include <optional>
#include <span>
#include <vector>

#include "cfrr/objectives.hpp"

namespace cfrr {

struct TopKResult {
  std::vector<UserId> ids;  // descending score, ties by ascending id
  bool truncated = false;   // k exceeded the candidate count
};

// k highest-scoring candidates for `user`. Candidates must exclude the user.
TopKResult topk_retrieval(const ScoringModel& model, UserId user,
                          std::span<const UserId> candidates, std::size_t k);

// Per-proposer (or per-receiver) ranked acceptable partners on the opposite
// side, best first. Ids are side-local indices.
using PreferenceProfile = std::vector<std::vector<int>>;

struct Matching {
  // pairs[i] = (proposer, receiver).
  std::vector<std::pair<int, int>> pairs;
  std::vector<int> unmatched_proposers;
  std::vector<int> unmatched_receivers;
  bool approximate = false;  // greedy fallback was used

  std::optional<int> partner_of_proposer(int p) const;
  std::optional<int> partner_of_receiver(int r) const;
};

// Deferred acceptance, proposer-optimal. Preference lists may be truncated;
// users with exhausted lists end unmatched. Duplicate entries or ids outside
// the opposite side are an error.
Matching gale_shapley(const PreferenceProfile& proposers, const PreferenceProfile& receivers);

// All blocking pairs of `matching` w.r.t. the given preferences: mutually
// acceptable pairs not matched together where both strictly prefer each
// other to their current assignment (being unmatched loses to anyone
// acceptable).
std::vector<std::pair<int, int>> check_stability(const Matching& matching,
                                                 const PreferenceProfile& proposers,
                                                 const PreferenceProfile& receivers);

// Maximum-weight bipartite matching over a dense non-negative weight matrix
// (rows x cols). Exact (assignment method) when both sides are within
// exact_threshold, greedy otherwise (flagged via Matching::approximate).
// Zero-weight assignments are reported unmatched.
Matching max_weight_matching(const std::vector<std::vector<double>>& weights,
                             std::size_t exact_threshold = 512);

double matching_total_weight(const Matching& matching,
                             const std::vector<std::vector<double>>& weights);

// Preference profiles from model scores over a bipartition of the user pool,
// truncated to the top `k` entries per user.
PreferenceProfile preferences_from_scores(const ScoringModel& model,
                                          std::span<const UserId> side,
                                          std::span<const UserId> other_side, std::size_t k);

}  // namespace cfrr
