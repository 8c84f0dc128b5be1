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

#include "cfrr/core.hpp"
#include "cfrr/objectives.hpp"
#include "cfrr/stats.hpp"

namespace cfrr {

// Per-user evaluation candidates before scoring: held-out positives mixed
// with sampled non-positive candidates.
struct CandidateSet {
  UserId user = 0;
  std::vector<UserId> candidates;
  std::vector<char> relevance;  // aligned with candidates
};

// Candidates ranked by score, descending, ties broken by ascending id.
struct RankedList {
  UserId user = 0;
  std::vector<UserId> ranked;
  std::vector<char> relevance;  // aligned with ranked
};

struct EvalProtocol {
  std::size_t n_eval_users = 1500;
  // Sampled non-positive candidates per user; 0 = full ranking over all
  // eligible candidates.
  std::size_t candidates_per_user = 100;
  double relevance_threshold = 0.5;
  std::uint64_t seed = 0;
};

// Samples up to n_eval_users test users with at least one held-out positive.
// Candidate pools exclude the user itself, the user's training positives,
// and the user's held-out positives (which are added as relevant rows).
std::vector<CandidateSet> build_candidate_sets(const ExposureLog& test,
                                               const ExposureLog& train,
                                               std::uint32_t n_users,
                                               const EvalProtocol& protocol);

RankedList rank_candidates(const ScoringModel& model, const CandidateSet& set);

std::vector<RankedList> build_eval_lists(const ScoringModel& model, const ExposureLog& test,
                                         const ExposureLog& train,
                                         const EvalProtocol& protocol);

double ndcg_at_k(const RankedList& list, int k = 10);
double mrr(std::span<const RankedList> lists);
double coverage_at_k(std::span<const RankedList> lists, int k, std::uint32_t total_users);

// Gini coefficient of top-k appearance counts across all `total_users`
// platform users (zero-exposure users included); 0 when nobody is exposed.
double gini_exposure(std::span<const RankedList> lists, int k, std::uint32_t total_users);

// Two routes to the Gini coefficient of a non-negative vector; the pairwise
// form is the O(n^2) reference, the sorted form the production one.
double gini_pairwise(const std::vector<double>& x);
double gini_sorted(const std::vector<double>& x);

struct MetricsReport {
  double ndcg_at_10 = 0.0;
  double mrr = 0.0;
  double coverage_at_10 = 0.0;
  double gini_exposure = 0.0;
  std::size_t n_eval_users = 0;
};

MetricsReport evaluate_model(const ScoringModel& model, const ExposureLog& test,
                             const ExposureLog& train, const EvalProtocol& protocol,
                             std::uint32_t total_users);

}  // namespace cfrr
