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
#include <string>
#include <vector>

#include "cfrr/core.hpp"

namespace cfrr {

struct Edge {
  UserId src = 0;
  UserId dst = 0;
  std::optional<std::int64_t> timestamp;
};

// Edge list with ids densified to [0, n). The id map remembers the original
// external ids, index = dense id.
struct EdgeList {
  bool directed = false;
  std::uint32_t n_nodes = 0;
  std::vector<Edge> edges;
  std::vector<std::int64_t> id_map;  // dense id -> external id

  bool has_timestamps() const;
};

// Parses a SNAP-style edge list: whitespace- or comma-separated
// `src dst [t]` lines, `#` comment lines skipped, self-loops dropped.
// Throws with the line number on malformed input; empty graphs are an error.
EdgeList load_edgelist(const std::string& path, bool directed);

// Directed graphs: unordered pairs present in both directions. Undirected
// graphs: all (deduplicated) edges. Result is canonical (min,max), sorted.
std::vector<std::pair<UserId, UserId>> reciprocal_positives(const EdgeList& graph);

// Uniform sample of unordered pairs disjoint from `positives`, without
// replacement, |result| == |positives|.
std::vector<std::pair<UserId, UserId>> negative_sample(
    const std::vector<std::pair<UserId, UserId>>& positives, const PairSpace& space,
    std::uint64_t seed);

// Positives become exposed rows with outcome 1, negatives exposed rows with
// outcome 0. Timestamps come from `timestamps` (aligned with positives ++
// negatives) when provided, else sequentially in input order.
ExposureLog to_exposure_log(const std::vector<std::pair<UserId, UserId>>& positives,
                            const std::vector<std::pair<UserId, UserId>>& negatives,
                            const PairSpace& space,
                            const std::vector<std::int64_t>* timestamps = nullptr);

// Induced subgraph on the max_users highest-degree nodes (ties broken by
// lower id), re-densified. The id map composes with the input's.
EdgeList cap_users(const EdgeList& graph, std::uint32_t max_users, std::uint64_t seed);

void write_id_map_json(const EdgeList& graph, const std::string& path);

}  // namespace cfrr
