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

#include "cfrr/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace cfrr {

bool EdgeList::has_timestamps() const {
  return !edges.empty() &&
         std::all_of(edges.begin(), edges.end(),
                     [](const Edge& e) { return e.timestamp.has_value(); });
}

EdgeList load_edgelist(const std::string& path, bool directed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);

  struct RawEdge {
    std::int64_t src, dst;
    std::optional<std::int64_t> t;
  };
  std::vector<RawEdge> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Normalize comma separators; SNAP files use whitespace.
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first)) continue;  // blank line
    if (first[0] == '#') continue;
    std::int64_t src, dst;
    try {
      src = std::stoll(first);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed line");
    }
    if (!(ss >> dst))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed line");
    std::optional<std::int64_t> t;
    std::int64_t tv;
    if (ss >> tv) t = tv;
    std::string extra;
    if (ss >> extra)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": too many fields");
    if (src == dst) continue;  // self-loop
    raw.push_back({src, dst, t});
  }
  if (raw.empty()) throw std::runtime_error(path + ": empty graph");

  // Densify ids in order of first appearance.
  EdgeList out;
  out.directed = directed;
  std::unordered_map<std::int64_t, UserId> dense;
  const auto densify = [&](std::int64_t ext) {
    auto [it, inserted] = dense.emplace(ext, static_cast<UserId>(out.id_map.size()));
    if (inserted) out.id_map.push_back(ext);
    return it->second;
  };
  out.edges.reserve(raw.size());
  for (const auto& e : raw)
    out.edges.push_back({densify(e.src), densify(e.dst), e.t});
  out.n_nodes = static_cast<std::uint32_t>(out.id_map.size());
  return out;
}

std::vector<std::pair<UserId, UserId>> reciprocal_positives(const EdgeList& graph) {
  std::set<std::pair<UserId, UserId>> result;
  if (!graph.directed) {
    for (const auto& e : graph.edges)
      result.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst));
  } else {
    std::set<std::pair<UserId, UserId>> seen;
    for (const auto& e : graph.edges) seen.emplace(e.src, e.dst);
    for (const auto& [s, d] : seen)
      if (s < d && seen.count({d, s})) result.emplace(s, d);
  }
  return {result.begin(), result.end()};
}

std::vector<std::pair<UserId, UserId>> negative_sample(
    const std::vector<std::pair<UserId, UserId>>& positives, const PairSpace& space,
    std::uint64_t seed) {
  const std::uint64_t total = space.num_pairs();
  std::unordered_set<std::uint64_t> taken;
  taken.reserve(positives.size() * 2);
  for (const auto& [u, v] : positives) taken.insert(space.pair_index(u, v));
  const std::uint64_t wanted = positives.size();
  if (wanted > total - taken.size())
    throw std::invalid_argument("negative_sample: not enough non-linked pairs");

  RngStream rng(seed);
  std::vector<std::pair<UserId, UserId>> out;
  out.reserve(wanted);
  if (total <= 4 * (wanted + taken.size())) {
    // Dense case: enumerate the complement and sample without replacement.
    std::vector<std::uint64_t> candidates;
    candidates.reserve(total - taken.size());
    for (std::uint64_t i = 0; i < total; ++i)
      if (!taken.count(i)) candidates.push_back(i);
    const auto picks = rng.sample_without_replacement(candidates.size(), wanted);
    for (const auto p : picks) out.push_back(space.pair_at(candidates[p]));
  } else {
    while (out.size() < wanted) {
      const std::uint64_t i = rng.uniform_int(total);
      if (taken.insert(i).second) out.push_back(space.pair_at(i));
    }
  }
  return out;
}

ExposureLog to_exposure_log(const std::vector<std::pair<UserId, UserId>>& positives,
                            const std::vector<std::pair<UserId, UserId>>& negatives,
                            const PairSpace& space,
                            const std::vector<std::int64_t>* timestamps) {
  if (timestamps && timestamps->size() != positives.size() + negatives.size())
    throw std::invalid_argument("to_exposure_log: timestamp count mismatch");
  ExposureLog log;
  log.pair_space = space;
  std::int64_t t = 0;
  std::size_t i = 0;
  const auto push = [&](const std::pair<UserId, UserId>& pr, double outcome) {
    LoggedInteraction it;
    it.u = pr.first;
    it.v = pr.second;
    it.exposed = true;
    it.outcome = outcome;
    it.timestamp = timestamps ? (*timestamps)[i] : t++;
    ++i;
    log.interactions.push_back(it);
  };
  for (const auto& p : positives) push(p, 1.0);
  for (const auto& n : negatives) push(n, 0.0);
  log.validate();
  return log;
}

EdgeList cap_users(const EdgeList& graph, std::uint32_t max_users, std::uint64_t /*seed*/) {
  if (max_users < 2) throw std::invalid_argument("cap_users: max_users must be >= 2");
  if (max_users >= graph.n_nodes) return graph;

  std::vector<std::uint64_t> degree(graph.n_nodes, 0);
  for (const auto& e : graph.edges) {
    ++degree[e.src];
    ++degree[e.dst];
  }
  std::vector<UserId> order(graph.n_nodes);
  for (UserId i = 0; i < graph.n_nodes; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](UserId a, UserId b) {
    if (degree[a] != degree[b]) return degree[a] > degree[b];
    return a < b;
  });

  std::vector<UserId> remap(graph.n_nodes, UINT32_MAX);
  EdgeList out;
  out.directed = graph.directed;
  out.n_nodes = max_users;
  out.id_map.reserve(max_users);
  for (std::uint32_t rank = 0; rank < max_users; ++rank) {
    const UserId old = order[rank];
    remap[old] = static_cast<UserId>(rank);
    out.id_map.push_back(graph.id_map[old]);
  }
  for (const auto& e : graph.edges) {
    if (remap[e.src] == UINT32_MAX || remap[e.dst] == UINT32_MAX) continue;
    out.edges.push_back({remap[e.src], remap[e.dst], e.timestamp});
  }
  return out;
}

void write_id_map_json(const EdgeList& graph, const std::string& path) {
  nlohmann::json j;
  j["n_nodes"] = graph.n_nodes;
  j["directed"] = graph.directed;
  j["dense_to_external"] = graph.id_map;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace cfrr
