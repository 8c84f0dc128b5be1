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
#include <tuple>
#include <vector>

#include "cfrr/rng.hpp"

namespace cfrr {

// Dense user index in [0, n_users).
using UserId = std::uint32_t;

// The space of candidate pairs. When symmetric, U = V, pairs are unordered
// and u != v; (u,v) and (v,u) canonicalize to (min,max).
struct PairSpace {
  std::uint32_t side_u = 0;
  std::uint32_t side_v = 0;
  bool symmetric = true;

  static PairSpace make_symmetric(std::uint32_t n) {
    return PairSpace{n, n, true};
  }
  static PairSpace make_bipartite(std::uint32_t n, std::uint32_t m) {
    return PairSpace{n, m, false};
  }

  std::uint64_t num_pairs() const {
    if (symmetric) {
      const std::uint64_t n = side_u;
      return n * (n - 1) / 2;
    }
    return static_cast<std::uint64_t>(side_u) * side_v;
  }

  std::pair<UserId, UserId> canonical(UserId u, UserId v) const {
    if (symmetric && u > v) return {v, u};
    return {u, v};
  }

  bool contains(UserId u, UserId v) const {
    if (symmetric) return u < side_u && v < side_u && u != v;
    return u < side_u && v < side_v;
  }

  // Bijection between canonical pairs and [0, num_pairs()).
  std::uint64_t pair_index(UserId u, UserId v) const;
  std::pair<UserId, UserId> pair_at(std::uint64_t index) const;

  bool operator==(const PairSpace&) const = default;
};

// One logged tuple (u, v, O, r, t). `outcome` is present iff `exposed`.
struct LoggedInteraction {
  UserId u = 0;
  UserId v = 0;
  bool exposed = false;
  std::optional<double> outcome;
  std::int64_t timestamp = 0;
};

struct ExposureLog {
  std::vector<LoggedInteraction> interactions;
  PairSpace pair_space;

  std::size_t size() const { return interactions.size(); }
  std::size_t exposed_count() const;
  // Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

enum class SplitMode { kRandom, kTemporal };

struct SplitSpec {
  SplitMode mode = SplitMode::kRandom;
  double train_fraction = 0.7;
  double valid_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LogSplits {
  ExposureLog train;
  ExposureLog valid;
  ExposureLog test;
};

// Partitions the exposed interactions of `log` into train/valid/test.
// Random mode shuffles with the spec seed; temporal mode stable-sorts by
// timestamp and cuts by counts. Unexposed rows are not carried into splits.
LogSplits split_log(const ExposureLog& log, const SplitSpec& spec);

// CSV serialization: header "u,v,exposed,outcome,timestamp", one record per
// line, outcome field empty when not exposed.
void write_log_csv(const ExposureLog& log, const std::string& path);
ExposureLog read_log_csv(const std::string& path, const PairSpace& space);

// FNV-1a over bytes; used for config/file fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(const std::string& s);
std::string hash_hex(std::uint64_t h);
std::uint64_t hash_file(const std::string& path);

}  // namespace cfrr
