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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "cfrr/core.hpp"
#include "cfrr/rng.hpp"

using namespace cfrr;

namespace {

ExposureLog make_log(std::uint32_t n_users, const std::vector<LoggedInteraction>& rows) {
  ExposureLog log;
  log.pair_space = PairSpace::make_symmetric(n_users);
  log.interactions = rows;
  return log;
}

LoggedInteraction exposed_row(UserId u, UserId v, double r, std::int64_t t) {
  LoggedInteraction it;
  it.u = u;
  it.v = v;
  it.exposed = true;
  it.outcome = r;
  it.timestamp = t;
  return it;
}

}  // namespace

TEST_CASE("pair space canonicalization and enumeration") {
  PairSpace space = PairSpace::make_symmetric(5);
  CHECK(space.num_pairs() == 10);
  CHECK(space.canonical(3, 1) == std::pair<UserId, UserId>{1, 3});
  CHECK(space.canonical(1, 3) == std::pair<UserId, UserId>{1, 3});

  // pair_index is a bijection onto [0, num_pairs).
  std::set<std::uint64_t> seen;
  for (UserId u = 0; u < 5; ++u) {
    for (UserId v = u + 1; v < 5; ++v) {
      const auto idx = space.pair_index(u, v);
      CHECK(idx == space.pair_index(v, u));
      CHECK(idx < space.num_pairs());
      seen.insert(idx);
      CHECK(space.pair_at(idx) == std::pair<UserId, UserId>{u, v});
    }
  }
  CHECK(seen.size() == 10);

  PairSpace bip = PairSpace::make_bipartite(3, 4);
  CHECK(bip.num_pairs() == 12);
  for (std::uint64_t i = 0; i < bip.num_pairs(); ++i) {
    const auto [u, v] = bip.pair_at(i);
    CHECK(bip.pair_index(u, v) == i);
  }
}

TEST_CASE("log validation catches inconsistent rows") {
  auto log = make_log(3, {exposed_row(0, 1, 1.0, 0)});
  CHECK_NOTHROW(log.validate());

  log.interactions[0].outcome.reset();
  CHECK_THROWS_AS(log.validate(), std::invalid_argument);

  log = make_log(3, {exposed_row(1, 1, 1.0, 0)});
  CHECK_THROWS_AS(log.validate(), std::invalid_argument);

  log = make_log(3, {exposed_row(0, 7, 1.0, 0)});
  CHECK_THROWS_AS(log.validate(), std::invalid_argument);
}

TEST_CASE("split_log divisible fractions give exact sizes") {
  std::vector<LoggedInteraction> rows;
  for (int i = 0; i < 10; ++i)
    rows.push_back(exposed_row(static_cast<UserId>(i), static_cast<UserId>(i + 1), 1.0, i));
  const auto log = make_log(12, rows);

  SplitSpec spec;
  spec.seed = 7;
  const auto splits = split_log(log, spec);
  CHECK(splits.train.size() == 7);
  CHECK(splits.valid.size() == 1);
  CHECK(splits.test.size() == 2);
  CHECK(splits.train.pair_space == log.pair_space);
}

TEST_CASE("split_log temporal mode cuts at timestamp quantiles") {
  std::vector<LoggedInteraction> rows;
  // Insert out of order; the split must sort by timestamp.
  for (const int t : {5, 0, 9, 3, 1, 7, 2, 8, 4, 6})
    rows.push_back(exposed_row(static_cast<UserId>(t), static_cast<UserId>(t + 1), 0.0, t));
  const auto log = make_log(12, rows);

  SplitSpec spec;
  spec.mode = SplitMode::kTemporal;
  const auto splits = split_log(log, spec);
  std::set<std::int64_t> train_ts, valid_ts, test_ts;
  for (const auto& it : splits.train.interactions) train_ts.insert(it.timestamp);
  for (const auto& it : splits.valid.interactions) valid_ts.insert(it.timestamp);
  for (const auto& it : splits.test.interactions) test_ts.insert(it.timestamp);
  CHECK(train_ts == std::set<std::int64_t>{0, 1, 2, 3, 4, 5, 6});
  CHECK(valid_ts == std::set<std::int64_t>{7});
  CHECK(test_ts == std::set<std::int64_t>{8, 9});
}

TEST_CASE("split_log is deterministic and a disjoint cover") {
  std::vector<LoggedInteraction> rows;
  RngStream rng(3);
  for (int i = 0; i < 53; ++i) {
    const auto u = static_cast<UserId>(rng.uniform_int(30));
    auto v = static_cast<UserId>(rng.uniform_int(30));
    if (v == u) v = (v + 1) % 30;
    rows.push_back(exposed_row(u, v, rng.bernoulli(0.5) ? 1.0 : 0.0, i));
  }
  // One unexposed row must not leak into any split.
  LoggedInteraction unexposed;
  unexposed.u = 0;
  unexposed.v = 1;
  unexposed.exposed = false;
  unexposed.timestamp = 99;
  rows.push_back(unexposed);
  const auto log = make_log(30, rows);

  SplitSpec spec;
  spec.seed = 11;
  const auto a = split_log(log, spec);
  const auto b = split_log(log, spec);

  const auto key = [](const LoggedInteraction& it) {
    return std::tuple(it.u, it.v, it.timestamp);
  };
  std::multiset<std::tuple<UserId, UserId, std::int64_t>> combined, original;
  for (const auto* part : {&a.train, &a.valid, &a.test}) {
    for (const auto& it : part->interactions) {
      CHECK(it.exposed);
      combined.insert(key(it));
    }
  }
  for (const auto& it : log.interactions)
    if (it.exposed) original.insert(key(it));
  CHECK(combined == original);

  // Determinism: identical partitions on re-run.
  CHECK(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i)
    CHECK(key(a.train.interactions[i]) == key(b.train.interactions[i]));

  SplitSpec other = spec;
  other.seed = 12;
  const auto c = split_log(log, other);
  bool any_difference = c.train.size() != a.train.size();
  for (std::size_t i = 0; !any_difference && i < a.train.size(); ++i)
    any_difference = key(a.train.interactions[i]) != key(c.train.interactions[i]);
  CHECK(any_difference);
}

TEST_CASE("split_log error paths") {
  ExposureLog empty;
  empty.pair_space = PairSpace::make_symmetric(3);
  SplitSpec spec;
  CHECK_THROWS_AS(split_log(empty, spec), std::invalid_argument);

  // Two interactions cannot fill three splits.
  const auto tiny = make_log(4, {exposed_row(0, 1, 1.0, 0), exposed_row(1, 2, 1.0, 1)});
  CHECK_THROWS_AS(split_log(tiny, spec), std::invalid_argument);

  SplitSpec bad;
  bad.train_fraction = 0.5;
  bad.valid_fraction = 0.2;
  bad.test_fraction = 0.2;
  const auto log = make_log(12, {exposed_row(0, 1, 1.0, 0)});
  CHECK_THROWS_AS(split_log(log, bad), std::invalid_argument);
}

TEST_CASE("seeded rng determinism and ranges") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(1), d(2);
  bool differ = false;
  for (int i = 0; i < 10 && !differ; ++i) differ = c.next_u64() != d.next_u64();
  CHECK(differ);

  RngStream u(9);
  for (int i = 0; i < 1000; ++i) {
    const double x = u.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }

  // Derived streams are deterministic and distinct from the parent.
  RngStream parent(5);
  RngStream child1 = parent.derive(0);
  RngStream child2 = parent.derive(0);
  RngStream child3 = parent.derive(1);
  CHECK(child1.next_u64() == child2.next_u64());
  CHECK(child1.seed() != child3.seed());
}

TEST_CASE("rng sampling helpers") {
  RngStream rng(17);
  const auto sample = rng.sample_without_replacement(100, 20);
  CHECK(sample.size() == 20);
  std::set<std::uint64_t> unique(sample.begin(), sample.end());
  CHECK(unique.size() == 20);
  for (const auto s : sample) CHECK(s < 100);

  CHECK_THROWS_AS(rng.sample_without_replacement(3, 5), std::invalid_argument);
  CHECK_THROWS_AS(rng.uniform_int(0), std::invalid_argument);
}

TEST_CASE("log csv round-trip and error reporting") {
  const auto dir = std::filesystem::temp_directory_path() / "cfrr_core_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "log.csv").string();

  std::vector<LoggedInteraction> rows = {exposed_row(0, 1, 1.0, 5),
                                         exposed_row(2, 3, 0.0, 6)};
  LoggedInteraction unexposed;
  unexposed.u = 1;
  unexposed.v = 3;
  unexposed.exposed = false;
  unexposed.timestamp = 7;
  rows.push_back(unexposed);
  const auto log = make_log(5, rows);
  write_log_csv(log, path);

  const auto back = read_log_csv(path, log.pair_space);
  REQUIRE(back.size() == log.size());
  for (std::size_t i = 0; i < log.size(); ++i) {
    CHECK(back.interactions[i].u == log.interactions[i].u);
    CHECK(back.interactions[i].v == log.interactions[i].v);
    CHECK(back.interactions[i].exposed == log.interactions[i].exposed);
    CHECK(back.interactions[i].outcome == log.interactions[i].outcome);
    CHECK(back.interactions[i].timestamp == log.interactions[i].timestamp);
  }

  // Malformed rows carry the line number.
  {
    std::ofstream out(path);
    out << "u,v,exposed,outcome,timestamp\n0,1,1,1,0\nbroken line\n";
  }
  try {
    read_log_csv(path, log.pair_space);
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("fnv hashing is stable") {
  CHECK(fnv1a64(std::string("")) == 0xCBF29CE484222325ULL);
  CHECK(fnv1a64(std::string("a")) != fnv1a64(std::string("b")));
  CHECK(hash_hex(0x1234).size() == 16);
}
