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

#include "cfrr/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cfrr {

std::uint64_t PairSpace::pair_index(UserId u, UserId v) const {
  if (!contains(u, v)) throw std::invalid_argument("pair_index: pair outside space");
  if (!symmetric) return static_cast<std::uint64_t>(u) * side_v + v;
  auto [a, b] = canonical(u, v);
  // Pairs ordered (0,1),(0,2),...,(0,n-1),(1,2),...
  const std::uint64_t n = side_u;
  return static_cast<std::uint64_t>(a) * n - static_cast<std::uint64_t>(a) * (a + 1) / 2 +
         (b - a - 1);
}

std::pair<UserId, UserId> PairSpace::pair_at(std::uint64_t index) const {
  if (index >= num_pairs()) throw std::invalid_argument("pair_at: index out of range");
  if (!symmetric) {
    return {static_cast<UserId>(index / side_v), static_cast<UserId>(index % side_v)};
  }
  const std::uint64_t n = side_u;
  UserId a = 0;
  std::uint64_t row = n - 1;  // pairs with first element a
  while (index >= row) {
    index -= row;
    ++a;
    --row;
  }
  return {a, static_cast<UserId>(a + 1 + index)};
}

std::size_t ExposureLog::exposed_count() const {
  std::size_t c = 0;
  for (const auto& it : interactions)
    if (it.exposed) ++c;
  return c;
}

void ExposureLog::validate() const {
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const auto& it = interactions[i];
    if (it.exposed != it.outcome.has_value())
      throw std::invalid_argument("log row " + std::to_string(i) +
                                  ": outcome must be present iff exposed");
    if (it.outcome && (*it.outcome < 0.0 || *it.outcome > 1.0))
      throw std::invalid_argument("log row " + std::to_string(i) + ": outcome outside [0,1]");
    if (pair_space.symmetric) {
      if (it.u == it.v)
        throw std::invalid_argument("log row " + std::to_string(i) +
                                    ": self-pair in symmetric space");
      if (it.u >= pair_space.side_u || it.v >= pair_space.side_u)
        throw std::invalid_argument("log row " + std::to_string(i) + ": user id out of range");
    } else {
      if (it.u >= pair_space.side_u || it.v >= pair_space.side_v)
        throw std::invalid_argument("log row " + std::to_string(i) + ": user id out of range");
    }
    if (it.timestamp < 0)
      throw std::invalid_argument("log row " + std::to_string(i) + ": negative timestamp");
  }
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && valid_fraction > 0.0 && test_fraction > 0.0))
    throw std::invalid_argument("split fractions must be positive");
  const double s = train_fraction + valid_fraction + test_fraction;
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
}

LogSplits split_log(const ExposureLog& log, const SplitSpec& spec) {
  spec.validate();
  if (log.interactions.empty()) throw std::invalid_argument("split_log: empty log");

  std::vector<std::size_t> idx;
  idx.reserve(log.interactions.size());
  for (std::size_t i = 0; i < log.interactions.size(); ++i)
    if (log.interactions[i].exposed) idx.push_back(i);
  if (idx.empty()) throw std::invalid_argument("split_log: no exposed interactions");

  if (spec.mode == SplitMode::kRandom) {
    RngStream rng(spec.seed);
    rng.shuffle(idx);
  } else {
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return log.interactions[a].timestamp < log.interactions[b].timestamp;
    });
  }

  const std::size_t n = idx.size();
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * n));
  const auto n_valid = static_cast<std::size_t>(std::llround(spec.valid_fraction * n));
  if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n)
    throw std::invalid_argument("split_log: a split would receive zero interactions");

  LogSplits out;
  out.train.pair_space = out.valid.pair_space = out.test.pair_space = log.pair_space;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& it = log.interactions[idx[i]];
    if (i < n_train)
      out.train.interactions.push_back(it);
    else if (i < n_train + n_valid)
      out.valid.interactions.push_back(it);
    else
      out.test.interactions.push_back(it);
  }
  return out;
}

namespace {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void write_log_csv(const ExposureLog& log, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "u,v,exposed,outcome,timestamp\n";
  for (const auto& it : log.interactions) {
    out << it.u << ',' << it.v << ',' << (it.exposed ? 1 : 0) << ',';
    if (it.outcome) out << format_double(*it.outcome);
    out << ',' << it.timestamp << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ExposureLog read_log_csv(const std::string& path, const PairSpace& space) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty log file: " + path);
  if (line != "u,v,exposed,outcome,timestamp")
    throw std::runtime_error(path + ": unexpected header '" + line + "'");

  ExposureLog log;
  log.pair_space = space;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<std::string, 5> fields;
    std::size_t field = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (field >= fields.size())
          throw std::runtime_error(path + ":" + std::to_string(lineno) + ": too many fields");
        fields[field++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (field != 5)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 5 fields");
    LoggedInteraction it;
    try {
      it.u = static_cast<UserId>(std::stoul(fields[0]));
      it.v = static_cast<UserId>(std::stoul(fields[1]));
      it.exposed = std::stoi(fields[2]) != 0;
      if (!fields[3].empty()) it.outcome = std::stod(fields[3]);
      it.timestamp = std::stoll(fields[4]);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed record");
    }
    if (it.exposed != it.outcome.has_value())
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": outcome must be present iff exposed");
    log.interactions.push_back(it);
  }
  log.validate();
  return log;
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

}  // namespace cfrr
