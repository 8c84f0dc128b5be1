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

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace cfrr {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. All distributions are implemented on top of
// the raw 64-bit output so that sequences are bit-identical across standard
// library versions. Worker streams are derived from a master seed via
// derive(index): child_seed = splitmix64(seed ^ splitmix64(index + 1)).
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 bits of entropy.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), unbiased via rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller. Consumes two uniforms per call; the
  // second variate is discarded to keep the stream state a pure function of
  // the number of calls.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  RngStream derive(std::uint64_t index) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(index + 1)));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct values from [0, n), in random order.
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n,
                                                        std::uint64_t k);

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

inline std::vector<std::uint64_t> RngStream::sample_without_replacement(
    std::uint64_t n, std::uint64_t k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::uint64_t> out;
  out.reserve(k);
  if (k * 3 >= n) {
    std::vector<std::uint64_t> pool(n);
    for (std::uint64_t i = 0; i < n; ++i) pool[i] = i;
    shuffle(pool);
    out.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
    return out;
  }
  // Sparse case: rejection sampling.
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(k);
  while (out.size() < k) {
    const std::uint64_t x = uniform_int(n);
    if (seen.insert(x).second) out.push_back(x);
  }
  return out;
}

inline RngStream seeded_rng(std::uint64_t seed) { return RngStream(seed); }

}  // namespace cfrr
