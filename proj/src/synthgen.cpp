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

#include "cfrr/synthgen.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace cfrr {

namespace {

constexpr std::uint32_t kEnumerationLimit = 20000;  // users; beyond this, sample pairs

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Solves f(x) = target for monotone increasing f by bisection on [lo, hi].
double bisect(const std::function<double(double)>& f, double target, double lo, double hi) {
  for (int iter = 0; iter < 200 && f(lo) > target; ++iter) lo -= (hi - lo);
  for (int iter = 0; iter < 200 && f(hi) < target; ++iter) hi += (hi - lo);
  for (int iter = 0; iter < 100; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void SynthConfig::validate() const {
  if (n_users < 2) throw std::invalid_argument("SynthConfig: n_users must be >= 2");
  if (latent_dim < 1) throw std::invalid_argument("SynthConfig: latent_dim must be >= 1");
  if (target_log_size < 1) throw std::invalid_argument("SynthConfig: target_log_size must be >= 1");
  if (bias_strength < 0.0) throw std::invalid_argument("SynthConfig: bias_strength must be >= 0");
  if (popularity_spread < 0.0)
    throw std::invalid_argument("SynthConfig: popularity_spread must be >= 0");
  if (!(target_match_rate > 0.0 && target_match_rate < 1.0))
    throw std::invalid_argument("SynthConfig: target_match_rate must be in (0,1)");
  if (target_log_size > PairSpace::make_symmetric(n_users).num_pairs())
    throw std::invalid_argument("SynthConfig: target_log_size exceeds pair count");
}

LatentWorld generate_world(const SynthConfig& config) {
  config.validate();
  const std::uint32_t n = config.n_users;
  const std::uint32_t d = config.latent_dim;

  LatentWorld world;
  world.n_users = n;
  world.latent_dim = d;
  world.pair_space = PairSpace::make_symmetric(n);
  world.bias_strength = config.bias_strength;
  world.factors.resize(static_cast<std::size_t>(n) * d);

  RngStream master(config.seed);
  RngStream mean_rng = master.derive(0);
  RngStream factor_rng = master.derive(1);
  const double coord_sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::uint32_t u = 0; u < n; ++u) {
    const double mu = mean_rng.normal(0.0, config.popularity_spread);
    for (std::uint32_t k = 0; k < d; ++k)
      world.factors[static_cast<std::size_t>(u) * d + k] = factor_rng.normal(mu, coord_sd);
  }

  // Pair sample used for calibration and popularity. Full enumeration up to
  // kEnumerationLimit users, uniform pair sample beyond that.
  world.pairs_subsampled = n > kEnumerationLimit;
  std::vector<std::pair<UserId, UserId>> pairs;
  if (!world.pairs_subsampled) {
    pairs.reserve(world.pair_space.num_pairs());
    for (UserId u = 0; u < n; ++u)
      for (UserId v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
  } else {
    RngStream pair_rng = master.derive(2);
    const std::uint64_t n_samples = 2'000'000;
    const auto idx = pair_rng.sample_without_replacement(world.pair_space.num_pairs(), n_samples);
    pairs.reserve(idx.size());
    for (const auto i : idx) pairs.push_back(world.pair_space.pair_at(i));
  }

  std::vector<double> dots(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i)
    dots[i] = dot(world.factor(pairs[i].first), world.factor(pairs[i].second));

  // b0: mean true match probability == target_match_rate.
  const auto mean_match = [&](double b0) {
    double s = 0.0;
    for (const double z : dots) s += sigmoid(z + b0);
    return s / static_cast<double>(dots.size());
  };
  world.match_offset = bisect(mean_match, config.target_match_rate, -30.0, 30.0);

  // Popularity: total true acceptance probability per user.
  world.popularity.assign(n, 0.0);
  if (!world.pairs_subsampled) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double r = sigmoid(dots[i] + world.match_offset);
      world.popularity[pairs[i].first] += r;
      world.popularity[pairs[i].second] += r;
    }
  } else {
    // Scale the sampled sums up to the full pair space.
    std::vector<double> counts(n, 0.0);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double r = sigmoid(dots[i] + world.match_offset);
      world.popularity[pairs[i].first] += r;
      world.popularity[pairs[i].second] += r;
      counts[pairs[i].first] += 1.0;
      counts[pairs[i].second] += 1.0;
    }
    for (std::uint32_t u = 0; u < n; ++u)
      if (counts[u] > 0.0) world.popularity[u] *= static_cast<double>(n - 1) / counts[u];
  }

  // Standardized popularity feeds the logging policy.
  double pop_mean = 0.0;
  for (const double p : world.popularity) pop_mean += p;
  pop_mean /= n;
  double pop_var = 0.0;
  for (const double p : world.popularity) pop_var += (p - pop_mean) * (p - pop_mean);
  const double pop_sd = std::sqrt(pop_var / n);
  world.popularity_z.resize(n);
  for (std::uint32_t u = 0; u < n; ++u)
    world.popularity_z[u] = pop_sd > 0.0 ? (world.popularity[u] - pop_mean) / pop_sd : 0.0;

  // c0: expected exposure count over the pair space == target_log_size.
  const double scale = static_cast<double>(world.pair_space.num_pairs()) /
                       static_cast<double>(pairs.size());
  const auto expected_exposures = [&](double c0) {
    double s = 0.0;
    for (const auto& [u, v] : pairs)
      s += sigmoid(config.bias_strength * (world.popularity_z[u] + world.popularity_z[v]) + c0);
    return s * scale;
  };
  world.exposure_offset =
      bisect(expected_exposures, static_cast<double>(config.target_log_size), -40.0, 40.0);

  return world;
}

double true_match_prob(const LatentWorld& world, UserId u, UserId v) {
  if (u == v) throw std::invalid_argument("true_match_prob: u == v");
  if (u >= world.n_users || v >= world.n_users)
    throw std::invalid_argument("true_match_prob: user id out of range");
  return sigmoid(dot(world.factor(u), world.factor(v)) + world.match_offset);
}

double logging_propensity(const LatentWorld& world, UserId u, UserId v,
                          const SynthConfig& config) {
  if (u == v) throw std::invalid_argument("logging_propensity: u == v");
  if (u >= world.n_users || v >= world.n_users)
    throw std::invalid_argument("logging_propensity: user id out of range");
  return sigmoid(config.bias_strength * (world.popularity_z[u] + world.popularity_z[v]) +
                 world.exposure_offset);
}

ExposureLog simulate_log(const LatentWorld& world, const SynthConfig& config,
                         const SimulateOptions& options) {
  if (options.sweeps < 1) throw std::invalid_argument("simulate_log: sweeps must be >= 1");
  ExposureLog log;
  log.pair_space = world.pair_space;
  RngStream rng = RngStream(config.seed).derive(3);
  std::int64_t t = 0;
  const std::uint32_t n = world.n_users;
  for (int sweep = 0; sweep < options.sweeps; ++sweep) {
    for (UserId u = 0; u < n; ++u) {
      for (UserId v = u + 1; v < n; ++v) {
        const double theta = logging_propensity(world, u, v, config);
        if (!rng.bernoulli(theta)) continue;
        LoggedInteraction it;
        it.u = u;
        it.v = v;
        it.exposed = true;
        it.outcome = rng.bernoulli(true_match_prob(world, u, v)) ? 1.0 : 0.0;
        it.timestamp = t++;
        log.interactions.push_back(it);
      }
    }
  }
  return log;
}

}  // namespace cfrr
