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

namespace cfrr {

struct SynthConfig {
  std::uint32_t n_users = 5000;
  std::uint32_t latent_dim = 16;
  std::uint64_t target_log_size = 50000;
  double bias_strength = 1.0;      // scales popularity's effect on exposure
  double popularity_spread = 0.2;  // std of per-user factor means
  double target_match_rate = 0.1;  // mean true match probability after calibration
  std::uint64_t seed = 0;

  void validate() const;
};

// Ground truth for the simulator: per-user latent factors, per-user
// popularity (total true acceptance probability), and the calibration
// offsets solved at generation time.
struct LatentWorld {
  std::uint32_t n_users = 0;
  std::uint32_t latent_dim = 0;
  std::vector<double> factors;     // n_users x latent_dim, row-major
  std::vector<double> popularity;  // sum over v != u of true_match_prob(u, v)
  std::vector<double> popularity_z;  // standardized popularity
  PairSpace pair_space;
  double match_offset = 0.0;      // b0 in sigma(<f_u, f_v> + b0)
  double exposure_offset = 0.0;   // c0 in the logging propensity
  double bias_strength = 0.0;     // echo of the config used for calibration
  bool pairs_subsampled = false;  // calibration used sampled pairs, not full enumeration

  std::span<const double> factor(UserId u) const {
    return {factors.data() + static_cast<std::size_t>(u) * latent_dim, latent_dim};
  }
};

// Draws per-user means mu_u ~ N(0, popularity_spread), factors
// f_u ~ N(mu_u * 1, I / latent_dim), then solves the match-rate and
// log-size calibration offsets by bisection over the pair space.
LatentWorld generate_world(const SynthConfig& config);

// sigma(<f_u, f_v> + b0); symmetric in (u, v). Throws when u == v.
double true_match_prob(const LatentWorld& world, UserId u, UserId v);

// theta(u,v) = sigma(bias_strength * (pop_z(u) + pop_z(v)) + c0). Strictly
// inside (0,1), so positivity holds by construction. Throws when u == v.
double logging_propensity(const LatentWorld& world, UserId u, UserId v,
                          const SynthConfig& config);

struct SimulateOptions {
  // Number of independent exposure passes over the pair space. Each pass
  // draws exposed ~ Bernoulli(theta) per pair; >1 grows the log for
  // consistency experiments.
  int sweeps = 1;
};

// One Bernoulli exposure draw per pair (per sweep); exposed pairs get
// outcome ~ Bernoulli(R(u,v)) and a timestamp in draw order. Only exposed
// rows are recorded; the true theta table stays recomputable from the world
// via logging_propensity.
ExposureLog simulate_log(const LatentWorld& world, const SynthConfig& config,
                         const SimulateOptions& options = {});

}  // namespace cfrr
