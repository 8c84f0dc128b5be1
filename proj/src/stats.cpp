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

#include "cfrr/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace cfrr {

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("incomplete_beta: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (df <= 0.0) throw std::invalid_argument("student_t_two_sided_p: df must be > 0");
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

double mean(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("mean: empty");
  double s = 0.0;
  for (const double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_std(const std::vector<double>& x) {
  if (x.size() < 2) throw std::invalid_argument("sample_std: need >= 2 values");
  const double m = mean(x);
  double s = 0.0;
  for (const double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double paired_t_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("paired_t_statistic: need equal lengths >= 2");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double sd = sample_std(d);
  if (sd == 0.0) return mean(d) == 0.0 ? 0.0 : INFINITY * (mean(d) > 0 ? 1.0 : -1.0);
  return mean(d) / (sd / std::sqrt(static_cast<double>(d.size())));
}

double paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  const double t = paired_t_statistic(a, b);
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) {
    // Distinguish the all-equal-differences degenerate case.
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    if (sample_std(d) == 0.0) return 1.0;
  }
  return student_t_two_sided_p(t, static_cast<double>(a.size() - 1));
}

std::vector<bool> bonferroni(const std::vector<double>& p_values, double alpha) {
  if (p_values.empty()) throw std::invalid_argument("bonferroni: empty p list");
  const double threshold = alpha / static_cast<double>(p_values.size());
  std::vector<bool> flags(p_values.size());
  for (std::size_t i = 0; i < p_values.size(); ++i) flags[i] = p_values[i] < threshold;
  return flags;
}

double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("cohens_d: need equal lengths >= 2");
  const double va = sample_std(a), vb = sample_std(b);
  const double pooled = std::sqrt((va * va + vb * vb) / 2.0);
  if (pooled == 0.0) throw std::invalid_argument("cohens_d: zero pooled standard deviation");
  return (mean(a) - mean(b)) / pooled;
}

}  // namespace cfrr
