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

#include <vector>

namespace cfrr {

// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Two-sided survival probability of Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

double paired_t_statistic(const std::vector<double>& a, const std::vector<double>& b);

// Two-sided p-value of the paired t-test (n-1 degrees of freedom). Zero
// variance of the differences maps to p = 0 when the means differ, else 1.
double paired_t_test(const std::vector<double>& a, const std::vector<double>& b);

// flag_i = (p_i < alpha / m) with m = p_values.size().
std::vector<bool> bonferroni(const std::vector<double>& p_values, double alpha = 0.05);

// Mean difference over the pooled standard deviation; throws when the
// pooled standard deviation is zero.
double cohens_d(const std::vector<double>& a, const std::vector<double>& b);

double mean(const std::vector<double>& x);
double sample_std(const std::vector<double>& x);  // ddof = 1

}  // namespace cfrr
