/*
 * Copyright 2026 The ctxshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ctxshap/stats.h"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "ctxshap/error.h"

namespace ctxshap::stats {

double Mean(std::span<const double> values) {
  Require(!values.empty(), ErrorCode::kInput, "mean of an empty sample");
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double SampleVariance(std::span<const double> values) {
  Require(values.size() >= 2, ErrorCode::kSizing,
          "sample variance needs at least two values");
  const double mean = Mean(values);
  double sq = 0.0;
  for (const double v : values) sq += (v - mean) * (v - mean);
  return sq / static_cast<double>(values.size() - 1);
}

double SampleSd(std::span<const double> values) {
  return std::sqrt(SampleVariance(values));
}

double ChiSquaredSurvival(double x, double degrees_of_freedom) {
  Require(degrees_of_freedom > 0.0, ErrorCode::kParameter,
          "degrees of freedom must be positive");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * degrees_of_freedom, 0.5 * x);
}

BartlettResult BartlettTest(std::span<const double> group_a,
                            std::span<const double> group_b) {
  Require(group_a.size() >= 2 && group_b.size() >= 2, ErrorCode::kSizing,
          "Bartlett's test needs at least two values per group");
  const double var_a = SampleVariance(group_a);
  const double var_b = SampleVariance(group_b);
  if (!(var_a > 0.0) || !(var_b > 0.0)) {
    Fail(ErrorCode::kDegenerate,
         "Bartlett's test is undefined for a group with zero variance");
  }
  constexpr int kGroups = 2;
  const double n_a = static_cast<double>(group_a.size());
  const double n_b = static_cast<double>(group_b.size());
  const double dof = n_a + n_b - kGroups;
  const double pooled = ((n_a - 1) * var_a + (n_b - 1) * var_b) / dof;
  const double numerator = dof * std::log(pooled) -
                           (n_a - 1) * std::log(var_a) -
                           (n_b - 1) * std::log(var_b);
  const double correction =
      1.0 + (1.0 / (3.0 * (kGroups - 1))) *
                (1.0 / (n_a - 1) + 1.0 / (n_b - 1) - 1.0 / dof);
  BartlettResult r;
  // Rounding can push the statistic of equal variances slightly negative.
  r.statistic = std::max(0.0, numerator / correction);
  r.p_value = ChiSquaredSurvival(r.statistic, kGroups - 1);
  return r;
}

}  // namespace ctxshap::stats
