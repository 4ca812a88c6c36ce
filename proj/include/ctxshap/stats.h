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

#ifndef CTXSHAP_STATS_H_
#define CTXSHAP_STATS_H_

#include <span>

namespace ctxshap::stats {

double Mean(std::span<const double> values);
// Sample variance with the n - 1 denominator.
double SampleVariance(std::span<const double> values);
double SampleSd(std::span<const double> values);

// Upper tail P(X > x) of the chi-squared distribution.
double ChiSquaredSurvival(double x, double degrees_of_freedom);

struct BartlettResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Bartlett's test for equal variances of two groups (k = 2, one degree of
// freedom). Each group needs at least two values and a positive variance.
BartlettResult BartlettTest(std::span<const double> group_a,
                            std::span<const double> group_b);

}  // namespace ctxshap::stats

#endif  // CTXSHAP_STATS_H_
