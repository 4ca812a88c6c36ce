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

#ifndef CTXSHAP_EXPLAIN_H_
#define CTXSHAP_EXPLAIN_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ctxshap/predictor.h"
#include "ctxshap/types.h"

// Shapley attributions of one flattened window against a background set.
// Absent features take background values (interventional masking); the
// value of a coalition is the mean prediction over the background rows.
namespace ctxshap::explain {

enum class Method { kKernel, kSampling, kPermutation, kExact };

std::string MethodName(Method m);
Method ParseMethod(const std::string& name);

struct ExplainerConfig {
  // Kernel: sampled coalitions. Sampling: permutations. Permutation:
  // forward/reverse permutation pairs.
  int n_samples = 2048;
  uint64_t seed = 0;
  // Kernel SHAP enumerates every coalition up to this many features.
  int enumerate_threshold = 13;
  int step = 0;  // horizon explained (0 = first)
  int workers = 1;
};

struct Attribution {
  Vector phi;
  double phi0 = 0.0;  // base value
  double f_x = 0.0;   // model output at x
  Method method = Method::kExact;
  int64_t n_evals = 0;  // model rows evaluated
  int64_t n_calls = 0;  // batched predict invocations
  int n_samples = 0;
  uint64_t seed = 0;
  Vector std_err;  // per-feature standard error, samplers only
};

inline constexpr int kMaxExactFeatures = 20;

double BaseValue(const predictor::Predictor& model, const RowMatrix& background,
                 int step = 0);

// v(S) with S given as the indices of present features.
double MaskedPrediction(const predictor::Predictor& model, const Vector& x,
                        std::span<const int> present,
                        const RowMatrix& background, int step = 0);

// (F - 1) / (C(F, s) s (F - s)) for 1 <= s <= F - 1.
double KernelWeight(int features, int size);

Attribution KernelShap(const predictor::Predictor& model, const Vector& x,
                       const RowMatrix& background,
                       const ExplainerConfig& config = {});
Attribution ExactShapley(const predictor::Predictor& model, const Vector& x,
                         const RowMatrix& background,
                         const ExplainerConfig& config = {});
Attribution SamplingShap(const predictor::Predictor& model, const Vector& x,
                         const RowMatrix& background,
                         const ExplainerConfig& config = {});
Attribution PermutationShap(const predictor::Predictor& model, const Vector& x,
                            const RowMatrix& background,
                            const ExplainerConfig& config = {});

Attribution Explain(Method method, const predictor::Predictor& model,
                    const Vector& x, const RowMatrix& background,
                    const ExplainerConfig& config = {});

// phi listed with (time_step, feature name) for each flattened index.
nlohmann::json AttributionToJson(const Attribution& a, WindowShape shape,
                                 const std::vector<std::string>& feature_names);

}  // namespace ctxshap::explain

#endif  // CTXSHAP_EXPLAIN_H_
