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

#ifndef CTXSHAP_CONTEXT_H_
#define CTXSHAP_CONTEXT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ctxshap/types.h"

// Context-relevant background selection: importance-weighted cosine
// similarity between an anomalous window and every training window, and the
// uniform random comparator.
namespace ctxshap::context {

struct GlobalImportance {
  Vector raw;          // nonnegative, sums to 1 (or all zero)
  Vector transformed;  // exp(raw)
};

GlobalImportance TransformGfi(const Vector& raw);

enum class CosineForm {
  // sum w x y / (sqrt(sum w x^2) sqrt(sum w y^2)), the standard weighted
  // cosine. Default.
  kWeightedSquares,
  // sum (w x)(w y) / (sqrt(sum (w x)^2) sqrt(sum (w y)^2)), the cosine of
  // the weight-scaled samples.
  kSquaredWeights,
};

std::string CosineFormName(CosineForm form);
CosineForm ParseCosineForm(const std::string& name);

double WeightedCosine(const Vector& candidate, const Vector& anomaly,
                      const Vector& weights,
                      CosineForm form = CosineForm::kWeightedSquares);

enum class Selection { kSimilar, kRandom };
std::string SelectionName(Selection s);
Selection ParseSelection(const std::string& name);

struct BackgroundSet {
  RowMatrix samples;         // K x (I * F), unmodified training rows
  std::vector<int> indices;  // training row of each sample
  std::vector<double> scores;  // similarity, empty for random selection
  Selection selection = Selection::kSimilar;
  std::optional<uint64_t> seed;  // random selection only
  int anomaly_index = -1;

  int size() const { return static_cast<int>(indices.size()); }
};

// Similarity of every training row to the anomaly, in row order.
std::vector<double> SimilarityScores(
    const Vector& anomaly, const RowMatrix& train_flat, const Vector& weights,
    CosineForm form = CosineForm::kWeightedSquares, int workers = 1);

// The k most similar training rows, scores non-increasing; equal scores are
// ordered by lower row index.
BackgroundSet SelectBackground(const Vector& anomaly,
                               const RowMatrix& train_flat,
                               const Vector& weights, int k = 100,
                               CosineForm form = CosineForm::kWeightedSquares,
                               int workers = 1);

// Uniform sample of k rows without replacement.
BackgroundSet RandomBackground(const RowMatrix& train_flat, int k,
                               uint64_t seed);

nlohmann::json BackgroundToJson(const BackgroundSet& bg);

}  // namespace ctxshap::context

#endif  // CTXSHAP_CONTEXT_H_
