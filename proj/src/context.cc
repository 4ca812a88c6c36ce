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

#include "ctxshap/context.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ctxshap/error.h"
#include "ctxshap/parallel.h"
#include "ctxshap/rng.h"

namespace ctxshap::context {

namespace {

struct Norms {
  double cross = 0.0;
  double a = 0.0;
  double b = 0.0;
};

Norms Accumulate(const double* x, const double* y, const double* w, int n,
                 CosineForm form) {
  Norms s;
  if (form == CosineForm::kWeightedSquares) {
    for (int i = 0; i < n; ++i) {
      s.cross += w[i] * x[i] * y[i];
      s.a += w[i] * x[i] * x[i];
      s.b += w[i] * y[i] * y[i];
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const double wx = w[i] * x[i];
      const double wy = w[i] * y[i];
      s.cross += wx * wy;
      s.a += wx * wx;
      s.b += wy * wy;
    }
  }
  return s;
}

void CheckWeights(const Vector& weights, Eigen::Index n) {
  Require(weights.size() == n, ErrorCode::kShape,
          "weight vector length does not match the samples");
  Require((weights.array() > 0.0).all(), ErrorCode::kInput,
          "similarity weights must be positive");
}

BackgroundSet Gather(const RowMatrix& train_flat, std::vector<int> indices) {
  BackgroundSet bg;
  bg.samples.resize(static_cast<Eigen::Index>(indices.size()), train_flat.cols());
  for (size_t i = 0; i < indices.size(); ++i) {
    bg.samples.row(static_cast<Eigen::Index>(i)) = train_flat.row(indices[i]);
  }
  bg.indices = std::move(indices);
  return bg;
}

}  // namespace

GlobalImportance TransformGfi(const Vector& raw) {
  Require((raw.array() >= 0.0).all(), ErrorCode::kInput,
          "global importances must be nonnegative");
  return {raw, raw.array().exp().matrix()};
}

std::string CosineFormName(CosineForm form) {
  return form == CosineForm::kWeightedSquares ? "weighted-squares"
                                              : "squared-weights";
}

CosineForm ParseCosineForm(const std::string& name) {
  if (name == "weighted-squares") return CosineForm::kWeightedSquares;
  if (name == "squared-weights") return CosineForm::kSquaredWeights;
  Fail(ErrorCode::kParameter, "unknown cosine form '" + name + "'");
}

double WeightedCosine(const Vector& candidate, const Vector& anomaly,
                      const Vector& weights, CosineForm form) {
  Require(candidate.size() == anomaly.size(), ErrorCode::kShape,
          "similarity needs equal-length samples");
  CheckWeights(weights, anomaly.size());
  const Norms s = Accumulate(candidate.data(), anomaly.data(), weights.data(),
                             static_cast<int>(anomaly.size()), form);
  if (s.a <= 0.0 || s.b <= 0.0) {
    Fail(ErrorCode::kUndefined, "similarity of a zero-norm sample");
  }
  const double value = s.cross / (std::sqrt(s.a) * std::sqrt(s.b));
  return std::clamp(value, -1.0, 1.0);
}

std::string SelectionName(Selection s) {
  return s == Selection::kSimilar ? "similar" : "random";
}

Selection ParseSelection(const std::string& name) {
  if (name == "similar") return Selection::kSimilar;
  if (name == "random") return Selection::kRandom;
  Fail(ErrorCode::kParameter, "unknown selection '" + name + "'");
}

std::vector<double> SimilarityScores(const Vector& anomaly,
                                     const RowMatrix& train_flat,
                                     const Vector& weights, CosineForm form,
                                     int workers) {
  Require(train_flat.cols() == anomaly.size(), ErrorCode::kShape,
          "anomaly and training rows differ in length");
  CheckWeights(weights, anomaly.size());
  const int n = static_cast<int>(train_flat.rows());
  const int p = static_cast<int>(anomaly.size());
  const Norms self = Accumulate(anomaly.data(), anomaly.data(), weights.data(),
                                p, form);
  if (self.a <= 0.0) {
    Fail(ErrorCode::kUndefined, "anomaly sample has zero weighted norm");
  }
  const double anomaly_norm = std::sqrt(self.a);
  std::vector<double> scores(n);
  constexpr int kChunk = 256;
  const int chunks = (n + kChunk - 1) / kChunk;
  ParallelFor(chunks, workers, [&](int c) {
    const int end = std::min(n, (c + 1) * kChunk);
    for (int r = c * kChunk; r < end; ++r) {
      const Norms s = Accumulate(train_flat.row(r).data(), anomaly.data(),
                                 weights.data(), p, form);
      if (s.a <= 0.0) {
        Fail(ErrorCode::kUndefined,
             "training row " + std::to_string(r) + " has zero weighted norm");
      }
      scores[r] =
          std::clamp(s.cross / (std::sqrt(s.a) * anomaly_norm), -1.0, 1.0);
    }
  });
  return scores;
}

BackgroundSet SelectBackground(const Vector& anomaly,
                               const RowMatrix& train_flat,
                               const Vector& weights, int k, CosineForm form,
                               int workers) {
  const int n = static_cast<int>(train_flat.rows());
  Require(k >= 1, ErrorCode::kParameter, "background size must be positive");
  if (n < k) {
    Fail(ErrorCode::kSizing, "training set has " + std::to_string(n) +
                                 " rows, fewer than K = " + std::to_string(k) +
                                 "; use a smaller K");
  }
  const std::vector<double> scores =
      SimilarityScores(anomaly, train_flat, weights, form, workers);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int a, int b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(k);
  BackgroundSet bg = Gather(train_flat, order);
  bg.selection = Selection::kSimilar;
  for (const int i : bg.indices) bg.scores.push_back(scores[i]);
  return bg;
}

BackgroundSet RandomBackground(const RowMatrix& train_flat, int k,
                               uint64_t seed) {
  const int n = static_cast<int>(train_flat.rows());
  Require(k >= 1, ErrorCode::kParameter, "background size must be positive");
  if (n < k) {
    Fail(ErrorCode::kSizing, "training set has " + std::to_string(n) +
                                 " rows, fewer than K = " + std::to_string(k));
  }
  Rng rng(seed);
  BackgroundSet bg = Gather(train_flat, rng.SampleWithoutReplacement(n, k));
  bg.selection = Selection::kRandom;
  bg.seed = seed;
  return bg;
}

nlohmann::json BackgroundToJson(const BackgroundSet& bg) {
  nlohmann::json j = {{"anomaly_index", bg.anomaly_index},
                      {"selection", SelectionName(bg.selection)},
                      {"k", bg.size()},
                      {"indices", bg.indices}};
  j["seed"] = bg.seed ? nlohmann::json(*bg.seed) : nlohmann::json();
  j["scores"] = bg.scores.empty() ? nlohmann::json() : nlohmann::json(bg.scores);
  return j;
}

}  // namespace ctxshap::context
