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

#ifndef CTXSHAP_ANOMALY_H_
#define CTXSHAP_ANOMALY_H_

#include <span>
#include <string>
#include <vector>

#include "ctxshap/dataset.h"
#include "ctxshap/predictor.h"

// Prediction-residual anomaly detection with an interquartile-range band
// fitted on training errors.
namespace ctxshap::anomaly {

struct PredictionError {
  int window_index = 0;
  double predicted = 0.0;
  double actual = 0.0;
  double e = 0.0;  // actual - predicted, scaled units
};

struct AnomalyThreshold {
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double lower = 0.0;  // q1 - 1.5 iqr
  double upper = 0.0;  // q3 + 1.5 iqr
};

enum class Verdict { kProbablyNormal, kAnomalous };
std::string VerdictName(Verdict v);

struct AnomalyRecord {
  int window_index = 0;
  double predicted = 0.0;
  double actual = 0.0;
  double e = 0.0;
  Verdict verdict = Verdict::kProbablyNormal;
};

// One error per window at horizon `step` (0 = first horizon).
std::vector<PredictionError> ComputeErrors(const predictor::Predictor& model,
                                           const dataset::WindowedDataset& ds,
                                           int step = 0);

// Quantile with linear interpolation between order statistics
// (position q * (n - 1) in the sorted sample).
double Quantile(std::vector<double> values, double q);

AnomalyThreshold FitThreshold(std::span<const PredictionError> train_errors);

// Anomalous iff e < lower or e > upper; the bounds themselves are normal.
std::vector<AnomalyRecord> Classify(std::span<const PredictionError> errors,
                                    const AnomalyThreshold& threshold);

}  // namespace ctxshap::anomaly

#endif  // CTXSHAP_ANOMALY_H_
