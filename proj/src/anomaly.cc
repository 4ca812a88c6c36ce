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

#include "ctxshap/anomaly.h"

#include <algorithm>
#include <cmath>

#include "ctxshap/error.h"

namespace ctxshap::anomaly {

std::string VerdictName(Verdict v) {
  return v == Verdict::kAnomalous ? "Anomalous" : "ProbablyNormal";
}

std::vector<PredictionError> ComputeErrors(const predictor::Predictor& model,
                                           const dataset::WindowedDataset& ds,
                                           int step) {
  Require(ds.size() > 0, ErrorCode::kInput, "no windows to score");
  Require(step >= 0 && step < ds.horizon, ErrorCode::kShape,
          "horizon step out of range");
  const Vector predicted = model.PredictStep(ds.inputs, step);
  std::vector<PredictionError> errors(ds.size());
  for (int w = 0; w < ds.size(); ++w) {
    if (!std::isfinite(predicted(w))) {
      Fail(ErrorCode::kNumerical,
           "model produced a non-finite prediction for window " +
               std::to_string(w));
    }
    errors[w] = {w, predicted(w), ds.targets(w, step),
                 ds.targets(w, step) - predicted(w)};
  }
  return errors;
}

double Quantile(std::vector<double> values, double q) {
  Require(!values.empty(), ErrorCode::kInput, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

AnomalyThreshold FitThreshold(std::span<const PredictionError> train_errors) {
  Require(train_errors.size() >= 4, ErrorCode::kSizing,
          "need at least 4 training errors to fit the IQR threshold, got " +
              std::to_string(train_errors.size()));
  std::vector<double> e;
  e.reserve(train_errors.size());
  for (const auto& err : train_errors) {
    Require(std::isfinite(err.e), ErrorCode::kInput, "non-finite error");
    e.push_back(err.e);
  }
  AnomalyThreshold th;
  th.q1 = Quantile(e, 0.25);
  th.q3 = Quantile(e, 0.75);
  th.iqr = th.q3 - th.q1;
  th.lower = th.q1 - 1.5 * th.iqr;
  th.upper = th.q3 + 1.5 * th.iqr;
  return th;
}

std::vector<AnomalyRecord> Classify(std::span<const PredictionError> errors,
                                    const AnomalyThreshold& threshold) {
  Require(threshold.lower <= threshold.upper, ErrorCode::kParameter,
          "threshold bounds are inverted");
  std::vector<AnomalyRecord> out;
  out.reserve(errors.size());
  for (const auto& err : errors) {
    AnomalyRecord r{err.window_index, err.predicted, err.actual, err.e,
                    Verdict::kProbablyNormal};
    if (err.e < threshold.lower || err.e > threshold.upper) {
      r.verdict = Verdict::kAnomalous;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace ctxshap::anomaly
