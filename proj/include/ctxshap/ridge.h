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

#ifndef CTXSHAP_RIDGE_H_
#define CTXSHAP_RIDGE_H_

#include "ctxshap/dataset.h"
#include "ctxshap/predictor.h"

namespace ctxshap::predictor {

struct RidgeConfig {
  double l2_lambda = 1e-2;  // the intercept is not penalized
};

// Linear forecaster on the flattened window, one weight column per horizon.
class RidgeForecaster : public Predictor {
 public:
  RidgeForecaster() = default;
  // coefficients: (I * F) x h; intercept: h.
  RidgeForecaster(WindowShape shape, const RowMatrix& coefficients,
                  const Vector& intercept, double l2_lambda);

  std::string kind() const override { return "ridge"; }
  bool fitted() const override { return fitted_; }
  WindowShape input_shape() const override { return shape_; }
  int horizon() const override { return static_cast<int>(intercept_.size()); }
  nlohmann::json Hyperparameters() const override;
  nlohmann::json ToJson() const override;
  static RidgeForecaster FromJson(const nlohmann::json& j);

  // (I * F) x h.
  RowMatrix coefficients() const { return coef_t_.transpose(); }
  const Vector& intercept() const { return intercept_; }
  double l2_lambda() const { return l2_lambda_; }

 protected:
  void PredictRow(std::span<const double> x,
                  std::span<double> out) const override;
  double PredictRowStep(std::span<const double> x, int step) const override;

 private:
  WindowShape shape_;
  RowMatrix coef_t_;  // h x (I * F), contiguous per horizon
  Vector intercept_;
  double l2_lambda_ = 0.0;
  bool fitted_ = false;
};

// Closed-form ridge on centered data. With l2_lambda == 0 a rank-deficient
// design raises a numerical error.
RidgeForecaster FitRidge(const dataset::WindowedDataset& train,
                         const RidgeConfig& config = {});

}  // namespace ctxshap::predictor

#endif  // CTXSHAP_RIDGE_H_
