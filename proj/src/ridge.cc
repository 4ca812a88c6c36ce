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

#include "ctxshap/ridge.h"

#include "ctxshap/error.h"

namespace ctxshap::predictor {

RidgeForecaster::RidgeForecaster(WindowShape shape,
                                 const RowMatrix& coefficients,
                                 const Vector& intercept, double l2_lambda)
    : shape_(shape),
      coef_t_(coefficients.transpose()),
      intercept_(intercept),
      l2_lambda_(l2_lambda),
      fitted_(true) {
  Require(coefficients.rows() == shape.flat_size(), ErrorCode::kShape,
          "ridge coefficient rows must equal I * F");
  Require(coefficients.cols() == intercept.size(), ErrorCode::kShape,
          "ridge coefficient columns must equal the horizon");
}

void RidgeForecaster::PredictRow(std::span<const double> x,
                                 std::span<double> out) const {
  for (int k = 0; k < horizon(); ++k) out[k] = PredictRowStep(x, k);
}

double RidgeForecaster::PredictRowStep(std::span<const double> x,
                                       int step) const {
  return intercept_(step) + internal::Dot(x.data(), coef_t_.row(step).data(),
                                          static_cast<int>(x.size()));
}

nlohmann::json RidgeForecaster::Hyperparameters() const {
  return {{"l2_lambda", l2_lambda_}};
}

nlohmann::json RidgeForecaster::ToJson() const {
  Require(fitted_, ErrorCode::kState, "ridge model is not fitted");
  return {{"format", "ctxshap-model"},
          {"version", kModelFormatVersion},
          {"kind", kind()},
          {"hyperparameters", Hyperparameters()},
          {"seed", nullptr},
          {"shape", {{"steps", shape_.steps}, {"features", shape_.features}}},
          {"horizon", horizon()},
          {"params",
           {{"coefficients", internal::MatrixToJson(coefficients())},
            {"intercept", internal::VectorToJson(intercept_)}}}};
}

RidgeForecaster RidgeForecaster::FromJson(const nlohmann::json& j) {
  const WindowShape shape{j.at("shape").at("steps"),
                          j.at("shape").at("features")};
  return RidgeForecaster(
      shape, internal::MatrixFromJson(j.at("params").at("coefficients")),
      internal::VectorFromJson(j.at("params").at("intercept")),
      j.at("hyperparameters").at("l2_lambda"));
}

RidgeForecaster FitRidge(const dataset::WindowedDataset& train,
                         const RidgeConfig& config) {
  Require(config.l2_lambda >= 0.0, ErrorCode::kParameter,
          "l2_lambda must be nonnegative");
  Require(train.size() > 0, ErrorCode::kSizing, "empty training set");
  const auto& x = train.inputs;
  const auto& y = train.targets;
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::MatrixXd yc = y.rowwise() - y_mean;

  const Eigen::Index p = x.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(xc.transpose());
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += config.l2_lambda;
  const Eigen::MatrixXd rhs = xc.transpose() * yc;

  Eigen::MatrixXd coef;
  if (config.l2_lambda == 0.0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
    if (qr.rank() < p) {
      Fail(ErrorCode::kNumerical,
           "normal equations are singular (rank " + std::to_string(qr.rank()) +
               " of " + std::to_string(p) +
               "); use a positive l2_lambda");
    }
    coef = qr.solve(rhs);
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) {
      Fail(ErrorCode::kNumerical,
           "normal equations are not positive definite; increase l2_lambda");
    }
    coef = llt.solve(rhs);
  }
  const Vector intercept = (y_mean - x_mean * coef).transpose();
  return RidgeForecaster(train.shape, coef, intercept, config.l2_lambda);
}

}  // namespace ctxshap::predictor
