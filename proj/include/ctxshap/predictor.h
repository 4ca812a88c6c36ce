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

#ifndef CTXSHAP_PREDICTOR_H_
#define CTXSHAP_PREDICTOR_H_

#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>

#include "json.hpp"
#include "ctxshap/types.h"

namespace ctxshap::predictor {

// Black-box forecasting contract. Explainers only ever see Predict.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual std::string kind() const = 0;
  virtual bool fitted() const = 0;
  virtual WindowShape input_shape() const = 0;
  virtual int horizon() const = 0;
  virtual nlohmann::json Hyperparameters() const = 0;
  // Full artifact (hyperparameters, seed, learned parameters).
  virtual nlohmann::json ToJson() const = 0;

  // inputs is M x (I * F), one flattened window per row; returns M x h.
  // Each row is computed independently with a fixed operation order, so a
  // row's output is bit-identical whatever batch it is part of.
  RowMatrix Predict(const RowMatrix& inputs) const;
  // Column `step` of Predict (0 is the first horizon).
  Vector PredictStep(const RowMatrix& inputs, int step) const;
  double PredictOneStep(std::span<const double> flat, int step) const;

 protected:
  virtual void PredictRow(std::span<const double> x,
                          std::span<double> out) const = 0;
  // Defaults to PredictRow; models override when one horizon is cheaper.
  virtual double PredictRowStep(std::span<const double> x, int step) const;

 private:
  void CheckInputs(Eigen::Index cols, int step) const;
};

// Wraps an arbitrary function as a predictor. Used for analytic test models
// (products, constants, sums of models).
class FunctionModel : public Predictor {
 public:
  using Fn = std::function<void(std::span<const double>, std::span<double>)>;

  FunctionModel(WindowShape shape, int horizon, Fn fn,
                std::string name = "function")
      : shape_(shape), horizon_(horizon), fn_(std::move(fn)),
        name_(std::move(name)) {}

  std::string kind() const override { return name_; }
  bool fitted() const override { return true; }
  WindowShape input_shape() const override { return shape_; }
  int horizon() const override { return horizon_; }
  nlohmann::json Hyperparameters() const override { return nlohmann::json::object(); }
  nlohmann::json ToJson() const override;

 protected:
  void PredictRow(std::span<const double> x,
                  std::span<double> out) const override {
    fn_(x, out);
  }

 private:
  WindowShape shape_;
  int horizon_;
  Fn fn_;
  std::string name_;
};

inline constexpr int kModelFormatVersion = 1;

void SaveModel(const Predictor& model, const std::filesystem::path& path);
std::unique_ptr<Predictor> LoadModel(const std::filesystem::path& path);
std::unique_ptr<Predictor> ModelFromJson(const nlohmann::json& artifact);

namespace internal {

// Four-way unrolled dot product with a fixed summation order.
inline double Dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

nlohmann::json MatrixToJson(const RowMatrix& m);
RowMatrix MatrixFromJson(const nlohmann::json& j);
nlohmann::json VectorToJson(const Vector& v);
Vector VectorFromJson(const nlohmann::json& j);

}  // namespace internal

}  // namespace ctxshap::predictor

#endif  // CTXSHAP_PREDICTOR_H_
