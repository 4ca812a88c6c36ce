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

#ifndef CTXSHAP_MLP_H_
#define CTXSHAP_MLP_H_

#include <cstdint>
#include <vector>

#include "ctxshap/dataset.h"
#include "ctxshap/predictor.h"

namespace ctxshap::predictor {

enum class Activation { kRelu, kTanh };

struct MlpConfig {
  int hidden_width = 32;
  Activation activation = Activation::kRelu;
  double learning_rate = 1e-3;  // Adam step size
  int epochs = 50;
  int batch_size = 64;  // 0 trains on the full set every step
  uint64_t seed = 0;
};

// One hidden layer: y = W2 act(W1 x + b1) + b2, trained on mean squared
// error with Adam.
class MlpForecaster : public Predictor {
 public:
  MlpForecaster() = default;
  MlpForecaster(WindowShape shape, int horizon, const MlpConfig& config);

  std::string kind() const override { return "mlp"; }
  bool fitted() const override { return fitted_; }
  WindowShape input_shape() const override { return shape_; }
  int horizon() const override { return horizon_; }
  nlohmann::json Hyperparameters() const override;
  nlohmann::json ToJson() const override;
  static MlpForecaster FromJson(const nlohmann::json& j);

  // Random initialization from config.seed; marks the model usable.
  void Initialize();

  // Flat parameter vector: W1 (row-major), b1, W2 (row-major), b2.
  Vector Parameters() const;
  void SetParameters(const Vector& params);
  int parameter_count() const;

  // Mean over N * h of squared error, and its analytic gradient.
  double Loss(const RowMatrix& inputs, const RowMatrix& targets) const;
  Vector Gradient(const RowMatrix& inputs, const RowMatrix& targets) const;

  const std::vector<double>& loss_history() const { return loss_history_; }
  const MlpConfig& config() const { return config_; }

  friend MlpForecaster FitMlp(const dataset::WindowedDataset&,
                              const MlpConfig&);

 protected:
  void PredictRow(std::span<const double> x,
                  std::span<double> out) const override;

 private:
  double Activate(double z) const;

  WindowShape shape_;
  int horizon_ = 0;
  MlpConfig config_;
  RowMatrix w1_;  // W x P
  Vector b1_;
  RowMatrix w2_;  // h x W
  Vector b2_;
  std::vector<double> loss_history_;
  bool fitted_ = false;
};

MlpForecaster FitMlp(const dataset::WindowedDataset& train,
                     const MlpConfig& config = {});

std::string ActivationName(Activation a);
Activation ParseActivation(const std::string& name);

}  // namespace ctxshap::predictor

#endif  // CTXSHAP_MLP_H_
