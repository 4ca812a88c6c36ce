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

#include "ctxshap/mlp.h"

#include <cmath>
#include <numeric>

#include "ctxshap/error.h"
#include "ctxshap/rng.h"

namespace ctxshap::predictor {

namespace {

struct Adam {
  explicit Adam(Eigen::Index size)
      : m(Vector::Zero(size)), v(Vector::Zero(size)) {}

  void Step(Vector& params, const Vector& grad, double lr) {
    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;
    ++t;
    m = kBeta1 * m + (1 - kBeta1) * grad;
    v = kBeta2 * v + (1 - kBeta2) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(kBeta1, t);
    const double c2 = 1 - std::pow(kBeta2, t);
    params.array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  }

  Vector m;
  Vector v;
  int t = 0;
};

}  // namespace

std::string ActivationName(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation ParseActivation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  Fail(ErrorCode::kParameter, "unknown activation '" + name + "'");
}

MlpForecaster::MlpForecaster(WindowShape shape, int horizon,
                             const MlpConfig& config)
    : shape_(shape), horizon_(horizon), config_(config) {
  Require(config.hidden_width > 0, ErrorCode::kParameter,
          "hidden width must be positive");
  Require(horizon > 0 && shape.flat_size() > 0, ErrorCode::kParameter,
          "MLP needs positive input and output sizes");
}

double MlpForecaster::Activate(double z) const {
  return config_.activation == Activation::kRelu ? (z > 0.0 ? z : 0.0)
                                                  : std::tanh(z);
}

void MlpForecaster::Initialize() {
  const int p = shape_.flat_size();
  const int w = config_.hidden_width;
  Rng rng(config_.seed);
  const double a1 = std::sqrt(6.0 / (p + w));
  const double a2 = std::sqrt(6.0 / (w + horizon_));
  w1_.resize(w, p);
  for (Eigen::Index i = 0; i < w1_.size(); ++i) {
    w1_.data()[i] = a1 * (2.0 * rng.Uniform() - 1.0);
  }
  b1_ = Vector::Zero(w);
  w2_.resize(horizon_, w);
  for (Eigen::Index i = 0; i < w2_.size(); ++i) {
    w2_.data()[i] = a2 * (2.0 * rng.Uniform() - 1.0);
  }
  b2_ = Vector::Zero(horizon_);
  fitted_ = true;
}

int MlpForecaster::parameter_count() const {
  const int p = shape_.flat_size();
  const int w = config_.hidden_width;
  return w * p + w + horizon_ * w + horizon_;
}

Vector MlpForecaster::Parameters() const {
  Vector out(parameter_count());
  Eigen::Index o = 0;
  std::copy(w1_.data(), w1_.data() + w1_.size(), out.data() + o);
  o += w1_.size();
  std::copy(b1_.data(), b1_.data() + b1_.size(), out.data() + o);
  o += b1_.size();
  std::copy(w2_.data(), w2_.data() + w2_.size(), out.data() + o);
  o += w2_.size();
  std::copy(b2_.data(), b2_.data() + b2_.size(), out.data() + o);
  return out;
}

void MlpForecaster::SetParameters(const Vector& params) {
  Require(params.size() == parameter_count(), ErrorCode::kShape,
          "parameter vector has the wrong length");
  const int p = shape_.flat_size();
  const int w = config_.hidden_width;
  w1_.resize(w, p);
  b1_.resize(w);
  w2_.resize(horizon_, w);
  b2_.resize(horizon_);
  const double* src = params.data();
  std::copy(src, src + w1_.size(), w1_.data());
  src += w1_.size();
  std::copy(src, src + b1_.size(), b1_.data());
  src += b1_.size();
  std::copy(src, src + w2_.size(), w2_.data());
  src += w2_.size();
  std::copy(src, src + b2_.size(), b2_.data());
  fitted_ = true;
}

double MlpForecaster::Loss(const RowMatrix& inputs,
                           const RowMatrix& targets) const {
  Require(fitted_, ErrorCode::kState, "mlp is not initialized");
  const Eigen::MatrixXd pre =
      (inputs * w1_.transpose()).rowwise() + b1_.transpose();
  const Eigen::MatrixXd act = pre.unaryExpr([this](double z) { return Activate(z); });
  const Eigen::MatrixXd out = (act * w2_.transpose()).rowwise() + b2_.transpose();
  return (out - targets).squaredNorm() /
         static_cast<double>(targets.rows() * targets.cols());
}

Vector MlpForecaster::Gradient(const RowMatrix& inputs,
                               const RowMatrix& targets) const {
  Require(fitted_, ErrorCode::kState, "mlp is not initialized");
  const double scale = 2.0 / static_cast<double>(targets.rows() * targets.cols());
  const Eigen::MatrixXd pre =
      (inputs * w1_.transpose()).rowwise() + b1_.transpose();
  const Eigen::MatrixXd act = pre.unaryExpr([this](double z) { return Activate(z); });
  const Eigen::MatrixXd out = (act * w2_.transpose()).rowwise() + b2_.transpose();
  const Eigen::MatrixXd d_out = scale * (out - targets);  // N x h
  const Eigen::MatrixXd d_act = d_out * w2_;                // N x W
  Eigen::MatrixXd d_pre;
  if (config_.activation == Activation::kRelu) {
    d_pre = d_act.cwiseProduct(
        pre.unaryExpr([](double z) { return z > 0.0 ? 1.0 : 0.0; }));
  } else {
    d_pre = d_act.cwiseProduct(
        act.unaryExpr([](double a) { return 1.0 - a * a; }));
  }
  const RowMatrix g_w1 = d_pre.transpose() * inputs;
  const Vector g_b1 = d_pre.colwise().sum().transpose();
  const RowMatrix g_w2 = d_out.transpose() * act;
  const Vector g_b2 = d_out.colwise().sum().transpose();

  Vector grad(parameter_count());
  Eigen::Index o = 0;
  auto put = [&](const double* data, Eigen::Index n) {
    std::copy(data, data + n, grad.data() + o);
    o += n;
  };
  put(g_w1.data(), g_w1.size());
  put(g_b1.data(), g_b1.size());
  put(g_w2.data(), g_w2.size());
  put(g_b2.data(), g_b2.size());
  return grad;
}

void MlpForecaster::PredictRow(std::span<const double> x,
                               std::span<double> out) const {
  const int w = config_.hidden_width;
  const int p = static_cast<int>(x.size());
  std::vector<double> hidden(w);
  for (int j = 0; j < w; ++j) {
    hidden[j] = Activate(b1_(j) + internal::Dot(x.data(), w1_.row(j).data(), p));
  }
  for (int k = 0; k < horizon_; ++k) {
    out[k] = b2_(k) + internal::Dot(hidden.data(), w2_.row(k).data(), w);
  }
}

nlohmann::json MlpForecaster::Hyperparameters() const {
  return {{"hidden_width", config_.hidden_width},
          {"activation", ActivationName(config_.activation)},
          {"learning_rate", config_.learning_rate},
          {"epochs", config_.epochs},
          {"batch_size", config_.batch_size}};
}

nlohmann::json MlpForecaster::ToJson() const {
  Require(fitted_, ErrorCode::kState, "mlp is not fitted");
  return {{"format", "ctxshap-model"},
          {"version", kModelFormatVersion},
          {"kind", kind()},
          {"hyperparameters", Hyperparameters()},
          {"seed", config_.seed},
          {"shape", {{"steps", shape_.steps}, {"features", shape_.features}}},
          {"horizon", horizon_},
          {"params", internal::VectorToJson(Parameters())}};
}

MlpForecaster MlpForecaster::FromJson(const nlohmann::json& j) {
  const auto& hp = j.at("hyperparameters");
  MlpConfig config;
  config.hidden_width = hp.at("hidden_width");
  config.activation = ParseActivation(hp.at("activation"));
  config.learning_rate = hp.at("learning_rate");
  config.epochs = hp.at("epochs");
  config.batch_size = hp.at("batch_size");
  config.seed = j.at("seed");
  MlpForecaster model({j.at("shape").at("steps"), j.at("shape").at("features")},
                      j.at("horizon"), config);
  model.SetParameters(internal::VectorFromJson(j.at("params")));
  return model;
}

MlpForecaster FitMlp(const dataset::WindowedDataset& train,
                     const MlpConfig& config) {
  Require(config.epochs >= 1, ErrorCode::kParameter, "epochs must be >= 1");
  Require(config.batch_size >= 0, ErrorCode::kParameter,
          "batch size must be nonnegative");
  Require(train.size() > 0, ErrorCode::kSizing, "empty training set");
  MlpForecaster model(train.shape, train.horizon, config);
  model.Initialize();

  const int n = train.size();
  const int batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
  Rng shuffle_rng(DeriveSeed(config.seed, 1));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Vector params = model.Parameters();
  Adam adam(params.size());
  RowMatrix xb, yb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (batch < n) shuffle_rng.Shuffle(order);
    for (int start = 0; start < n; start += batch) {
      const int count = std::min(batch, n - start);
      if (batch == n) {
        adam.Step(params, model.Gradient(train.inputs, train.targets),
                  config.learning_rate);
      } else {
        xb.resize(count, train.inputs.cols());
        yb.resize(count, train.targets.cols());
        for (int i = 0; i < count; ++i) {
          xb.row(i) = train.inputs.row(order[start + i]);
          yb.row(i) = train.targets.row(order[start + i]);
        }
        adam.Step(params, model.Gradient(xb, yb), config.learning_rate);
      }
      model.SetParameters(params);
    }
    const double loss = model.Loss(train.inputs, train.targets);
    if (!std::isfinite(loss)) {
      Fail(ErrorCode::kDivergence,
           "training loss became non-finite at epoch " + std::to_string(epoch + 1));
    }
    model.loss_history_.push_back(loss);
  }
  return model;
}

}  // namespace ctxshap::predictor
