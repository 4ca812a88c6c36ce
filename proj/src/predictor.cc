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

#include "ctxshap/predictor.h"

#include <cmath>
#include <fstream>

#include "ctxshap/error.h"
#include "ctxshap/forest.h"
#include "ctxshap/mlp.h"
#include "ctxshap/ridge.h"

namespace ctxshap::predictor {

void Predictor::CheckInputs(Eigen::Index cols, int step) const {
  Require(fitted(), ErrorCode::kState, kind() + " model is not fitted");
  Require(cols == input_shape().flat_size(), ErrorCode::kShape,
          "model expects rows of " + std::to_string(input_shape().flat_size()) +
              " values, got " + std::to_string(cols));
  Require(step >= 0 && step < horizon(), ErrorCode::kShape,
          "horizon step " + std::to_string(step) + " out of range");
}

RowMatrix Predictor::Predict(const RowMatrix& inputs) const {
  CheckInputs(inputs.cols(), 0);
  RowMatrix out(inputs.rows(), horizon());
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    PredictRow({inputs.row(r).data(), static_cast<size_t>(inputs.cols())},
               {out.row(r).data(), static_cast<size_t>(out.cols())});
  }
  return out;
}

Vector Predictor::PredictStep(const RowMatrix& inputs, int step) const {
  CheckInputs(inputs.cols(), step);
  Vector out(inputs.rows());
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    out(r) = PredictRowStep(
        {inputs.row(r).data(), static_cast<size_t>(inputs.cols())}, step);
  }
  return out;
}

double Predictor::PredictOneStep(std::span<const double> flat,
                                 int step) const {
  CheckInputs(static_cast<Eigen::Index>(flat.size()), step);
  return PredictRowStep(flat, step);
}

double Predictor::PredictRowStep(std::span<const double> x, int step) const {
  std::vector<double> out(horizon());
  PredictRow(x, out);
  return out[step];
}

nlohmann::json FunctionModel::ToJson() const {
  Fail(ErrorCode::kState, "function models cannot be serialized");
}

void SaveModel(const Predictor& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  Require(static_cast<bool>(out), ErrorCode::kInput,
          "cannot write '" + path.string() + "'");
  out << model.ToJson().dump() << '\n';
}

std::unique_ptr<Predictor> LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path);
  Require(static_cast<bool>(in), ErrorCode::kInput,
          "cannot open model '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kParse, "model artifact: " + std::string(e.what()));
  }
  return ModelFromJson(j);
}

std::unique_ptr<Predictor> ModelFromJson(const nlohmann::json& artifact) {
  try {
    Require(artifact.value("format", "") == "ctxshap-model", ErrorCode::kSchema,
            "not a model artifact");
    Require(artifact.value("version", 0) == kModelFormatVersion,
            ErrorCode::kSchema, "unsupported model artifact version");
    const std::string kind = artifact.at("kind");
    if (kind == "ridge") {
      return std::make_unique<RidgeForecaster>(RidgeForecaster::FromJson(artifact));
    }
    if (kind == "mlp") {
      return std::make_unique<MlpForecaster>(MlpForecaster::FromJson(artifact));
    }
    if (kind == "forest") {
      return std::make_unique<RandomForestRegressor>(
          RandomForestRegressor::FromJson(artifact));
    }
    Fail(ErrorCode::kSchema, "unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kSchema, "model artifact: " + std::string(e.what()));
  }
}

namespace internal {

nlohmann::json MatrixToJson(const RowMatrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

RowMatrix MatrixFromJson(const nlohmann::json& j) {
  const Eigen::Index rows = j.at("rows");
  const Eigen::Index cols = j.at("cols");
  const std::vector<double> data = j.at("data");
  Require(static_cast<Eigen::Index>(data.size()) == rows * cols,
          ErrorCode::kSchema, "matrix data has the wrong length");
  RowMatrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

nlohmann::json VectorToJson(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector VectorFromJson(const nlohmann::json& j) {
  const std::vector<double> data = j;
  return Eigen::Map<const Vector>(data.data(), data.size());
}

}  // namespace internal

}  // namespace ctxshap::predictor
