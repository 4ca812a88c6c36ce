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

#include "ctxshap/pipeline.h"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <set>

#include "ctxshap/error.h"
#include "ctxshap/rng.h"

namespace ctxshap::pipeline {
namespace {

using nlohmann::json;

json ScalerToJson(const dataset::ScalingParams& p) {
  return {{"min", predictor::internal::VectorToJson(p.min)},
          {"max", predictor::internal::VectorToJson(p.max)}};
}

dataset::ScalingParams ScalerFromJson(const json& j) {
  dataset::ScalingParams p;
  p.min = predictor::internal::VectorFromJson(j.at("min"));
  p.max = predictor::internal::VectorFromJson(j.at("max"));
  return p;
}

PreparedData Assemble(dataset::FeatureMatrix features,
                      dataset::ScalingParams scaler, const DataConfig& cfg) {
  PreparedData out;
  out.config = cfg;
  const int min_rows = cfg.window_length + cfg.horizon;
  dataset::Splits raw =
      dataset::ChronologicalSplit(features, cfg.fractions, min_rows);
  if (!scaler.fitted()) scaler = dataset::FitScaler(raw.train);
  Require(scaler.min.size() == features.cols(), ErrorCode::kShape,
          "scaler covers " + std::to_string(scaler.min.size()) +
              " features, data has " + std::to_string(features.cols()));
  out.splits = raw;
  out.splits.train = dataset::ApplyScaler(raw.train, scaler);
  out.splits.validation = dataset::ApplyScaler(raw.validation, scaler);
  out.splits.test = dataset::ApplyScaler(raw.test, scaler);
  out.train = dataset::MakeWindows(out.splits.train, cfg.window_length,
                                   cfg.horizon);
  out.validation = dataset::MakeWindows(out.splits.validation,
                                        cfg.window_length, cfg.horizon);
  out.test =
      dataset::MakeWindows(out.splits.test, cfg.window_length, cfg.horizon);
  out.features = std::move(features);
  out.scaler = std::move(scaler);
  return out;
}

// Rejects keys outside `allowed` so that typos in a config file surface.
void CheckKeys(const json& j, const std::string& where,
               std::initializer_list<const char*> allowed) {
  Require(j.is_object(), ErrorCode::kSchema, where + " must be an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    Require(keys.count(key) > 0, ErrorCode::kSchema,
            "unknown config key " + where + "." + key);
  }
}

template <typename T>
void Get(const json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  try {
    field = j.at(key).get<T>();
  } catch (const json::exception& e) {
    Fail(ErrorCode::kSchema, std::string("config key ") + key + ": " + e.what());
  }
}

RowMatrix UnscaleEnergy(const RowMatrix& m, const dataset::ScalingParams& p) {
  RowMatrix out(m.rows(), m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out(r, c) = p.Unscale(dataset::kEnergyColumn, m(r, c));
    }
  }
  return out;
}

}  // namespace

PreparedData PrepareData(const std::vector<dataset::TimeSeriesRecord>& records,
                         const DataConfig& config) {
  return Assemble(dataset::EngineerFeatures(records, config.imputation), {},
                  config);
}

json PreprocessToJson(const PreparedData& data) {
  const auto& c = data.config;
  return {{"window_length", c.window_length},
          {"horizon", c.horizon},
          {"fractions",
           {{"train", c.fractions.train},
            {"validation", c.fractions.validation},
            {"test", c.fractions.test}}},
          {"imputation",
           {{"mode", c.imputation.mode == dataset::ImputationMode::kConstant
                         ? "constant"
                         : "forward-back-fill"},
            {"constant", c.imputation.constant}}},
          {"columns", data.features.columns},
          {"scaler", ScalerToJson(data.scaler)},
          {"rows", data.features.rows()},
          {"splits",
           {{"train", data.splits.sizes.train},
            {"validation", data.splits.sizes.validation},
            {"test", data.splits.sizes.test}}},
          {"windows",
           {{"train", data.train.size()},
            {"validation", data.validation.size()},
            {"test", data.test.size()}}}};
}

PreparedData PrepareWithPreprocess(
    const std::vector<dataset::TimeSeriesRecord>& records,
    const json& preprocess) {
  DataConfig cfg;
  try {
    cfg.window_length = preprocess.at("window_length").get<int>();
    cfg.horizon = preprocess.at("horizon").get<int>();
    const auto& fr = preprocess.at("fractions");
    cfg.fractions = {fr.at("train").get<double>(),
                     fr.at("validation").get<double>(),
                     fr.at("test").get<double>()};
    const auto& imp = preprocess.at("imputation");
    cfg.imputation.mode = imp.at("mode").get<std::string>() == "constant"
                              ? dataset::ImputationMode::kConstant
                              : dataset::ImputationMode::kForwardBackFill;
    cfg.imputation.constant = imp.at("constant").get<double>();
  } catch (const json::exception& e) {
    Fail(ErrorCode::kSchema, std::string("bad preprocess record: ") + e.what());
  }
  return Assemble(dataset::EngineerFeatures(records, cfg.imputation),
                  ScalerFromJson(preprocess.at("scaler")), cfg);
}

std::unique_ptr<predictor::Predictor> TrainModel(
    const dataset::WindowedDataset& train, const ModelConfig& config) {
  if (config.kind == "ridge") {
    return std::make_unique<predictor::RidgeForecaster>(
        predictor::FitRidge(train, config.ridge));
  }
  if (config.kind == "mlp") {
    return std::make_unique<predictor::MlpForecaster>(
        predictor::FitMlp(train, config.mlp));
  }
  if (config.kind == "forest") {
    return std::make_unique<predictor::RandomForestRegressor>(
        predictor::FitForest(train.inputs, train.targets, train.shape,
                             config.forest));
  }
  Fail(ErrorCode::kParameter, "unknown model kind '" + config.kind +
                                  "' (expected ridge, mlp or forest)");
}

Metrics ComputeMetrics(const RowMatrix& actual, const RowMatrix& predicted) {
  Require(actual.rows() == predicted.rows() && actual.cols() == predicted.cols(),
          ErrorCode::kShape, "actual and predicted differ in shape");
  Require(actual.size() > 0, ErrorCode::kSizing, "no values to score");
  Metrics m;
  m.count = static_cast<int>(actual.size());
  const double mean = actual.mean();
  double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0, smape = 0.0, mape = 0.0;
  int mape_n = 0;
  for (Eigen::Index r = 0; r < actual.rows(); ++r) {
    for (Eigen::Index c = 0; c < actual.cols(); ++c) {
      const double a = actual(r, c);
      const double p = predicted(r, c);
      const double d = a - p;
      ss_res += d * d;
      ss_tot += (a - mean) * (a - mean);
      abs_sum += std::abs(d);
      const double denom = std::abs(a) + std::abs(p);
      if (denom > 0.0) smape += 2.0 * std::abs(d) / denom;
      if (a != 0.0) {
        mape += std::abs(d / a);
        ++mape_n;
      } else {
        ++m.mape_skipped;
      }
    }
  }
  const double n = m.count;
  m.mse = ss_res / n;
  m.rmse = std::sqrt(m.mse);
  m.mae = abs_sum / n;
  m.smape = 100.0 * smape / n;
  m.mape = mape_n > 0 ? 100.0 * mape / mape_n
                      : std::numeric_limits<double>::quiet_NaN();
  m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot
                      : std::numeric_limits<double>::quiet_NaN();
  return m;
}

json MetricsToJson(const Metrics& m) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"mse", num(m.mse)},     {"rmse", num(m.rmse)},
          {"mae", num(m.mae)},     {"smape", num(m.smape)},
          {"mape", num(m.mape)},   {"r2", num(m.r2)},
          {"count", m.count},      {"mape_skipped", m.mape_skipped}};
}

json EvaluateModel(const predictor::Predictor& model, const PreparedData& data) {
  const RowMatrix pred = UnscaleEnergy(model.Predict(data.test.inputs),
                                       data.scaler);
  const RowMatrix actual = UnscaleEnergy(data.test.targets, data.scaler);
  return {{"split", "test"},
          {"units", "kWh"},
          {"all_horizons", MetricsToJson(ComputeMetrics(actual, pred))},
          {"h1", MetricsToJson(ComputeMetrics(actual.leftCols(1),
                                              pred.leftCols(1)))}};
}

Detection Detect(const predictor::Predictor& model, const PreparedData& data,
                 int step) {
  Detection d;
  const auto train_errors = anomaly::ComputeErrors(model, data.train, step);
  d.threshold = anomaly::FitThreshold(train_errors);
  const auto test_errors = anomaly::ComputeErrors(model, data.test, step);
  d.test = anomaly::Classify(test_errors, d.threshold);
  for (const auto& r : d.test) {
    d.anomalous += r.verdict == anomaly::Verdict::kAnomalous;
  }
  return d;
}

ImportanceResult GlobalFeatureImportance(const dataset::WindowedDataset& train,
                                         const ImportanceConfig& config,
                                         int step) {
  Require(step >= 0 && step < train.horizon, ErrorCode::kParameter,
          "importance step out of range");
  const int n = train.size();
  std::vector<int> rows;
  if (config.max_rows > 0 && n > config.max_rows) {
    for (int i = 0; i < config.max_rows; ++i) {
      rows.push_back(static_cast<int>(static_cast<int64_t>(i) * n /
                                      config.max_rows));
    }
  } else {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), 0);
  }
  RowMatrix x(rows.size(), train.inputs.cols());
  Vector y(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    x.row(i) = train.inputs.row(rows[i]);
    y[i] = train.targets(rows[i], step);
  }
  const auto forest =
      predictor::FitForest(x, y, train.shape, config.forest);
  ImportanceResult out;
  out.importance = context::TransformGfi(predictor::ForestImportance(forest));
  out.warnings = forest.warnings();
  out.oob_mse = forest.oob_mse();
  return out;
}

json ImportanceToJson(const ImportanceResult& r, const ImportanceConfig& c) {
  return {{"raw", predictor::internal::VectorToJson(r.importance.raw)},
          {"transformed", predictor::internal::VectorToJson(r.importance.transformed)},
          {"warnings", r.warnings},
          {"oob_mse", r.oob_mse ? json(*r.oob_mse) : json(nullptr)},
          {"forest",
           {{"n_trees", c.forest.n_trees},
            {"max_depth", c.forest.max_depth},
            {"min_samples_leaf", c.forest.min_samples_leaf},
            {"feature_subsample", c.forest.feature_subsample},
            {"max_bins", c.forest.max_bins},
            {"seed", c.forest.seed}}},
          {"max_rows", c.max_rows}};
}

context::GlobalImportance ImportanceFromJson(const json& j) {
  try {
    return context::TransformGfi(predictor::internal::VectorFromJson(j.at("raw")));
  } catch (const json::exception& e) {
    Fail(ErrorCode::kSchema, std::string("bad importance record: ") + e.what());
  }
}

RunConfig RunConfigFromJson(const json& j, RunConfig c) {
  CheckKeys(j, "config",
            {"synth", "anomalies", "data", "model", "importance", "benchmark"});
  if (j.contains("synth")) {
    const json& s = j["synth"];
    CheckKeys(s, "synth",
              {"length", "daily_amplitude", "weekly_amplitude", "base_load",
               "noise_sd", "weather_coupling", "seed", "start"});
    Get(s, "length", c.synth.length);
    Get(s, "daily_amplitude", c.synth.daily_amplitude);
    Get(s, "weekly_amplitude", c.synth.weekly_amplitude);
    Get(s, "base_load", c.synth.base_load);
    Get(s, "noise_sd", c.synth.noise_sd);
    Get(s, "weather_coupling", c.synth.weather_coupling);
    Get(s, "seed", c.synth.seed);
    if (s.contains("start")) {
      c.synth.start = dataset::ParseTimestamp(s["start"].get<std::string>());
    }
  }
  if (j.contains("anomalies")) {
    const json& a = j["anomalies"];
    CheckKeys(a, "anomalies",
              {"inject", "count", "magnitude_sigmas", "kind", "min_separation",
               "duration", "seed"});
    Get(a, "inject", c.inject);
    Get(a, "count", c.anomalies.count);
    Get(a, "magnitude_sigmas", c.anomalies.magnitude_sigmas);
    if (a.contains("kind")) {
      c.anomalies.kind = synth::ParseAnomalyKind(a["kind"].get<std::string>());
    }
    Get(a, "min_separation", c.anomalies.min_separation);
    Get(a, "duration", c.anomalies.duration);
    Get(a, "seed", c.injection_seed);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    CheckKeys(d, "data",
              {"window_length", "horizon", "train_fraction",
               "validation_fraction", "test_fraction", "imputation",
               "imputation_constant"});
    Get(d, "window_length", c.data.window_length);
    Get(d, "horizon", c.data.horizon);
    Get(d, "train_fraction", c.data.fractions.train);
    Get(d, "validation_fraction", c.data.fractions.validation);
    Get(d, "test_fraction", c.data.fractions.test);
    if (d.contains("imputation")) {
      const auto mode = d["imputation"].get<std::string>();
      Require(mode == "constant" || mode == "forward-back-fill",
              ErrorCode::kSchema, "imputation must be constant or "
                                  "forward-back-fill");
      c.data.imputation.mode = mode == "constant"
                                   ? dataset::ImputationMode::kConstant
                                   : dataset::ImputationMode::kForwardBackFill;
    }
    Get(d, "imputation_constant", c.data.imputation.constant);
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    CheckKeys(m, "model",
              {"kind", "l2_lambda", "hidden_width", "activation",
               "learning_rate", "epochs", "batch_size", "n_trees", "max_depth",
               "min_samples_leaf", "feature_subsample", "seed"});
    Get(m, "kind", c.model.kind);
    Get(m, "l2_lambda", c.model.ridge.l2_lambda);
    Get(m, "hidden_width", c.model.mlp.hidden_width);
    if (m.contains("activation")) {
      c.model.mlp.activation =
          predictor::ParseActivation(m["activation"].get<std::string>());
    }
    Get(m, "learning_rate", c.model.mlp.learning_rate);
    Get(m, "epochs", c.model.mlp.epochs);
    Get(m, "batch_size", c.model.mlp.batch_size);
    Get(m, "n_trees", c.model.forest.n_trees);
    Get(m, "max_depth", c.model.forest.max_depth);
    Get(m, "min_samples_leaf", c.model.forest.min_samples_leaf);
    Get(m, "feature_subsample", c.model.forest.feature_subsample);
    if (m.contains("seed")) {
      Get(m, "seed", c.model.mlp.seed);
      c.model.forest.seed = c.model.mlp.seed;
    }
  }
  if (j.contains("importance")) {
    const json& g = j["importance"];
    CheckKeys(g, "importance",
              {"n_trees", "max_depth", "min_samples_leaf", "feature_subsample",
               "max_bins", "max_rows", "seed"});
    Get(g, "n_trees", c.importance.forest.n_trees);
    Get(g, "max_depth", c.importance.forest.max_depth);
    Get(g, "min_samples_leaf", c.importance.forest.min_samples_leaf);
    Get(g, "feature_subsample", c.importance.forest.feature_subsample);
    Get(g, "max_bins", c.importance.forest.max_bins);
    Get(g, "max_rows", c.importance.max_rows);
    Get(g, "seed", c.importance.forest.seed);
  }
  if (j.contains("benchmark")) {
    const json& b = j["benchmark"];
    CheckKeys(b, "benchmark",
              {"methods", "k", "kernel_samples", "sampling_samples",
               "permutation_samples", "background_seed", "explainer_seed",
               "cosine_form", "rerun_anomalies", "reruns", "min_anomalies",
               "max_anomalies", "identical_selections", "dataset_label"});
    if (b.contains("methods")) {
      c.benchmark.methods.clear();
      for (const auto& name : b["methods"]) {
        c.benchmark.methods.push_back(
            explain::ParseMethod(name.get<std::string>()));
      }
    }
    Get(b, "k", c.benchmark.k);
    Get(b, "kernel_samples", c.benchmark.kernel_samples);
    Get(b, "sampling_samples", c.benchmark.sampling_samples);
    Get(b, "permutation_samples", c.benchmark.permutation_samples);
    Get(b, "background_seed", c.benchmark.background_seed);
    Get(b, "explainer_seed", c.benchmark.explainer_seed);
    if (b.contains("cosine_form")) {
      c.benchmark.cosine_form =
          context::ParseCosineForm(b["cosine_form"].get<std::string>());
    }
    Get(b, "rerun_anomalies", c.benchmark.rerun_anomalies);
    Get(b, "reruns", c.benchmark.reruns);
    Get(b, "min_anomalies", c.benchmark.min_anomalies);
    Get(b, "max_anomalies", c.max_anomalies);
    Get(b, "identical_selections", c.benchmark.identical_selections);
    Get(b, "dataset_label", c.benchmark.dataset_label);
  }
  return c;
}

json RunConfigToJson(const RunConfig& c) {
  json methods = json::array();
  for (auto m : c.benchmark.methods) methods.push_back(explain::MethodName(m));
  return {
      {"synth",
       {{"length", c.synth.length},
        {"daily_amplitude", c.synth.daily_amplitude},
        {"weekly_amplitude", c.synth.weekly_amplitude},
        {"base_load", c.synth.base_load},
        {"noise_sd", c.synth.noise_sd},
        {"weather_coupling", c.synth.weather_coupling},
        {"seed", c.synth.seed},
        {"start", dataset::FormatTimestamp(c.synth.start)}}},
      {"anomalies",
       {{"inject", c.inject},
        {"count", c.anomalies.count},
        {"magnitude_sigmas", c.anomalies.magnitude_sigmas},
        {"kind", synth::AnomalyKindName(c.anomalies.kind)},
        {"min_separation", c.anomalies.min_separation},
        {"duration", c.anomalies.duration},
        {"seed", c.injection_seed}}},
      {"data",
       {{"window_length", c.data.window_length},
        {"horizon", c.data.horizon},
        {"train_fraction", c.data.fractions.train},
        {"validation_fraction", c.data.fractions.validation},
        {"test_fraction", c.data.fractions.test},
        {"imputation", c.data.imputation.mode ==
                               dataset::ImputationMode::kConstant
                           ? "constant"
                           : "forward-back-fill"},
        {"imputation_constant", c.data.imputation.constant}}},
      {"model",
       {{"kind", c.model.kind},
        {"l2_lambda", c.model.ridge.l2_lambda},
        {"hidden_width", c.model.mlp.hidden_width},
        {"activation", predictor::ActivationName(c.model.mlp.activation)},
        {"learning_rate", c.model.mlp.learning_rate},
        {"epochs", c.model.mlp.epochs},
        {"batch_size", c.model.mlp.batch_size},
        {"n_trees", c.model.forest.n_trees},
        {"max_depth", c.model.forest.max_depth},
        {"min_samples_leaf", c.model.forest.min_samples_leaf},
        {"feature_subsample", c.model.forest.feature_subsample},
        {"seed", c.model.mlp.seed}}},
      {"importance",
       {{"n_trees", c.importance.forest.n_trees},
        {"max_depth", c.importance.forest.max_depth},
        {"min_samples_leaf", c.importance.forest.min_samples_leaf},
        {"feature_subsample", c.importance.forest.feature_subsample},
        {"max_bins", c.importance.forest.max_bins},
        {"max_rows", c.importance.max_rows},
        {"seed", c.importance.forest.seed}}},
      {"benchmark",
       {{"methods", methods},
        {"k", c.benchmark.k},
        {"kernel_samples", c.benchmark.kernel_samples},
        {"sampling_samples", c.benchmark.sampling_samples},
        {"permutation_samples", c.benchmark.permutation_samples},
        {"background_seed", c.benchmark.background_seed},
        {"explainer_seed", c.benchmark.explainer_seed},
        {"cosine_form", context::CosineFormName(c.benchmark.cosine_form)},
        {"rerun_anomalies", c.benchmark.rerun_anomalies},
        {"reruns", c.benchmark.reruns},
        {"min_anomalies", c.benchmark.min_anomalies},
        {"max_anomalies", c.max_anomalies},
        {"identical_selections", c.benchmark.identical_selections},
        {"dataset_label", c.benchmark.dataset_label}}}};
}

synth::InjectionResult MakeSyntheticSeries(const RunConfig& config) {
  auto records = synth::GenerateSeries(config.synth);
  if (!config.inject || config.anomalies.count == 0) {
    return {std::move(records), {}};
  }
  synth::AnomalySpec spec = config.anomalies;
  spec.noise_sd = config.synth.noise_sd;
  const auto region = synth::TestInjectionRegion(
      config.synth.length, config.data.fractions, config.data.window_length,
      config.data.horizon);
  spec.region_begin = region.begin;
  spec.region_end = region.end;
  return synth::InjectAnomalies(records, spec, config.injection_seed);
}

BenchmarkRun RunBenchmark(const std::vector<dataset::TimeSeriesRecord>& records,
                          const RunConfig& config) {
  const PreparedData data = PrepareData(records, config.data);
  const auto model = TrainModel(data.train, config.model);
  const int step = config.benchmark.step;
  const Detection detection = Detect(*model, data, step);
  const ImportanceResult gfi =
      GlobalFeatureImportance(data.train, config.importance, step);

  std::vector<int> picked;
  for (const auto& r : detection.test) {
    if (r.verdict != anomaly::Verdict::kAnomalous) continue;
    if (config.max_anomalies > 0 &&
        static_cast<int>(picked.size()) >= config.max_anomalies) {
      break;
    }
    picked.push_back(r.window_index);
  }
  analyze::BenchmarkInputs in;
  in.model = model.get();
  in.train_flat = &data.train.inputs;
  in.anomalies.resize(picked.size(), data.test.inputs.cols());
  for (size_t i = 0; i < picked.size(); ++i) {
    in.anomalies.row(i) = data.test.inputs.row(picked[i]);
  }
  in.anomaly_ids = picked;
  in.similarity_weights = gfi.importance.transformed;

  BenchmarkRun run;
  run.detected = detection.anomalous;
  run.explained = static_cast<int>(picked.size());
  run.metrics = EvaluateModel(*model, data);
  run.report = analyze::StabilityBenchmark(in, config.benchmark);
  run.report.metadata["model_seed"] = config.model.mlp.seed;
  run.report.metadata["data_seed"] = config.synth.seed;
  run.report.metadata["importance_seed"] = config.importance.forest.seed;
  run.report.metadata["detected"] = run.detected;
  return run;
}

}  // namespace ctxshap::pipeline
