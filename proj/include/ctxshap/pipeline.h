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

#ifndef CTXSHAP_PIPELINE_H_
#define CTXSHAP_PIPELINE_H_

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "ctxshap/analyze.h"
#include "ctxshap/anomaly.h"
#include "ctxshap/context.h"
#include "ctxshap/dataset.h"
#include "ctxshap/explain.h"
#include "ctxshap/forest.h"
#include "ctxshap/mlp.h"
#include "ctxshap/ridge.h"
#include "ctxshap/synth.h"

// End-to-end plumbing shared by the command-line tool and the acceptance
// harness: preprocessing, training, evaluation, detection and the global
// importance surrogate.
namespace ctxshap::pipeline {

struct DataConfig {
  int window_length = 48;
  int horizon = 24;
  dataset::SplitFractions fractions;
  dataset::ImputationConfig imputation;
};

struct PreparedData {
  dataset::FeatureMatrix features;  // unscaled, all rows
  dataset::ScalingParams scaler;    // fitted on the training split
  dataset::Splits splits;           // scaled
  dataset::WindowedDataset train;
  dataset::WindowedDataset validation;
  dataset::WindowedDataset test;
  DataConfig config;
};

PreparedData PrepareData(const std::vector<dataset::TimeSeriesRecord>& records,
                         const DataConfig& config);

// Preprocessing state needed to reuse a trained model on the same data.
nlohmann::json PreprocessToJson(const PreparedData& data);
// Rebuilds the splits and windows of `records` with the stored scaler.
PreparedData PrepareWithPreprocess(
    const std::vector<dataset::TimeSeriesRecord>& records,
    const nlohmann::json& preprocess);

struct ModelConfig {
  std::string kind = "ridge";  // ridge | mlp | forest
  predictor::RidgeConfig ridge;
  predictor::MlpConfig mlp;
  predictor::ForestConfig forest;
};

std::unique_ptr<predictor::Predictor> TrainModel(
    const dataset::WindowedDataset& train, const ModelConfig& config);

struct Metrics {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double smape = 0.0;  // percent
  double mape = 0.0;   // percent, over nonzero actuals
  double r2 = 0.0;
  int count = 0;
  int mape_skipped = 0;  // zero actuals left out of MAPE
};

Metrics ComputeMetrics(const RowMatrix& actual, const RowMatrix& predicted);
nlohmann::json MetricsToJson(const Metrics& m);

// Test-split metrics in kWh, over all horizons and at h = 1.
nlohmann::json EvaluateModel(const predictor::Predictor& model,
                             const PreparedData& data);

struct Detection {
  anomaly::AnomalyThreshold threshold;  // from training-split errors
  std::vector<anomaly::AnomalyRecord> test;
  int anomalous = 0;
};

Detection Detect(const predictor::Predictor& model, const PreparedData& data,
                 int step = 0);

struct ImportanceConfig {
  predictor::ForestConfig forest{.n_trees = 50, .max_depth = 10};
  int max_rows = 4000;  // evenly strided subset of training windows, 0 = all
};

struct ImportanceResult {
  context::GlobalImportance importance;
  std::vector<std::string> warnings;
  std::optional<double> oob_mse;
};

// Random forest surrogate on the flattened training windows against the
// scaled h = 1 target.
ImportanceResult GlobalFeatureImportance(const dataset::WindowedDataset& train,
                                         const ImportanceConfig& config,
                                         int step = 0);
nlohmann::json ImportanceToJson(const ImportanceResult& r,
                                const ImportanceConfig& config);
context::GlobalImportance ImportanceFromJson(const nlohmann::json& j);

struct RunConfig {
  synth::SynthConfig synth;
  synth::AnomalySpec anomalies;
  bool inject = true;
  uint64_t injection_seed = 0;
  DataConfig data;
  ModelConfig model;
  ImportanceConfig importance;
  analyze::BenchmarkConfig benchmark;
  int max_anomalies = 0;  // benchmark cap on explained anomalies, 0 = all
};

// Overlays every key present in `j` onto `base`. Unknown keys are errors.
RunConfig RunConfigFromJson(const nlohmann::json& j, RunConfig base = {});
nlohmann::json RunConfigToJson(const RunConfig& c);

struct BenchmarkRun {
  analyze::StabilityReport report;
  int detected = 0;
  int explained = 0;
  nlohmann::json metrics;
};

BenchmarkRun RunBenchmark(const std::vector<dataset::TimeSeriesRecord>& records,
                          const RunConfig& config);

// Synthetic series with anomalies injected per the config.
synth::InjectionResult MakeSyntheticSeries(const RunConfig& config);

}  // namespace ctxshap::pipeline

#endif  // CTXSHAP_PIPELINE_H_
