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

// ctxshap: forecast-residual anomaly detection with context-selected
// Shapley explanations.
//
//   ctxshap synth --out DIR [--hours N] [--anomalies N] [--seed S]
//   ctxshap train --data CSV --out DIR [--model ridge|mlp|forest]
//   ctxshap detect --model DIR/model.json --data CSV [--out DIR]
//   ctxshap explain --model DIR/model.json --data CSV --anomaly W --out DIR
//   ctxshap benchmark --out DIR [--data CSV] [--config FILE]
//
// Exit codes: 0 success, 2 usage, 3 data error, 4 numerical error.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "ctxshap/analyze.h"
#include "ctxshap/context.h"
#include "ctxshap/dataset.h"
#include "ctxshap/error.h"
#include "ctxshap/explain.h"
#include "ctxshap/pipeline.h"
#include "ctxshap/predictor.h"
#include "ctxshap/rng.h"
#include "ctxshap/synth.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctxshap;

constexpr const char* kVersion = "0.1.0";

json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  Require(in.good(), ErrorCode::kInput, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  Require(out.good(), ErrorCode::kInput, "cannot write " + path.string());
  out << text;
}

void WriteJson(const fs::path& path, const json& j) {
  WriteText(path, j.dump(2) + "\n");
}

void MakeDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  Require(!ec, ErrorCode::kInput,
          "cannot create " + dir.string() + ": " + ec.message());
}

void WriteManifest(const fs::path& dir, const std::string& command,
                   const json& config, const std::vector<std::string>& files) {
  WriteJson(dir / "manifest.json", {{"tool", "ctxshap"},
                                    {"version", kVersion},
                                    {"command", command},
                                    {"config", config},
                                    {"files", files}});
}

// Effective run configuration: defaults, then the config file, then flags.
struct Common {
  std::string config_path;
  int workers = 1;

  pipeline::RunConfig Load() const {
    pipeline::RunConfig c;
    if (!config_path.empty()) c = pipeline::RunConfigFromJson(ReadJson(config_path));
    c.model.forest.workers = workers;
    c.importance.forest.workers = workers;
    c.benchmark.workers = workers;
    return c;
  }
};

void AddCommon(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  app->add_option("--workers", common.workers,
                  "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1, 256));
}

std::vector<dataset::TimeSeriesRecord> LoadRecords(const std::string& path) {
  auto report = dataset::IngestCsv(path);
  if (!report.gaps.empty()) {
    std::cerr << "warning: " << report.gaps.size()
              << " missing hourly timestamps in " << path << " (first "
              << dataset::FormatTimestamp(report.gaps.front()) << ")\n";
  }
  return std::move(report.records);
}

struct LoadedModel {
  std::unique_ptr<predictor::Predictor> model;
  pipeline::PreparedData data;
  fs::path dir;
};

LoadedModel LoadModelAndData(const std::string& model_path,
                             const std::string& data_path) {
  LoadedModel out;
  out.dir = fs::path(model_path).parent_path();
  if (out.dir.empty()) out.dir = ".";
  out.model = predictor::LoadModel(model_path);
  const fs::path pre = out.dir / "preprocess.json";
  Require(fs::exists(pre), ErrorCode::kInput,
          "missing " + pre.string() + " (written by train next to the model)");
  out.data = pipeline::PrepareWithPreprocess(LoadRecords(data_path),
                                             ReadJson(pre));
  Require(out.model->input_shape() == out.data.test.shape, ErrorCode::kShape,
          "model window does not match the preprocessed data");
  return out;
}

json RecordToJson(const anomaly::AnomalyRecord& r,
                  const pipeline::PreparedData& data) {
  return {{"window_index", r.window_index},
          {"timestamp", dataset::FormatTimestamp(
                            data.test.target_timestamps[r.window_index])},
          {"predicted", r.predicted},
          {"actual", r.actual},
          {"e", r.e},
          {"verdict", anomaly::VerdictName(r.verdict)}};
}

json ThresholdToJson(const anomaly::AnomalyThreshold& t) {
  return {{"q1", t.q1}, {"q3", t.q3}, {"iqr", t.iqr},
          {"lower", t.lower}, {"upper", t.upper}};
}

// ---- synth

struct SynthArgs {
  Common common;
  std::string out;
  std::optional<int> hours;
  std::optional<int> anomalies;
  std::optional<uint64_t> seed;
  std::optional<std::string> kind;
  std::optional<double> magnitude;
  std::optional<double> noise;
};

int RunSynth(const SynthArgs& a) {
  pipeline::RunConfig c = a.common.Load();
  if (a.hours) c.synth.length = *a.hours;
  if (a.anomalies) c.anomalies.count = *a.anomalies;
  if (a.seed) {
    c.synth.seed = *a.seed;
    c.injection_seed = *a.seed;
  }
  if (a.kind) c.anomalies.kind = synth::ParseAnomalyKind(*a.kind);
  if (a.magnitude) c.anomalies.magnitude_sigmas = *a.magnitude;
  if (a.noise) c.synth.noise_sd = *a.noise;
  c.inject = c.anomalies.count > 0;

  const auto result = pipeline::MakeSyntheticSeries(c);
  MakeDir(a.out);
  std::ofstream csv(fs::path(a.out) / "data.csv", std::ios::binary);
  Require(csv.good(), ErrorCode::kInput, "cannot write data.csv");
  dataset::WriteCsv(csv, result.records);
  csv.close();

  json truth = json::array();
  for (const auto& g : result.ground_truth) {
    truth.push_back({{"index", g.index},
                     {"timestamp", dataset::FormatTimestamp(g.timestamp)},
                     {"kind", synth::AnomalyKindName(g.kind)},
                     {"duration", g.duration},
                     {"magnitude", g.magnitude}});
  }
  WriteJson(fs::path(a.out) / "ground_truth.json",
            {{"anomalies", truth}, {"seed", c.injection_seed}});
  WriteManifest(a.out, "synth", pipeline::RunConfigToJson(c),
                {"data.csv", "ground_truth.json"});
  std::cout << "wrote " << result.records.size() << " hours with "
            << result.ground_truth.size() << " anomalies to " << a.out << "\n";
  return 0;
}

// ---- train

struct TrainArgs {
  Common common;
  std::string data;
  std::string out;
  std::optional<std::string> model;
  std::optional<uint64_t> seed;
  std::optional<int> window;
  std::optional<int> horizon;
};

int RunTrain(const TrainArgs& a) {
  pipeline::RunConfig c = a.common.Load();
  if (a.model) c.model.kind = *a.model;
  if (a.seed) {
    c.model.mlp.seed = *a.seed;
    c.model.forest.seed = *a.seed;
  }
  if (a.window) c.data.window_length = *a.window;
  if (a.horizon) c.data.horizon = *a.horizon;

  const auto data = pipeline::PrepareData(LoadRecords(a.data), c.data);
  const auto model = pipeline::TrainModel(data.train, c.model);
  const json metrics = pipeline::EvaluateModel(*model, data);
  const auto gfi = pipeline::GlobalFeatureImportance(
      data.train, c.importance, c.benchmark.step);

  MakeDir(a.out);
  const fs::path dir(a.out);
  predictor::SaveModel(*model, dir / "model.json");
  WriteJson(dir / "preprocess.json", pipeline::PreprocessToJson(data));
  WriteJson(dir / "metrics.json", metrics);
  WriteJson(dir / "importance.json",
            pipeline::ImportanceToJson(gfi, c.importance));
  WriteManifest(dir, "train", pipeline::RunConfigToJson(c),
                {"model.json", "preprocess.json", "metrics.json",
                 "importance.json"});
  std::cout << model->kind() << " trained on " << data.train.size()
            << " windows; test RMSE " << metrics["all_horizons"]["rmse"]
            << " kWh, R2 " << metrics["all_horizons"]["r2"] << "\n";
  return 0;
}

// ---- detect

struct DetectArgs {
  Common common;
  std::string model;
  std::string data;
  std::string out;
};

int RunDetect(const DetectArgs& a) {
  const auto loaded = LoadModelAndData(a.model, a.data);
  const auto detection = pipeline::Detect(*loaded.model, loaded.data);
  std::ostringstream lines;
  for (const auto& r : detection.test) {
    if (r.verdict != anomaly::Verdict::kAnomalous) continue;
    lines << RecordToJson(r, loaded.data).dump() << "\n";
  }
  const json summary = {
      {"summary",
       {{"anomalous", detection.anomalous},
        {"windows", static_cast<int>(detection.test.size())},
        {"threshold", ThresholdToJson(detection.threshold)}}}};
  lines << summary.dump() << "\n";
  if (!a.out.empty()) {
    MakeDir(a.out);
    WriteText(fs::path(a.out) / "anomalies.jsonl", lines.str());
    WriteManifest(a.out, "detect",
                  {{"model", a.model}, {"data", a.data}}, {"anomalies.jsonl"});
  }
  std::cout << lines.str();
  return 0;
}

// ---- explain

struct ExplainArgs {
  Common common;
  std::string model;
  std::string data;
  std::string out;
  int anomaly = -1;
  std::string method = "kernel";
  std::string selection = "similar";
  int k = 100;
  uint64_t seed = 0;
  std::optional<int> samples;
  std::string cosine = "weighted-squares";
};

int RunExplain(const ExplainArgs& a) {
  const auto method = explain::ParseMethod(a.method);
  const auto selection = context::ParseSelection(a.selection);
  const auto loaded = LoadModelAndData(a.model, a.data);
  const auto& data = loaded.data;
  const WindowShape shape = data.test.shape;
  if (method == explain::Method::kExact) {
    Require(shape.flat_size() <= explain::kMaxExactFeatures, ErrorCode::kBudget,
            "exact Shapley values over " + std::to_string(shape.flat_size()) +
                " features exceed the limit of " +
                std::to_string(explain::kMaxExactFeatures));
  }

  const auto detection = pipeline::Detect(*loaded.model, data);
  const anomaly::AnomalyRecord* record = nullptr;
  for (const auto& r : detection.test) {
    if (r.window_index == a.anomaly &&
        r.verdict == anomaly::Verdict::kAnomalous) {
      record = &r;
    }
  }
  Require(record != nullptr, ErrorCode::kLookup,
          "test window " + std::to_string(a.anomaly) +
              " is not a detected anomaly (run detect for the list)");

  const Vector x = data.test.inputs.row(a.anomaly).transpose();
  context::BackgroundSet bg;
  if (selection == context::Selection::kSimilar) {
    const fs::path gfi_path = loaded.dir / "importance.json";
    context::GlobalImportance gfi;
    if (fs::exists(gfi_path)) {
      gfi = pipeline::ImportanceFromJson(ReadJson(gfi_path));
    } else {
      pipeline::ImportanceConfig ic;
      ic.forest.workers = a.common.workers;
      gfi = pipeline::GlobalFeatureImportance(data.train, ic).importance;
    }
    bg = context::SelectBackground(x, data.train.inputs, gfi.transformed, a.k,
                                   context::ParseCosineForm(a.cosine),
                                   a.common.workers);
  } else {
    bg = context::RandomBackground(data.train.inputs, a.k, a.seed);
  }
  bg.anomaly_index = a.anomaly;

  explain::ExplainerConfig ec;
  ec.seed = a.seed;
  ec.workers = a.common.workers;
  if (a.samples) {
    ec.n_samples = *a.samples;
  } else if (method == explain::Method::kSampling ||
             method == explain::Method::kPermutation) {
    ec.n_samples = 64;
  }
  const auto att = explain::Explain(method, *loaded.model, x, bg.samples, ec);
  const auto cat =
      analyze::Categorize(att, record->actual, record->predicted);
  const auto heat = analyze::HeatmapExport(cat, shape, data.features.columns);

  MakeDir(a.out);
  const fs::path dir(a.out);
  json att_json = analyze::CategorizationToJson(cat, shape,
                                                data.features.columns);
  att_json["anomaly"] = RecordToJson(*record, data);
  WriteJson(dir / "attribution.json", att_json);
  WriteJson(dir / "background.json", context::BackgroundToJson(bg));
  {
    std::ostringstream csv;
    analyze::WriteHeatmapCsv(csv, heat);
    WriteText(dir / "heatmap.csv", csv.str());
  }
  WriteJson(dir / "heatmap.json", analyze::HeatmapToJson(heat));
  WriteManifest(dir, "explain",
                {{"model", a.model},
                 {"data", a.data},
                 {"anomaly", a.anomaly},
                 {"method", a.method},
                 {"selection", a.selection},
                 {"k", a.k},
                 {"seed", a.seed},
                 {"n_samples", ec.n_samples},
                 {"cosine_form", a.cosine}},
                {"attribution.json", "background.json", "heatmap.csv",
                 "heatmap.json"});
  std::cout << explain::MethodName(method) << " attribution of window "
            << a.anomaly << ": base " << att.phi0 << " + sum(phi) "
            << att.phi.sum() << " = " << att.f_x << " (" << att.n_evals
            << " model evaluations)\n";
  return 0;
}

// ---- benchmark

struct BenchmarkArgs {
  Common common;
  std::string out;
  std::string data;
  std::optional<uint64_t> seed;
  std::optional<int> k;
  std::optional<int> max_anomalies;
};

int RunBenchmarkCommand(const BenchmarkArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  pipeline::RunConfig c = a.common.Load();
  if (a.seed) {
    c.synth.seed = *a.seed;
    c.injection_seed = DeriveSeed(*a.seed, 1);
    c.benchmark.background_seed = DeriveSeed(*a.seed, 2);
    c.benchmark.explainer_seed = DeriveSeed(*a.seed, 3);
  }
  if (a.k) c.benchmark.k = *a.k;
  if (a.max_anomalies) c.max_anomalies = *a.max_anomalies;

  std::vector<dataset::TimeSeriesRecord> records;
  if (a.data.empty()) {
    records = pipeline::MakeSyntheticSeries(c).records;
  } else {
    records = LoadRecords(a.data);
    c.benchmark.dataset_label = fs::path(a.data).stem().string();
  }
  const auto run = pipeline::RunBenchmark(records, c);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  MakeDir(a.out);
  const fs::path dir(a.out);
  json report = analyze::ReportToJson(run.report);
  report["config"] = pipeline::RunConfigToJson(c);
  report["metrics"] = run.metrics;
  WriteJson(dir / "report.json", report);
  std::ostringstream csv;
  analyze::WriteReportCsv(csv, run.report);
  WriteText(dir / "report.csv", csv.str());
  WriteJson(dir / "runtime.json", {{"seconds", seconds}});
  WriteManifest(dir, "benchmark", pipeline::RunConfigToJson(c),
                {"report.json", "report.csv", "runtime.json"});

  std::cout << csv.str();
  std::cout << run.explained << " of " << run.detected
            << " detected anomalies explained in " << seconds << " s\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forecast-residual anomaly detection with context-selected "
               "Shapley explanations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  const std::vector<std::string> methods = {"kernel", "sampling",
                                            "permutation", "exact"};

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic series");
  AddCommon(synth_cmd, synth_args.common);
  synth_cmd->add_option("--out", synth_args.out, "Output directory")
      ->required();
  synth_cmd->add_option("--hours", synth_args.hours, "Series length")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--anomalies", synth_args.anomalies,
                        "Injected anomalies")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--seed", synth_args.seed, "Data and injection seed");
  synth_cmd->add_option("--kind", synth_args.kind, "Anomaly kind")
      ->check(CLI::IsMember({"spike", "level-shift", "sustained"}));
  synth_cmd->add_option("--magnitude", synth_args.magnitude,
                        "Anomaly size in noise standard deviations");
  synth_cmd->add_option("--noise", synth_args.noise, "Noise standard deviation")
      ->check(CLI::NonNegativeNumber);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a forecaster");
  AddCommon(train_cmd, train_args.common);
  train_cmd->add_option("--data", train_args.data, "Input CSV")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "Output directory")
      ->required();
  train_cmd->add_option("--model", train_args.model, "Model kind")
      ->check(CLI::IsMember({"ridge", "mlp", "forest"}));
  train_cmd->add_option("--seed", train_args.seed, "Model seed");
  train_cmd->add_option("--window", train_args.window, "Input window hours")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--horizon", train_args.horizon, "Forecast horizon")
      ->check(CLI::PositiveNumber);

  DetectArgs detect_args;
  auto* detect_cmd = app.add_subcommand("detect", "Flag anomalous test windows");
  AddCommon(detect_cmd, detect_args.common);
  detect_cmd->add_option("--model", detect_args.model, "model.json from train")
      ->required()
      ->check(CLI::ExistingFile);
  detect_cmd->add_option("--data", detect_args.data, "Input CSV")
      ->required()
      ->check(CLI::ExistingFile);
  detect_cmd->add_option("--out", detect_args.out, "Output directory");

  ExplainArgs explain_args;
  auto* explain_cmd = app.add_subcommand("explain", "Explain one anomaly");
  AddCommon(explain_cmd, explain_args.common);
  explain_cmd->add_option("--model", explain_args.model, "model.json")
      ->required()
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--data", explain_args.data, "Input CSV")
      ->required()
      ->check(CLI::ExistingFile);
  explain_cmd->add_option("--anomaly", explain_args.anomaly,
                          "Test window index of a detected anomaly")
      ->required();
  explain_cmd->add_option("--out", explain_args.out, "Output directory")
      ->required();
  explain_cmd->add_option("--method", explain_args.method, "Shapley estimator")
      ->check(CLI::IsMember(methods));
  explain_cmd->add_option("--selection", explain_args.selection,
                          "Background selection")
      ->check(CLI::IsMember({"similar", "random"}));
  explain_cmd->add_option("--k", explain_args.k, "Background size")
      ->check(CLI::PositiveNumber);
  explain_cmd->add_option("--seed", explain_args.seed,
                          "Random background and explainer seed");
  explain_cmd->add_option("--samples", explain_args.samples,
                          "Coalitions (kernel) or permutations (samplers)")
      ->check(CLI::PositiveNumber);
  explain_cmd->add_option("--cosine", explain_args.cosine,
                          "Weighted cosine form")
      ->check(CLI::IsMember({"weighted-squares", "squared-weights"}));

  BenchmarkArgs bench_args;
  auto* bench_cmd = app.add_subcommand(
      "benchmark", "Random vs similar background stability comparison");
  AddCommon(bench_cmd, bench_args.common);
  bench_cmd->add_option("--out", bench_args.out, "Output directory")
      ->required();
  bench_cmd->add_option("--data", bench_args.data,
                        "Input CSV (default: synthetic series from config)")
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--seed", bench_args.seed,
                        "Derives the data, injection, background and "
                        "explainer seeds");
  bench_cmd->add_option("--k", bench_args.k, "Background size")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--max-anomalies", bench_args.max_anomalies,
                        "Cap on explained anomalies (0 = all)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) return RunSynth(synth_args);
    if (*train_cmd) return RunTrain(train_args);
    if (*detect_cmd) return RunDetect(detect_args);
    if (*explain_cmd) return RunExplain(explain_args);
    if (*bench_cmd) return RunBenchmarkCommand(bench_args);
  } catch (const Error& e) {
    std::cerr << "ctxshap: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "ctxshap: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
