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

#ifndef CTXSHAP_ANALYZE_H_
#define CTXSHAP_ANALYZE_H_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ctxshap/context.h"
#include "ctxshap/explain.h"
#include "ctxshap/predictor.h"
#include "ctxshap/stats.h"

// Interpreting attributions: contributor/offset roles, the additive
// decomposition check, heatmap data, and the random-vs-similar background
// stability benchmark.
namespace ctxshap::analyze {

enum class Role { kContributor, kOffset, kNegligible };
std::string RoleName(Role r);

inline constexpr double kDefaultNegligible = 1e-6;

struct CategorizedAttribution {
  explain::Attribution attribution;
  double actual = 0.0;
  double predicted = 0.0;
  double epsilon = kDefaultNegligible;
  std::vector<Role> roles;
};

// Under-prediction (actual > predicted): negative phi pushes the prediction
// further from the truth (contributor), positive phi pulls it back (offset).
// Over-prediction mirrors this.
CategorizedAttribution Categorize(const explain::Attribution& a, double actual,
                                  double predicted,
                                  double epsilon = kDefaultNegligible);

// Allowed |phi0 + sum(phi) - f_x| for a method.
double DecompositionTolerance(explain::Method method);

// phi0 + sum(phi). Raises an integrity error when it misses f_x by more than
// the method tolerance.
double ReconstructPrediction(const explain::Attribution& a);

struct HeatmapData {
  std::vector<std::string> feature_names;
  RowMatrix grid;               // F x I, grid(f, t) = phi[t * F + f]
  std::vector<int> row_order;   // features by descending max |phi|
  Vector cumulative;            // base + attributions through step t
  double base_value = 0.0;
  double f_x = 0.0;
};

HeatmapData HeatmapExport(const CategorizedAttribution& a, WindowShape shape,
                          const std::vector<std::string>& feature_names);
// One row per feature in row_order: feature, then I values.
void WriteHeatmapCsv(std::ostream& out, const HeatmapData& h);
nlohmann::json HeatmapToJson(const HeatmapData& h);
nlohmann::json CategorizationToJson(const CategorizedAttribution& a,
                                    WindowShape shape,
                                    const std::vector<std::string>& names);

struct Variability {
  Vector per_feature_sd;  // SD across attributions, n - 1 denominator
  double mean = 0.0;      // over features
  double sd = 0.0;        // over features
};

Variability ComputeVariability(std::span<const explain::Attribution> atts,
                               bool absolute = false);

double ReductionPct(double random_mean, double similar_mean);

struct BenchmarkConfig {
  std::vector<explain::Method> methods = {explain::Method::kKernel,
                                          explain::Method::kSampling,
                                          explain::Method::kPermutation};
  std::vector<context::Selection> selections = {context::Selection::kRandom,
                                                context::Selection::kSimilar};
  int k = 100;
  int kernel_samples = 4096;      // coalitions
  int sampling_samples = 8;       // permutations
  int permutation_samples = 4;    // permutation pairs
  uint64_t background_seed = 0;
  uint64_t explainer_seed = 0;
  context::CosineForm cosine_form = context::CosineForm::kWeightedSquares;
  // Across-rerun mode: the first `rerun_anomalies` anomalies are explained
  // `reruns` times with fresh random backgrounds and explainer seeds.
  int rerun_anomalies = 2;
  int reruns = 3;
  int min_anomalies = 10;
  // Control run: the similar arm reuses the random backgrounds.
  bool identical_selections = false;
  int step = 0;
  int workers = 1;
  std::string dataset_label = "synthetic";
};

struct BenchmarkInputs {
  const predictor::Predictor* model = nullptr;
  const RowMatrix* train_flat = nullptr;  // candidate background rows
  RowMatrix anomalies;                    // one flattened window per row
  std::vector<int> anomaly_ids;           // window index of each row
  Vector similarity_weights;              // exp-transformed importances
};

struct VariabilityRow {
  explain::Method method;
  context::Selection selection;
  std::string mode;   // "across-anomalies" or "across-reruns"
  std::string value;  // "signed" or "absolute"
  Variability variability;
};

struct Comparison {
  explain::Method method;
  std::string mode;
  std::string value;
  double random_mean = 0.0;
  double random_sd = 0.0;
  double similar_mean = 0.0;
  double similar_sd = 0.0;
  std::optional<double> reduction_pct;
  // Bartlett on the two per-feature SD vectors.
  std::optional<stats::BartlettResult> bartlett_sd;
  // Bartlett on all pooled attribution values of each arm.
  std::optional<stats::BartlettResult> bartlett_pooled;
  std::vector<std::string> notes;
};

struct StabilityReport {
  std::vector<VariabilityRow> rows;
  std::vector<Comparison> comparisons;
  nlohmann::json metadata;

  // The headline comparison (across anomalies, signed) for a method.
  const Comparison& Primary(explain::Method method) const;
};

StabilityReport StabilityBenchmark(const BenchmarkInputs& inputs,
                                   const BenchmarkConfig& config);

nlohmann::json ReportToJson(const StabilityReport& report);
// dataset, method, random mean/sd, similar mean/sd, statistic, p, reduction.
void WriteReportCsv(std::ostream& out, const StabilityReport& report);

}  // namespace ctxshap::analyze

#endif  // CTXSHAP_ANALYZE_H_
