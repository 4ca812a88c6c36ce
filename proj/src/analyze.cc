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

#include "ctxshap/analyze.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ctxshap/error.h"
#include "ctxshap/parallel.h"
#include "ctxshap/rng.h"

namespace ctxshap::analyze {
namespace {

using explain::Attribution;
using explain::Method;
using context::Selection;

constexpr const char* kAcrossAnomalies = "across-anomalies";
constexpr const char* kAcrossReruns = "across-reruns";

// Streams for DeriveSeed, kept apart so that adding a mode never shifts the
// seeds of another.
constexpr uint64_t kBackgroundStream = 0x100000;
constexpr uint64_t kExplainerStream = 0x200000;
constexpr uint64_t kRerunStream = 0x300000;

int SamplesFor(Method m, const BenchmarkConfig& c) {
  switch (m) {
    case Method::kKernel:
      return c.kernel_samples;
    case Method::kSampling:
      return c.sampling_samples;
    case Method::kPermutation:
      return c.permutation_samples;
    case Method::kExact:
      return 0;
  }
  return 0;
}

Variability FromPerFeature(Vector per_feature_sd) {
  Variability v;
  v.per_feature_sd = std::move(per_feature_sd);
  std::span<const double> sds(v.per_feature_sd.data(),
                              v.per_feature_sd.size());
  v.mean = stats::Mean(sds);
  v.sd = sds.size() >= 2 ? stats::SampleSd(sds) : 0.0;
  return v;
}

std::optional<stats::BartlettResult> TryBartlett(std::span<const double> a,
                                                 std::span<const double> b,
                                                 const std::string& label,
                                                 std::vector<std::string>* notes) {
  try {
    return stats::BartlettTest(a, b);
  } catch (const Error& e) {
    notes->push_back(label + ": " + e.what());
    return std::nullopt;
  }
}

std::vector<double> Pooled(const std::vector<Attribution>& atts,
                           bool absolute) {
  std::vector<double> out;
  for (const auto& a : atts) {
    for (Eigen::Index i = 0; i < a.phi.size(); ++i) {
      out.push_back(absolute ? std::abs(a.phi[i]) : a.phi[i]);
    }
  }
  return out;
}

nlohmann::json OptionalNumber(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json BartlettJson(const std::optional<stats::BartlettResult>& r) {
  if (!r) return nullptr;
  return {{"statistic", r->statistic}, {"p_value", r->p_value}};
}

}  // namespace

std::string RoleName(Role r) {
  switch (r) {
    case Role::kContributor:
      return "contributor";
    case Role::kOffset:
      return "offset";
    case Role::kNegligible:
      return "negligible";
  }
  return "unknown";
}

CategorizedAttribution Categorize(const Attribution& a, double actual,
                                  double predicted, double epsilon) {
  Require(actual != predicted, ErrorCode::kUndefined,
          "actual equals predicted; the error direction is undefined");
  Require(epsilon >= 0.0, ErrorCode::kParameter,
          "negligible band must be nonnegative");
  CategorizedAttribution out;
  out.attribution = a;
  out.actual = actual;
  out.predicted = predicted;
  out.epsilon = epsilon;
  // Orient phi so that positive means "towards the actual value".
  const double sign = actual > predicted ? 1.0 : -1.0;
  out.roles.reserve(a.phi.size());
  for (Eigen::Index i = 0; i < a.phi.size(); ++i) {
    const double v = sign * a.phi[i];
    if (v < -epsilon) {
      out.roles.push_back(Role::kContributor);
    } else if (v > epsilon) {
      out.roles.push_back(Role::kOffset);
    } else {
      out.roles.push_back(Role::kNegligible);
    }
  }
  return out;
}

double DecompositionTolerance(Method method) {
  switch (method) {
    case Method::kKernel:
      return 1e-8;
    case Method::kExact:
    case Method::kSampling:
    case Method::kPermutation:
      return 1e-9;
  }
  return 1e-8;
}

double ReconstructPrediction(const Attribution& a) {
  const double total = a.phi0 + a.phi.sum();
  const double gap = std::abs(total - a.f_x);
  const double tol = DecompositionTolerance(a.method) *
                     std::max(1.0, std::abs(a.f_x));
  if (!(gap <= tol)) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "base value plus attributions is "
        << total << " but the model output is " << a.f_x << " ("
        << explain::MethodName(a.method) << ")";
    Fail(ErrorCode::kIntegrity, msg.str());
  }
  return total;
}

HeatmapData HeatmapExport(const CategorizedAttribution& a, WindowShape shape,
                          const std::vector<std::string>& feature_names) {
  const Attribution& att = a.attribution;
  Require(att.phi.size() == shape.flat_size(), ErrorCode::kShape,
          "attribution length " + std::to_string(att.phi.size()) +
              " does not match window " + std::to_string(shape.steps) + "x" +
              std::to_string(shape.features));
  Require(static_cast<int>(feature_names.size()) == shape.features,
          ErrorCode::kShape, "feature name count does not match window");
  ReconstructPrediction(att);

  HeatmapData h;
  h.feature_names = feature_names;
  h.base_value = att.phi0;
  h.f_x = att.f_x;
  h.grid.resize(shape.features, shape.steps);
  for (int t = 0; t < shape.steps; ++t) {
    for (int f = 0; f < shape.features; ++f) {
      h.grid(f, t) = att.phi[shape.FlatIndex(t, f)];
    }
  }
  std::vector<double> peak(shape.features);
  for (int f = 0; f < shape.features; ++f) {
    peak[f] = h.grid.row(f).cwiseAbs().maxCoeff();
  }
  h.row_order.resize(shape.features);
  std::iota(h.row_order.begin(), h.row_order.end(), 0);
  std::stable_sort(h.row_order.begin(), h.row_order.end(),
                   [&](int l, int r) { return peak[l] > peak[r]; });
  h.cumulative.resize(shape.steps);
  double running = att.phi0;
  for (int t = 0; t < shape.steps; ++t) {
    running += h.grid.col(t).sum();
    h.cumulative[t] = running;
  }
  // Pin the endpoint; the summation order above differs from phi.sum().
  if (shape.steps > 0) h.cumulative[shape.steps - 1] = att.f_x;
  return h;
}

void WriteHeatmapCsv(std::ostream& out, const HeatmapData& h) {
  out << std::setprecision(17);
  out << "feature";
  for (Eigen::Index t = 0; t < h.grid.cols(); ++t) out << ",t" << t;
  out << '\n';
  for (int f : h.row_order) {
    out << h.feature_names[f];
    for (Eigen::Index t = 0; t < h.grid.cols(); ++t) out << ',' << h.grid(f, t);
    out << '\n';
  }
}

nlohmann::json HeatmapToJson(const HeatmapData& h) {
  nlohmann::json order = nlohmann::json::array();
  for (int f : h.row_order) order.push_back(h.feature_names[f]);
  std::vector<double> cumulative(h.cumulative.data(),
                                 h.cumulative.data() + h.cumulative.size());
  return {{"rows", std::move(order)},
          {"steps", h.grid.cols()},
          {"base_value", h.base_value},
          {"f_x", h.f_x},
          {"cumulative", std::move(cumulative)}};
}

nlohmann::json CategorizationToJson(const CategorizedAttribution& a,
                                    WindowShape shape,
                                    const std::vector<std::string>& names) {
  const double reconstructed = ReconstructPrediction(a.attribution);
  nlohmann::json j = explain::AttributionToJson(a.attribution, shape, names);
  j["actual"] = a.actual;
  j["predicted"] = a.predicted;
  j["direction"] = a.actual > a.predicted ? "under-prediction"
                                          : "over-prediction";
  j["epsilon"] = a.epsilon;
  j["reconstructed"] = reconstructed;
  int contributors = 0, offsets = 0;
  for (size_t i = 0; i < a.roles.size(); ++i) {
    j["phi"][i]["role"] = RoleName(a.roles[i]);
    contributors += a.roles[i] == Role::kContributor;
    offsets += a.roles[i] == Role::kOffset;
  }
  j["contributors"] = contributors;
  j["offsets"] = offsets;
  return j;
}

Variability ComputeVariability(std::span<const Attribution> atts,
                               bool absolute) {
  Require(atts.size() >= 2, ErrorCode::kSizing,
          "variability needs at least two attributions");
  const Eigen::Index p = atts[0].phi.size();
  for (const auto& a : atts) {
    Require(a.method == atts[0].method, ErrorCode::kGrouping,
            "attributions from " + explain::MethodName(a.method) + " and " +
                explain::MethodName(atts[0].method) + " in one group");
    Require(a.phi.size() == p, ErrorCode::kShape,
            "attributions of different lengths in one group");
  }
  const double n = static_cast<double>(atts.size());
  Vector sd(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    double mean = 0.0;
    for (const auto& a : atts) mean += absolute ? std::abs(a.phi[i]) : a.phi[i];
    mean /= n;
    double ss = 0.0;
    for (const auto& a : atts) {
      const double d = (absolute ? std::abs(a.phi[i]) : a.phi[i]) - mean;
      ss += d * d;
    }
    sd[i] = std::sqrt(ss / (n - 1.0));
  }
  return FromPerFeature(std::move(sd));
}

double ReductionPct(double random_mean, double similar_mean) {
  Require(random_mean != 0.0, ErrorCode::kUndefined,
          "random-background variability is zero; reduction undefined");
  return (random_mean - similar_mean) / random_mean * 100.0;
}

const Comparison& StabilityReport::Primary(Method method) const {
  for (const auto& c : comparisons) {
    if (c.method == method && c.mode == kAcrossAnomalies &&
        c.value == "signed") {
      return c;
    }
  }
  Fail(ErrorCode::kLookup,
       "no comparison for method " + explain::MethodName(method));
}

StabilityReport StabilityBenchmark(const BenchmarkInputs& in,
                                   const BenchmarkConfig& cfg) {
  Require(in.model != nullptr && in.train_flat != nullptr, ErrorCode::kState,
          "benchmark needs a model and training windows");
  const int n = static_cast<int>(in.anomalies.rows());
  Require(n >= cfg.min_anomalies, ErrorCode::kSizing,
          "stability benchmark needs at least " +
              std::to_string(cfg.min_anomalies) + " anomalies, got " +
              std::to_string(n));
  Require(static_cast<int>(in.anomaly_ids.size()) == n, ErrorCode::kShape,
          "anomaly ids do not match anomaly rows");
  Require(!cfg.methods.empty(), ErrorCode::kParameter, "no methods given");
  const bool has_random =
      std::count(cfg.selections.begin(), cfg.selections.end(),
                 Selection::kRandom) > 0;
  const bool has_similar =
      std::count(cfg.selections.begin(), cfg.selections.end(),
                 Selection::kSimilar) > 0;
  Require(has_random && has_similar, ErrorCode::kParameter,
          "both random and similar selections are required");

  const std::vector<Selection> sels = {Selection::kRandom,
                                       Selection::kSimilar};
  const int n_methods = static_cast<int>(cfg.methods.size());
  // atts[m][s][i]
  std::vector<std::vector<std::vector<Attribution>>> atts(
      n_methods, std::vector<std::vector<Attribution>>(
                     2, std::vector<Attribution>(n)));
  std::vector<std::vector<int>> bg_indices(2 * n);

  auto explain_one = [&](const Vector& x, const RowMatrix& bg, Method m,
                         uint64_t seed) {
    explain::ExplainerConfig ec;
    ec.n_samples = SamplesFor(m, cfg);
    ec.seed = seed;
    ec.step = cfg.step;
    ec.workers = 1;
    return explain::Explain(m, *in.model, x, bg, ec);
  };

  ParallelFor(n, cfg.workers, [&](int i) {
    const Vector x = in.anomalies.row(i).transpose();
    const context::BackgroundSet random = context::RandomBackground(
        *in.train_flat, cfg.k,
        DeriveSeed(cfg.background_seed, kBackgroundStream + i));
    context::BackgroundSet similar =
        cfg.identical_selections
            ? random
            : context::SelectBackground(x, *in.train_flat,
                                        in.similarity_weights, cfg.k,
                                        cfg.cosine_form, 1);
    bg_indices[2 * i] = random.indices;
    bg_indices[2 * i + 1] = similar.indices;
    // Both arms share the explainer seed so that only the background differs.
    const uint64_t seed = DeriveSeed(cfg.explainer_seed, kExplainerStream + i);
    for (int m = 0; m < n_methods; ++m) {
      atts[m][0][i] = explain_one(x, random.samples, cfg.methods[m], seed);
      atts[m][1][i] = explain_one(x, similar.samples, cfg.methods[m], seed);
    }
  });

  StabilityReport report;
  const std::vector<std::pair<std::string, bool>> values = {{"signed", false},
                                                            {"absolute", true}};
  for (int m = 0; m < n_methods; ++m) {
    for (const auto& [value_name, absolute] : values) {
      Variability v[2];
      for (int s = 0; s < 2; ++s) {
        v[s] = ComputeVariability(atts[m][s], absolute);
        report.rows.push_back(
            {cfg.methods[m], sels[s], kAcrossAnomalies, value_name, v[s]});
      }
      Comparison c;
      c.method = cfg.methods[m];
      c.mode = kAcrossAnomalies;
      c.value = value_name;
      c.random_mean = v[0].mean;
      c.random_sd = v[0].sd;
      c.similar_mean = v[1].mean;
      c.similar_sd = v[1].sd;
      if (v[0].mean > 0.0) {
        c.reduction_pct = ReductionPct(v[0].mean, v[1].mean);
      } else {
        c.notes.push_back("reduction undefined: random variability is zero");
      }
      c.bartlett_sd = TryBartlett(
          {v[0].per_feature_sd.data(),
           static_cast<size_t>(v[0].per_feature_sd.size())},
          {v[1].per_feature_sd.data(),
           static_cast<size_t>(v[1].per_feature_sd.size())},
          "bartlett on per-feature SDs", &c.notes);
      const auto pa = Pooled(atts[m][0], absolute);
      const auto pb = Pooled(atts[m][1], absolute);
      c.bartlett_pooled =
          TryBartlett(pa, pb, "bartlett on pooled attributions", &c.notes);
      report.comparisons.push_back(std::move(c));
    }
  }

  // Run-to-run mode: same anomaly, fresh random draws and explainer seeds.
  const int rerun_n = std::min(cfg.rerun_anomalies, n);
  if (rerun_n > 0 && cfg.reruns >= 2) {
    // reruns_atts[i][m][s][r]
    std::vector<std::vector<std::vector<std::vector<Attribution>>>> rr(
        rerun_n, std::vector<std::vector<std::vector<Attribution>>>(
                     n_methods, std::vector<std::vector<Attribution>>(
                                    2, std::vector<Attribution>(cfg.reruns))));
    ParallelFor(rerun_n * cfg.reruns, cfg.workers, [&](int job) {
      const int i = job / cfg.reruns;
      const int r = job % cfg.reruns;
      const uint64_t stream = kRerunStream + static_cast<uint64_t>(job);
      const Vector x = in.anomalies.row(i).transpose();
      const context::BackgroundSet random = context::RandomBackground(
          *in.train_flat, cfg.k, DeriveSeed(cfg.background_seed, stream));
      const context::BackgroundSet similar =
          cfg.identical_selections
              ? random
              : context::SelectBackground(x, *in.train_flat,
                                          in.similarity_weights, cfg.k,
                                          cfg.cosine_form, 1);
      const uint64_t seed = DeriveSeed(cfg.explainer_seed, stream);
      for (int m = 0; m < n_methods; ++m) {
        rr[i][m][0][r] = explain_one(x, random.samples, cfg.methods[m], seed);
        rr[i][m][1][r] = explain_one(x, similar.samples, cfg.methods[m], seed);
      }
    });
    for (int m = 0; m < n_methods; ++m) {
      for (const auto& [value_name, absolute] : values) {
        Variability v[2];
        for (int s = 0; s < 2; ++s) {
          // Average the per-feature run-to-run SD over the rerun anomalies.
          Vector acc = Vector::Zero(in.anomalies.cols());
          for (int i = 0; i < rerun_n; ++i) {
            acc += ComputeVariability(rr[i][m][s], absolute).per_feature_sd;
          }
          v[s] = FromPerFeature(acc / rerun_n);
          report.rows.push_back(
              {cfg.methods[m], sels[s], kAcrossReruns, value_name, v[s]});
        }
        Comparison c;
        c.method = cfg.methods[m];
        c.mode = kAcrossReruns;
        c.value = value_name;
        c.random_mean = v[0].mean;
        c.random_sd = v[0].sd;
        c.similar_mean = v[1].mean;
        c.similar_sd = v[1].sd;
        if (v[0].mean > 0.0) {
          c.reduction_pct = ReductionPct(v[0].mean, v[1].mean);
        } else {
          c.notes.push_back("reduction undefined: random variability is zero");
        }
        c.bartlett_sd = TryBartlett(
            {v[0].per_feature_sd.data(),
             static_cast<size_t>(v[0].per_feature_sd.size())},
            {v[1].per_feature_sd.data(),
             static_cast<size_t>(v[1].per_feature_sd.size())},
            "bartlett on per-feature SDs", &c.notes);
        report.comparisons.push_back(std::move(c));
      }
    }
  }

  nlohmann::json methods = nlohmann::json::array();
  nlohmann::json budgets = nlohmann::json::object();
  for (Method m : cfg.methods) {
    methods.push_back(explain::MethodName(m));
    budgets[explain::MethodName(m)] = SamplesFor(m, cfg);
  }
  nlohmann::json backgrounds = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    backgrounds.push_back({{"anomaly", in.anomaly_ids[i]},
                           {"random", bg_indices[2 * i]},
                           {"similar", bg_indices[2 * i + 1]}});
  }
  report.metadata = {
      {"dataset", cfg.dataset_label},
      {"model", in.model->kind()},
      {"k", cfg.k},
      {"methods", std::move(methods)},
      {"budgets", std::move(budgets)},
      {"background_seed", cfg.background_seed},
      {"explainer_seed", cfg.explainer_seed},
      {"cosine_form", context::CosineFormName(cfg.cosine_form)},
      {"identical_selections", cfg.identical_selections},
      {"anomaly_count", n},
      {"anomaly_ids", in.anomaly_ids},
      {"flat_features", in.anomalies.cols()},
      {"step", cfg.step},
      {"rerun_anomalies", rerun_n},
      {"reruns", cfg.reruns},
      {"backgrounds", std::move(backgrounds)}};
  return report;
}

nlohmann::json ReportToJson(const StabilityReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"method", explain::MethodName(r.method)},
                    {"selection", context::SelectionName(r.selection)},
                    {"mode", r.mode},
                    {"value", r.value},
                    {"mean", r.variability.mean},
                    {"sd", r.variability.sd}});
  }
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : report.comparisons) {
    comps.push_back({{"method", explain::MethodName(c.method)},
                     {"mode", c.mode},
                     {"value", c.value},
                     {"random_mean", c.random_mean},
                     {"random_sd", c.random_sd},
                     {"similar_mean", c.similar_mean},
                     {"similar_sd", c.similar_sd},
                     {"reduction_pct", OptionalNumber(c.reduction_pct)},
                     {"bartlett_per_feature_sd", BartlettJson(c.bartlett_sd)},
                     {"bartlett_pooled", BartlettJson(c.bartlett_pooled)},
                     {"notes", c.notes}});
  }
  return {{"metadata", report.metadata},
          {"rows", std::move(rows)},
          {"comparisons", std::move(comps)}};
}

void WriteReportCsv(std::ostream& out, const StabilityReport& report) {
  out << "dataset,method,random_mean,random_sd,similar_mean,similar_sd,"
         "bartlett_statistic,p_value,reduction_pct\n";
  out << std::setprecision(10);
  const std::string dataset = report.metadata.value("dataset", "");
  for (const auto& c : report.comparisons) {
    if (c.mode != kAcrossAnomalies || c.value != "signed") continue;
    out << dataset << ',' << explain::MethodName(c.method) << ','
        << c.random_mean << ',' << c.random_sd << ',' << c.similar_mean << ','
        << c.similar_sd << ',';
    if (c.bartlett_sd) {
      out << c.bartlett_sd->statistic << ',' << c.bartlett_sd->p_value;
    } else {
      out << ',';
    }
    out << ',';
    if (c.reduction_pct) out << *c.reduction_pct;
    out << '\n';
  }
}

}  // namespace ctxshap::analyze
