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
#include <sstream>

#include "gtest/gtest.h"
#include "ctxshap/stats.h"
#include "test_util.h"

namespace ctxshap::analyze {
namespace {

using ::ctxshap::testing::LinearModel;
using ::ctxshap::testing::RaisesCode;
using ::ctxshap::testing::RandomMatrix;
using ::ctxshap::testing::RandomVector;
using explain::Attribution;
using explain::Method;

Attribution MakeAttribution(const Vector& phi, double phi0,
                            Method method = Method::kExact) {
  Attribution a;
  a.phi = phi;
  a.phi0 = phi0;
  a.f_x = phi0 + phi.sum();
  a.method = method;
  return a;
}

// Bartlett's statistic for two groups written out from its definition, with
// the one-degree-of-freedom chi-squared tail from erfc.
stats::BartlettResult BartlettOracle(const std::vector<double>& a,
                                     const std::vector<double>& b) {
  auto var = [](const std::vector<double>& v) {
    long double m = 0;
    for (double x : v) m += x;
    m /= v.size();
    long double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return static_cast<double>(s / (v.size() - 1));
  };
  const double na = a.size(), nb = b.size();
  const double va = var(a), vb = var(b);
  const double sp = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2);
  const double t = ((na + nb - 2) * std::log(sp) - (na - 1) * std::log(va) -
                    (nb - 1) * std::log(vb)) /
                   (1 + (1 / (na - 1) + 1 / (nb - 1) - 1 / (na + nb - 2)) / 3);
  const double stat = std::max(0.0, t);
  return {stat, std::erfc(std::sqrt(stat / 2))};
}

std::vector<double> Draw(int n, double sd, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = sd * rng.Normal();
  return v;
}

// ---- categorization

TEST(Categorize, UnderPrediction) {
  Vector phi(5);
  phi << -0.8, 0.4, 0.0, -2e-7, 1e-3;
  const auto c = Categorize(MakeAttribution(phi, 1.0), 4.75, 1.60);
  EXPECT_EQ(c.roles[0], Role::kContributor);
  EXPECT_EQ(c.roles[1], Role::kOffset);
  EXPECT_EQ(c.roles[2], Role::kNegligible);
  EXPECT_EQ(c.roles[3], Role::kNegligible);
  EXPECT_EQ(c.roles[4], Role::kOffset);
}

TEST(Categorize, ZeroAttributionIsNegligible) {
  const auto c = Categorize(MakeAttribution(Vector::Zero(4), 2.0), 1.0, 3.0);
  for (Role r : c.roles) EXPECT_EQ(r, Role::kNegligible);
}

TEST(Categorize, SwappingDirectionSwapsLabels) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector phi = RandomVector(20, rng, trial % 2 ? 1.0 : 1e-6);
    const double actual = rng.Normal(), predicted = actual + 0.5 + rng.Uniform();
    const auto a = MakeAttribution(phi, 0.1);
    const auto over = Categorize(a, actual, predicted);
    const auto under = Categorize(a, predicted, actual);
    for (int i = 0; i < 20; ++i) {
      const Role flipped = under.roles[i] == Role::kContributor ? Role::kOffset
                           : under.roles[i] == Role::kOffset
                               ? Role::kContributor
                               : Role::kNegligible;
      ASSERT_EQ(over.roles[i], flipped) << trial << " " << i;
    }
  }
}

TEST(Categorize, EqualActualAndPredicted) {
  const auto a = MakeAttribution(Vector::Ones(2), 0.0);
  EXPECT_TRUE(RaisesCode([&] { Categorize(a, 1.0, 1.0); },
                         ErrorCode::kUndefined));
}

// ---- decomposition

TEST(ReconstructPrediction, Tolerances) {
  const auto a = MakeAttribution(Vector::LinSpaced(6, -1, 1), 0.25);
  EXPECT_NEAR(ReconstructPrediction(a), a.f_x, 1e-9);
  Attribution kernel = a;
  kernel.method = Method::kKernel;
  kernel.f_x += 5e-9;
  EXPECT_NO_THROW(ReconstructPrediction(kernel));
  Attribution sampled = a;
  sampled.method = Method::kSampling;
  sampled.f_x += 5e-9;
  EXPECT_TRUE(RaisesCode([&] { ReconstructPrediction(sampled); },
                         ErrorCode::kIntegrity));
}

TEST(ReconstructPrediction, CorruptedEntry) {
  Rng rng(2);
  auto a = MakeAttribution(RandomVector(10, rng), 0.5);
  a.phi[3] = 0.0;
  EXPECT_TRUE(RaisesCode([&] { ReconstructPrediction(a); },
                         ErrorCode::kIntegrity));
}

TEST(ReconstructPrediction, HoldsForEveryMethod) {
  Rng rng(3);
  const auto m = LinearModel(RandomVector(8, rng), 0.2);
  const Vector x = RandomVector(8, rng);
  const RowMatrix bg = RandomMatrix(10, 8, rng);
  for (auto method : {Method::kKernel, Method::kSampling, Method::kPermutation,
                      Method::kExact}) {
    const auto a = explain::Explain(method, m, x, bg, {.n_samples = 40});
    EXPECT_NO_THROW(ReconstructPrediction(a)) << explain::MethodName(method);
  }
}

// ---- heatmap

TEST(Heatmap, GridCumulativeAndOrder) {
  Rng rng(4);
  const WindowShape shape{5, 3};
  const Vector phi = RandomVector(15, rng);
  const auto c = Categorize(MakeAttribution(phi, 1.5), 3.0, 1.0);
  const auto h = HeatmapExport(c, shape, {"a", "b", "c"});
  for (int t = 0; t < 5; ++t) {
    for (int f = 0; f < 3; ++f) EXPECT_EQ(h.grid(f, t), phi[t * 3 + f]);
  }
  EXPECT_EQ(h.cumulative[4], c.attribution.f_x);
  EXPECT_NEAR(h.cumulative[0], 1.5 + phi.head(3).sum(), 1e-12);
  for (size_t i = 1; i < h.row_order.size(); ++i) {
    EXPECT_GE(h.grid.row(h.row_order[i - 1]).cwiseAbs().maxCoeff(),
              h.grid.row(h.row_order[i]).cwiseAbs().maxCoeff());
  }
  std::ostringstream csv;
  WriteHeatmapCsv(csv, h);
  EXPECT_EQ(std::ranges::count(csv.str(), '\n'), 4);
  EXPECT_EQ(HeatmapToJson(h)["rows"].size(), 3u);
}

TEST(Heatmap, ShapeMismatch) {
  const auto c = Categorize(MakeAttribution(Vector::Ones(6), 0.0), 1.0, 0.0);
  EXPECT_TRUE(RaisesCode([&] { HeatmapExport(c, {4, 2}, {"a", "b"}); },
                         ErrorCode::kShape));
}

// ---- variability

TEST(Variability, IdenticalAttributionsHaveNone) {
  const auto a = MakeAttribution(Vector::LinSpaced(4, 0, 3), 1.0);
  const std::vector<Attribution> atts = {a, a, a};
  const auto v = ComputeVariability(atts);
  EXPECT_EQ(v.mean, 0.0);
  EXPECT_EQ(v.per_feature_sd, Vector::Zero(4));
}

TEST(Variability, TwoPointSd) {
  Vector phi = Vector::Zero(3);
  const auto a = MakeAttribution(phi, 0.0);
  phi[1] = 1.0;
  const auto b = MakeAttribution(phi, 0.0);
  const std::vector<Attribution> atts = {a, b};
  const auto v = ComputeVariability(atts);
  EXPECT_NEAR(v.per_feature_sd[1], std::sqrt(2.0) / 2, 1e-15);
  EXPECT_EQ(v.per_feature_sd[0], 0.0);
  EXPECT_NEAR(v.mean, std::sqrt(2.0) / 6, 1e-15);
}

TEST(Variability, OrderInvariantAndAbsolute) {
  Rng rng(5);
  std::vector<Attribution> atts;
  for (int i = 0; i < 12; ++i) {
    atts.push_back(MakeAttribution(RandomVector(7, rng), 0.0));
  }
  const auto v = ComputeVariability(atts);
  std::reverse(atts.begin(), atts.end());
  std::swap(atts[2], atts[9]);
  const auto w = ComputeVariability(atts);
  EXPECT_LE((v.per_feature_sd - w.per_feature_sd).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT(ComputeVariability(atts, true).mean, v.mean);
}

TEST(Variability, Errors) {
  const auto a = MakeAttribution(Vector::Ones(3), 0.0);
  const std::vector<Attribution> one = {a};
  EXPECT_TRUE(RaisesCode([&] { ComputeVariability(one); }, ErrorCode::kSizing));
  auto b = a;
  b.method = Method::kKernel;
  const std::vector<Attribution> mixed = {a, b};
  EXPECT_TRUE(RaisesCode([&] { ComputeVariability(mixed); },
                         ErrorCode::kGrouping));
}

TEST(ReductionPct, Values) {
  EXPECT_NEAR(ReductionPct(0.050, 0.028), 44.0, 1e-12);
  EXPECT_EQ(ReductionPct(0.3, 0.3), 0.0);
  EXPECT_EQ(ReductionPct(0.3, 0.0), 100.0);
  EXPECT_TRUE(RaisesCode([] { ReductionPct(0.0, 0.1); }, ErrorCode::kUndefined));
}

// ---- statistics

TEST(Bartlett, IdenticalGroups) {
  const std::vector<double> a = {1.0, 2.5, 3.0, 7.0, -1.0};
  const auto r = stats::BartlettTest(a, a);
  EXPECT_LE(r.statistic, 1e-9);
  EXPECT_NEAR(r.p_value, 1.0, 1e-9);
}

TEST(Bartlett, VarianceRatioFour) {
  Rng rng(6);
  int significant = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = Draw(50, 1.0, rng), b = Draw(50, 2.0, rng);
    significant += stats::BartlettTest(a, b).p_value < 0.01;
  }
  EXPECT_GE(significant, 18);
}

TEST(Bartlett, MatchesOracleAndIsSymmetric) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = Draw(5 + trial, 1.0, rng);
    const auto b = Draw(40 - trial, 0.6 + 0.1 * trial, rng);
    const auto r = stats::BartlettTest(a, b);
    const auto o = BartlettOracle(a, b);
    EXPECT_NEAR(r.statistic, o.statistic, 1e-9 * std::max(1.0, o.statistic));
    EXPECT_NEAR(r.p_value, o.p_value, 1e-6);
    const auto s = stats::BartlettTest(b, a);
    EXPECT_NEAR(r.statistic, s.statistic, 1e-12 * std::max(1.0, r.statistic));
  }
}

TEST(Bartlett, Errors) {
  const std::vector<double> flat = {2, 2, 2}, ok = {1, 2, 3}, tiny = {1};
  EXPECT_TRUE(RaisesCode([&] { stats::BartlettTest(flat, ok); },
                         ErrorCode::kDegenerate));
  EXPECT_TRUE(RaisesCode([&] { stats::BartlettTest(tiny, ok); },
                         ErrorCode::kSizing));
}

TEST(ChiSquared, KnownTails) {
  for (double x : {0.1, 1.0, 3.841458820694124, 6.634896601021214, 20.0}) {
    EXPECT_NEAR(stats::ChiSquaredSurvival(x, 1), std::erfc(std::sqrt(x / 2)),
                1e-14);
    EXPECT_NEAR(stats::ChiSquaredSurvival(x, 2), std::exp(-x / 2), 1e-14);
  }
  EXPECT_NEAR(stats::ChiSquaredSurvival(3.841458820694124, 1), 0.05, 1e-12);
  EXPECT_EQ(stats::ChiSquaredSurvival(0.0, 1), 1.0);
}

// ---- benchmark

struct BenchFixture {
  predictor::FunctionModel model = LinearModel(Vector::Zero(1), 0.0);
  RowMatrix train;
  BenchmarkInputs inputs;
};

BenchFixture MakeBench(int anomalies, uint64_t seed) {
  Rng rng(seed);
  BenchFixture f;
  const int p = 12;
  f.model = LinearModel(RandomVector(p, rng), 0.5);
  // Two regimes so that similarity has something to find.
  f.train = RandomMatrix(400, p, rng, 0.3);
  for (int r = 0; r < 400; ++r) f.train.row(r).array() += r % 2 ? 2.0 : -2.0;
  f.inputs.model = &f.model;
  f.inputs.train_flat = &f.train;
  f.inputs.anomalies = RandomMatrix(anomalies, p, rng, 0.3);
  for (int r = 0; r < anomalies; ++r) {
    f.inputs.anomalies.row(r).array() += r % 2 ? 2.0 : -2.0;
    f.inputs.anomaly_ids.push_back(100 + r);
  }
  f.inputs.similarity_weights = Vector::Ones(p);
  return f;
}

BenchmarkConfig SmallConfig() {
  BenchmarkConfig c;
  c.k = 20;
  c.kernel_samples = 256;
  c.sampling_samples = 4;
  c.permutation_samples = 2;
  c.background_seed = 3;
  c.explainer_seed = 4;
  c.rerun_anomalies = 2;
  c.reruns = 3;
  return c;
}

TEST(StabilityBenchmark, ReportShapeAndSeeds) {
  const auto f = MakeBench(12, 8);
  const auto report = StabilityBenchmark(f.inputs, SmallConfig());
  int primary_rows = 0;
  for (const auto& r : report.rows) {
    primary_rows += r.mode == "across-anomalies" && r.value == "signed";
  }
  EXPECT_EQ(primary_rows, 3 * 2);
  for (auto m : {Method::kKernel, Method::kSampling, Method::kPermutation}) {
    const auto& c = report.Primary(m);
    ASSERT_TRUE(c.reduction_pct.has_value());
    EXPECT_NEAR(*c.reduction_pct,
                (c.random_mean - c.similar_mean) / c.random_mean * 100, 1e-9);
    EXPECT_GT(*c.reduction_pct, 0.0);
    ASSERT_TRUE(c.bartlett_sd.has_value());
  }
  const auto& md = report.metadata;
  EXPECT_EQ(md["k"], 20);
  EXPECT_EQ(md["background_seed"], 3);
  EXPECT_EQ(md["explainer_seed"], 4);
  EXPECT_EQ(md["anomaly_count"], 12);
  EXPECT_EQ(md["budgets"]["kernel"], 256);
  std::ostringstream csv;
  WriteReportCsv(csv, report);
  EXPECT_EQ(std::ranges::count(csv.str(), '\n'), 4);
}

TEST(StabilityBenchmark, IdenticalSelectionsShowNoReduction) {
  const auto f = MakeBench(10, 9);
  auto cfg = SmallConfig();
  cfg.identical_selections = true;
  const auto report = StabilityBenchmark(f.inputs, cfg);
  for (const auto& c : report.comparisons) {
    ASSERT_TRUE(c.reduction_pct.has_value());
    EXPECT_EQ(*c.reduction_pct, 0.0) << c.mode << " " << c.value;
    ASSERT_TRUE(c.bartlett_sd.has_value());
    EXPECT_NEAR(c.bartlett_sd->p_value, 1.0, 1e-9);
  }
}

TEST(StabilityBenchmark, ByteIdenticalReruns) {
  const auto f = MakeBench(10, 10);
  auto cfg = SmallConfig();
  const auto a = StabilityBenchmark(f.inputs, cfg);
  cfg.workers = 3;
  const auto b = StabilityBenchmark(f.inputs, cfg);
  EXPECT_EQ(ReportToJson(a).dump(), ReportToJson(b).dump());
  std::ostringstream ca, cb;
  WriteReportCsv(ca, a);
  WriteReportCsv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
}

TEST(StabilityBenchmark, NeedsEnoughAnomalies) {
  const auto f = MakeBench(9, 11);
  EXPECT_TRUE(RaisesCode([&] { StabilityBenchmark(f.inputs, SmallConfig()); },
                         ErrorCode::kSizing));
}

}  // namespace
}  // namespace ctxshap::analyze
