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

#include "ctxshap/anomaly.h"

#include <algorithm>

#include "gtest/gtest.h"
#include "ctxshap/pipeline.h"
#include "ctxshap/synth.h"
#include "test_util.h"

namespace ctxshap::anomaly {
namespace {

using ::ctxshap::testing::RaisesCode;

std::vector<PredictionError> Errors(std::initializer_list<double> es) {
  std::vector<PredictionError> out;
  int i = 0;
  for (double e : es) out.push_back({i++, 0.0, e, e});
  return out;
}

// Model whose h=1 output is the first input value plus `shift`.
predictor::FunctionModel EchoModel(double shift) {
  return predictor::FunctionModel(
      WindowShape{1, 1}, 1,
      [shift](std::span<const double> x, std::span<double> out) {
        out[0] = x[0] + shift;
      });
}

dataset::WindowedDataset EchoData(std::initializer_list<double> targets) {
  dataset::WindowedDataset ds;
  ds.shape = {1, 1};
  ds.horizon = 1;
  const int n = static_cast<int>(targets.size());
  ds.inputs.resize(n, 1);
  ds.targets.resize(n, 1);
  int i = 0;
  for (double t : targets) {
    ds.inputs(i, 0) = t;
    ds.targets(i, 0) = t;
    ++i;
  }
  return ds;
}

TEST(ComputeErrors, PerfectModelHasZeroErrors) {
  const auto errors = ComputeErrors(EchoModel(0.0), EchoData({1, 2, 3}));
  ASSERT_EQ(errors.size(), 3u);
  for (const auto& e : errors) EXPECT_EQ(e.e, 0.0);
}

TEST(ComputeErrors, ShiftedModel) {
  for (const auto& e : ComputeErrors(EchoModel(0.75), EchoData({1, 5, -2}))) {
    EXPECT_DOUBLE_EQ(e.e, -0.75);
    EXPECT_DOUBLE_EQ(e.predicted, e.actual + 0.75);
  }
}

TEST(ComputeErrors, ActualMinusPredicted) {
  // Under-prediction of 4.75 by 1.60.
  const auto model = predictor::FunctionModel(
      WindowShape{1, 1}, 1,
      [](std::span<const double>, std::span<double> out) { out[0] = 1.60; });
  const auto errors = ComputeErrors(model, EchoData({4.75}));
  EXPECT_NEAR(errors[0].e, 3.15, 1e-12);
}

TEST(ComputeErrors, NonFinitePrediction) {
  const auto model = predictor::FunctionModel(
      WindowShape{1, 1}, 1, [](std::span<const double> x, std::span<double> out) {
        out[0] = x[0] > 1.5 ? std::nan("") : 0.0;
      });
  EXPECT_TRUE(RaisesCode([&] { ComputeErrors(model, EchoData({1, 2})); },
                         ErrorCode::kNumerical));
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(Quantile({1, 2, 3, 4, 5}, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(Quantile({5, 4, 3, 2, 1}, 0.75), 4.0);
  EXPECT_DOUBLE_EQ(Quantile({1, 2, 3, 4}, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(Quantile({10, 20}, 0.5), 15.0);
}

TEST(FitThreshold, HandComputed) {
  const auto errors = Errors({1, 2, 3, 4, 5});
  const auto th = FitThreshold(errors);
  EXPECT_DOUBLE_EQ(th.q1, 2.0);
  EXPECT_DOUBLE_EQ(th.q3, 4.0);
  EXPECT_DOUBLE_EQ(th.iqr, 2.0);
  EXPECT_DOUBLE_EQ(th.lower, -1.0);
  EXPECT_DOUBLE_EQ(th.upper, 7.0);
}

TEST(FitThreshold, ConstantErrors) {
  const auto errors = Errors({0.3, 0.3, 0.3, 0.3, 0.3});
  const auto th = FitThreshold(errors);
  EXPECT_EQ(th.iqr, 0.0);
  EXPECT_EQ(th.lower, 0.3);
  EXPECT_EQ(th.upper, 0.3);
}

TEST(FitThreshold, SymmetricErrors) {
  const auto th = FitThreshold(Errors({-3, -2, -1, 0, 1, 2, 3}));
  EXPECT_DOUBLE_EQ(th.lower, -th.upper);
}

TEST(FitThreshold, TooFewErrors) {
  const auto errors = Errors({1, 2, 3});
  EXPECT_TRUE(RaisesCode([&] { FitThreshold(errors); }, ErrorCode::kSizing));
}

TEST(Classify, BoundsAreInclusive) {
  AnomalyThreshold th{0, 0, 0, -1.0, 7.0};
  const auto errors = Errors({7.0, std::nextafter(7.0, 8.0), -1.0,
                              std::nextafter(-1.0, -2.0), 3.0});
  const auto r = Classify(errors, th);
  EXPECT_EQ(r[0].verdict, Verdict::kProbablyNormal);
  EXPECT_EQ(r[1].verdict, Verdict::kAnomalous);
  EXPECT_EQ(r[2].verdict, Verdict::kProbablyNormal);
  EXPECT_EQ(r[3].verdict, Verdict::kAnomalous);
  EXPECT_EQ(r[4].verdict, Verdict::kProbablyNormal);
  EXPECT_EQ(r[1].window_index, 1);
}

TEST(Classify, WideningBoundsNeverAddsAnomalies) {
  Rng rng(1);
  std::vector<PredictionError> errors;
  for (int i = 0; i < 500; ++i) {
    const double e = rng.Normal() * (1 + (i % 7 == 0) * 4);
    errors.push_back({i, 0, e, e});
  }
  int previous = static_cast<int>(errors.size()) + 1;
  for (double width : {0.0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0}) {
    const auto r = Classify(errors, {0, 0, 0, -width, width});
    const int count = static_cast<int>(std::count_if(
        r.begin(), r.end(),
        [](const auto& a) { return a.verdict == Verdict::kAnomalous; }));
    EXPECT_LE(count, previous);
    previous = count;
  }
}

// The 1.5 IQR fence on a normal sample flags about 0.70% of points.
TEST(Classify, GaussianFalsePositiveRate) {
  double total = 0.0;
  const int seeds = 10;
  for (int s = 0; s < seeds; ++s) {
    Rng rng(100 + s);
    std::vector<PredictionError> errors;
    for (int i = 0; i < 10000; ++i) {
      const double e = rng.Normal();
      errors.push_back({i, 0, e, e});
    }
    const auto r = Classify(errors, FitThreshold(errors));
    total += std::count_if(r.begin(), r.end(), [](const auto& a) {
               return a.verdict == Verdict::kAnomalous;
             }) / 10000.0;
  }
  EXPECT_NEAR(total / seeds, 0.0070, 0.005);
}

TEST(Detect, ThresholdIgnoresTestErrors) {
  pipeline::RunConfig c;
  c.synth.length = 24 * 120;
  c.synth.seed = 4;
  c.anomalies.count = 0;
  const auto records = pipeline::MakeSyntheticSeries(c).records;
  auto data = pipeline::PrepareData(records, c.data);
  const auto model = pipeline::TrainModel(data.train, c.model);
  const auto before = pipeline::Detect(*model, data).threshold;
  data.test.targets.array() += 50.0;
  const auto after = pipeline::Detect(*model, data);
  EXPECT_EQ(before.lower, after.threshold.lower);
  EXPECT_EQ(before.upper, after.threshold.upper);
  EXPECT_EQ(after.anomalous, data.test.size());
}

TEST(Detect, FlagsInjectedSpikes) {
  pipeline::RunConfig c;
  c.synth.seed = 12;
  c.injection_seed = 13;
  c.anomalies.count = 20;
  const auto series = pipeline::MakeSyntheticSeries(c);
  const auto data = pipeline::PrepareData(series.records, c.data);
  const auto model = pipeline::TrainModel(data.train, c.model);
  const auto d = pipeline::Detect(*model, data);
  const int test_begin = data.splits.test_begin;
  int hits = 0;
  for (const auto& g : series.ground_truth) {
    const int window = g.index - test_begin - c.data.window_length;
    ASSERT_GE(window, 0);
    ASSERT_LT(window, data.test.size());
    hits += d.test[window].verdict == Verdict::kAnomalous;
  }
  EXPECT_GE(hits, 18);
}

}  // namespace
}  // namespace ctxshap::anomaly
