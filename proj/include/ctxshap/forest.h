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

#ifndef CTXSHAP_FOREST_H_
#define CTXSHAP_FOREST_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxshap/predictor.h"

namespace ctxshap::predictor {

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 12;
  int min_samples_leaf = 5;
  double feature_subsample = 1.0 / 3.0;  // fraction of features per split
  bool bootstrap = true;
  int max_bins = 64;  // candidate thresholds per feature
  uint64_t seed = 0;
  int workers = 1;
};

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  int samples = 0;
  // Reduction of the summed squared deviation (over all outputs) achieved
  // by this split: n * var(node) - n_l * var(left) - n_r * var(right).
  double impurity_decrease = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  RowMatrix values;             // node count x outputs, mean target per node

  int Leaf(std::span<const double> x) const;
};

// Variance-reduction regression forest. Used as the global-importance
// surrogate on flattened windows and optionally as a forecaster.
class RandomForestRegressor : public Predictor {
 public:
  RandomForestRegressor() = default;

  std::string kind() const override { return "forest"; }
  bool fitted() const override { return fitted_; }
  WindowShape input_shape() const override { return shape_; }
  int horizon() const override { return outputs_; }
  nlohmann::json Hyperparameters() const override;
  nlohmann::json ToJson() const override;
  static RandomForestRegressor FromJson(const nlohmann::json& j);

  const std::vector<RegressionTree>& trees() const { return trees_; }
  const ForestConfig& config() const { return config_; }
  // Mean squared out-of-bag error; empty without bootstrap.
  std::optional<double> oob_mse() const { return oob_mse_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  friend RandomForestRegressor FitForest(const RowMatrix&, const RowMatrix&,
                                         WindowShape, const ForestConfig&);

 protected:
  void PredictRow(std::span<const double> x,
                  std::span<double> out) const override;

 private:
  WindowShape shape_;
  int outputs_ = 0;
  ForestConfig config_;
  std::vector<RegressionTree> trees_;
  std::optional<double> oob_mse_;
  std::vector<std::string> warnings_;
  bool fitted_ = false;
};

// flat: N x P inputs; targets: N x outputs. `shape` describes how P splits
// into steps x features (use {1, P} for plain tabular data).
RandomForestRegressor FitForest(const RowMatrix& flat,
                                const RowMatrix& targets, WindowShape shape,
                                const ForestConfig& config = {});
RandomForestRegressor FitForest(const RowMatrix& flat, const Vector& targets,
                                WindowShape shape,
                                const ForestConfig& config = {});

// Per-feature impurity decrease, averaged over trees and normalized to sum
// to 1. All zeros when no tree ever split.
Vector ForestImportance(const RandomForestRegressor& forest);

}  // namespace ctxshap::predictor

#endif  // CTXSHAP_FOREST_H_
