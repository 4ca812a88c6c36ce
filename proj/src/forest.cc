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

#include "ctxshap/forest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "ctxshap/error.h"
#include "ctxshap/parallel.h"
#include "ctxshap/rng.h"

namespace ctxshap::predictor {

namespace {

// Features quantized to at most max_bins bins. Bin b of feature f holds
// values v with thresholds[f][b-1] < v <= thresholds[f][b].
struct BinnedData {
  int rows = 0;
  int features = 0;
  std::vector<std::vector<double>> thresholds;
  std::vector<uint8_t> bins;  // feature-major: bins[f * rows + i]

  uint8_t bin(int feature, int row) const {
    return bins[static_cast<size_t>(feature) * rows + row];
  }
};

BinnedData Bin(const RowMatrix& x, int max_bins) {
  BinnedData data;
  data.rows = static_cast<int>(x.rows());
  data.features = static_cast<int>(x.cols());
  data.thresholds.resize(data.features);
  data.bins.resize(static_cast<size_t>(data.rows) * data.features);
  std::vector<double> column(data.rows);
  for (int f = 0; f < data.features; ++f) {
    for (int i = 0; i < data.rows; ++i) column[i] = x(i, f);
    std::vector<double> unique = column;
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    const int m = static_cast<int>(unique.size());
    auto& cuts = data.thresholds[f];
    if (m <= max_bins) {
      for (int j = 0; j + 1 < m; ++j) {
        cuts.push_back(0.5 * (unique[j] + unique[j + 1]));
      }
    } else {
      for (int k = 1; k < max_bins; ++k) {
        const int c = static_cast<int>(static_cast<int64_t>(k) * m / max_bins);
        const double cut = 0.5 * (unique[c - 1] + unique[c]);
        if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
      }
    }
    for (int i = 0; i < data.rows; ++i) {
      data.bins[static_cast<size_t>(f) * data.rows + i] = static_cast<uint8_t>(
          std::lower_bound(cuts.begin(), cuts.end(), column[i]) - cuts.begin());
    }
  }
  return data;
}

class TreeBuilder {
 public:
  TreeBuilder(const BinnedData& data, const RowMatrix& targets,
              const ForestConfig& config, uint64_t seed)
      : data_(data), targets_(targets), config_(config), rng_(seed) {
    outputs_ = static_cast<int>(targets.cols());
    mtry_ = std::max(1, static_cast<int>(std::floor(
                            config.feature_subsample * data.features + 1e-9)));
    mtry_ = std::min(mtry_, data.features);
  }

  RegressionTree Build(std::vector<int> samples) {
    samples_ = std::move(samples);
    nodes_.clear();
    values_.clear();
    struct Pending {
      int node;
      int begin;
      int end;
      int depth;
    };
    std::vector<Pending> stack;
    nodes_.emplace_back();
    stack.push_back({0, 0, static_cast<int>(samples_.size()), 0});
    while (!stack.empty()) {
      const Pending cur = stack.back();
      stack.pop_back();
      Split split = FindSplit(cur.node, cur.begin, cur.end, cur.depth);
      if (split.feature < 0) continue;
      const auto mid_it = std::partition(
          samples_.begin() + cur.begin, samples_.begin() + cur.end,
          [&](int s) { return data_.bin(split.feature, s) <= split.bin; });
      const int mid = static_cast<int>(mid_it - samples_.begin());
      const int left = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      nodes_.emplace_back();
      TreeNode& node = nodes_[cur.node];
      node.feature = split.feature;
      node.threshold = data_.thresholds[split.feature][split.bin];
      node.left = left;
      node.right = left + 1;
      node.impurity_decrease = split.gain;
      stack.push_back({left + 1, mid, cur.end, cur.depth + 1});
      stack.push_back({left, cur.begin, mid, cur.depth + 1});
    }
    RegressionTree tree;
    tree.nodes = nodes_;
    tree.values.resize(static_cast<Eigen::Index>(nodes_.size()), outputs_);
    for (size_t i = 0; i < nodes_.size(); ++i) {
      for (int k = 0; k < outputs_; ++k) {
        tree.values(i, k) = values_[i * outputs_ + k];
      }
    }
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    int bin = -1;
    double gain = 0.0;
  };

  // Stores the node mean and returns the best admissible split, if any.
  Split FindSplit(int node, int begin, int end, int depth) {
    const int n = end - begin;
    nodes_[node].samples = n;
    std::vector<double> mean(outputs_, 0.0);
    for (int i = begin; i < end; ++i) {
      for (int k = 0; k < outputs_; ++k) mean[k] += targets_(samples_[i], k);
    }
    for (auto& m : mean) m /= n;
    if (values_.size() < (static_cast<size_t>(node) + 1) * outputs_) {
      values_.resize((static_cast<size_t>(node) + 1) * outputs_);
    }
    std::copy(mean.begin(), mean.end(), values_.begin() + static_cast<size_t>(node) * outputs_);

    Split best;
    if (depth >= config_.max_depth || n < 2 * config_.min_samples_leaf) {
      return best;
    }
    // Centered targets: a constant node has exactly zero sums.
    double sse = 0.0;
    centered_.resize(static_cast<size_t>(n) * outputs_);
    std::vector<double> total(outputs_, 0.0);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < outputs_; ++k) {
        const double c = targets_(samples_[begin + i], k) - mean[k];
        centered_[static_cast<size_t>(i) * outputs_ + k] = c;
        total[k] += c;
        sse += c * c;
      }
    }
    if (sse <= 0.0) return best;
    double base = 0.0;
    for (int k = 0; k < outputs_; ++k) base += total[k] * total[k] / n;

    const std::vector<int> features =
        rng_.SampleWithoutReplacement(data_.features, mtry_);
    for (const int f : features) {
      const int nb = static_cast<int>(data_.thresholds[f].size()) + 1;
      if (nb < 2) continue;
      counts_.assign(nb, 0);
      sums_.assign(static_cast<size_t>(nb) * outputs_, 0.0);
      for (int i = 0; i < n; ++i) {
        const int b = data_.bin(f, samples_[begin + i]);
        ++counts_[b];
        for (int k = 0; k < outputs_; ++k) {
          sums_[static_cast<size_t>(b) * outputs_ + k] +=
              centered_[static_cast<size_t>(i) * outputs_ + k];
        }
      }
      int n_left = 0;
      std::vector<double> left(outputs_, 0.0);
      for (int b = 0; b + 1 < nb; ++b) {
        n_left += counts_[b];
        for (int k = 0; k < outputs_; ++k) {
          left[k] += sums_[static_cast<size_t>(b) * outputs_ + k];
        }
        const int n_right = n - n_left;
        if (n_left < config_.min_samples_leaf) continue;
        if (n_right < config_.min_samples_leaf) break;
        double gain = -base;
        for (int k = 0; k < outputs_; ++k) {
          const double right = total[k] - left[k];
          gain += left[k] * left[k] / n_left + right * right / n_right;
        }
        if (gain > best.gain) best = {f, b, gain};
      }
    }
    if (best.feature >= 0 && best.gain <= 1e-12 * sse) return Split{};
    return best;
  }

  const BinnedData& data_;
  const RowMatrix& targets_;
  const ForestConfig& config_;
  Rng rng_;
  int outputs_ = 1;
  int mtry_ = 1;
  std::vector<int> samples_;
  std::vector<TreeNode> nodes_;
  std::vector<double> values_;
  std::vector<double> centered_;
  std::vector<int> counts_;
  std::vector<double> sums_;
};

nlohmann::json TreeToJson(const RegressionTree& tree) {
  std::vector<int> feature, left, right, samples;
  std::vector<double> threshold, decrease;
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    samples.push_back(n.samples);
    decrease.push_back(n.impurity_decrease);
  }
  return {{"feature", feature},     {"threshold", threshold},
          {"left", left},           {"right", right},
          {"samples", samples},     {"impurity_decrease", decrease},
          {"values", internal::MatrixToJson(tree.values)}};
}

RegressionTree TreeFromJson(const nlohmann::json& j) {
  RegressionTree tree;
  const std::vector<int> feature = j.at("feature");
  const std::vector<double> threshold = j.at("threshold");
  const std::vector<int> left = j.at("left");
  const std::vector<int> right = j.at("right");
  const std::vector<int> samples = j.at("samples");
  const std::vector<double> decrease = j.at("impurity_decrease");
  for (size_t i = 0; i < feature.size(); ++i) {
    tree.nodes.push_back({feature[i], threshold[i], left[i], right[i],
                          samples[i], decrease[i]});
  }
  tree.values = internal::MatrixFromJson(j.at("values"));
  return tree;
}

}  // namespace

int RegressionTree::Leaf(std::span<const double> x) const {
  int i = 0;
  while (nodes[i].feature >= 0) {
    i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left
                                                   : nodes[i].right;
  }
  return i;
}

void RandomForestRegressor::PredictRow(std::span<const double> x,
                                       std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (const auto& tree : trees_) {
    const int leaf = tree.Leaf(x);
    for (int k = 0; k < outputs_; ++k) out[k] += tree.values(leaf, k);
  }
  for (int k = 0; k < outputs_; ++k) out[k] /= static_cast<double>(trees_.size());
}

nlohmann::json RandomForestRegressor::Hyperparameters() const {
  return {{"n_trees", config_.n_trees},
          {"max_depth", config_.max_depth},
          {"min_samples_leaf", config_.min_samples_leaf},
          {"feature_subsample", config_.feature_subsample},
          {"bootstrap", config_.bootstrap},
          {"max_bins", config_.max_bins}};
}

nlohmann::json RandomForestRegressor::ToJson() const {
  Require(fitted_, ErrorCode::kState, "forest is not fitted");
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(TreeToJson(t));
  return {{"format", "ctxshap-model"},
          {"version", kModelFormatVersion},
          {"kind", kind()},
          {"hyperparameters", Hyperparameters()},
          {"seed", config_.seed},
          {"shape", {{"steps", shape_.steps}, {"features", shape_.features}}},
          {"horizon", outputs_},
          {"params",
           {{"trees", trees},
            {"oob_mse", oob_mse_ ? nlohmann::json(*oob_mse_) : nlohmann::json()}}}};
}

RandomForestRegressor RandomForestRegressor::FromJson(const nlohmann::json& j) {
  RandomForestRegressor f;
  const auto& hp = j.at("hyperparameters");
  f.config_.n_trees = hp.at("n_trees");
  f.config_.max_depth = hp.at("max_depth");
  f.config_.min_samples_leaf = hp.at("min_samples_leaf");
  f.config_.feature_subsample = hp.at("feature_subsample");
  f.config_.bootstrap = hp.at("bootstrap");
  f.config_.max_bins = hp.at("max_bins");
  f.config_.seed = j.at("seed");
  f.shape_ = {j.at("shape").at("steps"), j.at("shape").at("features")};
  f.outputs_ = j.at("horizon");
  for (const auto& t : j.at("params").at("trees")) {
    f.trees_.push_back(TreeFromJson(t));
  }
  const auto& oob = j.at("params").at("oob_mse");
  if (!oob.is_null()) f.oob_mse_ = oob.get<double>();
  f.fitted_ = !f.trees_.empty();
  return f;
}

RandomForestRegressor FitForest(const RowMatrix& flat, const RowMatrix& targets,
                                WindowShape shape, const ForestConfig& config) {
  Require(config.n_trees >= 1 && config.max_depth >= 0 &&
              config.min_samples_leaf >= 1,
          ErrorCode::kParameter, "invalid forest configuration");
  Require(config.feature_subsample > 0.0 && config.feature_subsample <= 1.0,
          ErrorCode::kParameter, "feature_subsample must be in (0, 1]");
  Require(config.max_bins >= 2 && config.max_bins <= 256,
          ErrorCode::kParameter, "max_bins must be in [2, 256]");
  Require(flat.cols() == shape.flat_size(), ErrorCode::kShape,
          "input width does not match the window shape");
  Require(flat.rows() == targets.rows() && targets.cols() >= 1,
          ErrorCode::kShape, "inputs and targets disagree in length");
  const int n = static_cast<int>(flat.rows());
  Require(n >= 2 * config.min_samples_leaf, ErrorCode::kSizing,
          "need at least 2 * min_samples_leaf training rows");

  const BinnedData data = Bin(flat, config.max_bins);
  RandomForestRegressor forest;
  forest.shape_ = shape;
  forest.outputs_ = static_cast<int>(targets.cols());
  forest.config_ = config;
  forest.trees_.resize(config.n_trees);
  std::vector<std::vector<int>> in_bag_counts(config.n_trees);

  ParallelFor(config.n_trees, config.workers, [&](int t) {
    const uint64_t tree_seed = DeriveSeed(config.seed, t);
    std::vector<int> samples(n);
    if (config.bootstrap) {
      Rng bag_rng(DeriveSeed(tree_seed, 0));
      in_bag_counts[t].assign(n, 0);
      for (int i = 0; i < n; ++i) {
        samples[i] = static_cast<int>(bag_rng.UniformInt(n));
        ++in_bag_counts[t][samples[i]];
      }
    } else {
      for (int i = 0; i < n; ++i) samples[i] = i;
    }
    TreeBuilder builder(data, targets, config, DeriveSeed(tree_seed, 1));
    forest.trees_[t] = builder.Build(std::move(samples));
  });

  if (config.bootstrap) {
    RowMatrix sum = RowMatrix::Zero(n, forest.outputs_);
    std::vector<int> hits(n, 0);
    for (int t = 0; t < config.n_trees; ++t) {
      for (int i = 0; i < n; ++i) {
        if (in_bag_counts[t][i] != 0) continue;
        const int leaf = forest.trees_[t].Leaf(
            {flat.row(i).data(), static_cast<size_t>(flat.cols())});
        sum.row(i) += forest.trees_[t].values.row(leaf);
        ++hits[i];
      }
    }
    double sq = 0.0;
    int64_t count = 0;
    for (int i = 0; i < n; ++i) {
      if (hits[i] == 0) continue;
      sq += (sum.row(i) / hits[i] - targets.row(i)).squaredNorm();
      count += forest.outputs_;
    }
    if (count > 0) forest.oob_mse_ = sq / static_cast<double>(count);
  }

  forest.fitted_ = true;
  const bool any_split = std::any_of(
      forest.trees_.begin(), forest.trees_.end(),
      [](const RegressionTree& t) { return t.nodes.size() > 1; });
  if (!any_split) {
    forest.warnings_.push_back(
        "no tree found a variance-reducing split (constant targets?); "
        "all importances are zero");
  }
  return forest;
}

RandomForestRegressor FitForest(const RowMatrix& flat, const Vector& targets,
                                WindowShape shape, const ForestConfig& config) {
  RowMatrix t(targets.size(), 1);
  t.col(0) = targets;
  return FitForest(flat, t, shape, config);
}

Vector ForestImportance(const RandomForestRegressor& forest) {
  Require(forest.fitted(), ErrorCode::kState, "forest is not fitted");
  const int p = forest.input_shape().flat_size();
  Vector importance = Vector::Zero(p);
  for (const auto& tree : forest.trees()) {
    const double root = tree.nodes.front().samples;
    for (const auto& node : tree.nodes) {
      if (node.feature >= 0) {
        importance(node.feature) += node.impurity_decrease / root;
      }
    }
  }
  importance /= static_cast<double>(forest.trees().size());
  const double total = importance.sum();
  if (total > 0.0) importance /= total;
  return importance;
}

}  // namespace ctxshap::predictor
