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

#include "ctxshap/explain.h"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>

#include "ctxshap/error.h"
#include "ctxshap/parallel.h"
#include "ctxshap/rng.h"

namespace ctxshap::explain {

namespace {

// A coalition stored by its smaller side. With `complemented` false the
// present features are `members`; otherwise every feature except `members`
// is present.
struct Coalition {
  std::vector<int> members;
  bool complemented = false;
  double weight = 1.0;
};

// Evaluates v(S) against a fixed background. Scratch buffers hold the
// background (and an all-x copy); a coalition is written into them, scored,
// and undone, so each evaluation costs O(K * |smaller side|) besides the
// model call.
class ValueFunction {
 public:
  ValueFunction(const predictor::Predictor& model, const Vector& x,
                const RowMatrix& background, int step)
      : model_(model), x_(x), background_(background), step_(step) {
    Require(background.rows() > 0, ErrorCode::kInput, "empty background");
    Require(background.cols() == x.size(), ErrorCode::kShape,
            "background width does not match the explained sample");
    base_ = MeanPrediction(background);
    RowMatrix single(1, x.size());
    single.row(0) = x.transpose();
    f_x_ = model.PredictStep(single, step)(0);
    Count(1);
  }

  double base() const { return base_; }
  double f_x() const { return f_x_; }
  int features() const { return static_cast<int>(x_.size()); }
  int64_t evals() const { return evals_; }
  int64_t calls() const { return calls_; }

  class Scratch {
   public:
    explicit Scratch(const ValueFunction& vf)
        : vf_(vf), with_background_(vf.background_),
          with_x_(vf.background_.rows(), vf.x_.size()) {
      for (Eigen::Index r = 0; r < with_x_.rows(); ++r) {
        with_x_.row(r) = vf.x_.transpose();
      }
    }

    double Evaluate(const Coalition& c) {
      const int p = vf_.features();
      const int present = c.complemented
                              ? p - static_cast<int>(c.members.size())
                              : static_cast<int>(c.members.size());
      if (present == 0) return vf_.base_;
      if (present == p) return vf_.f_x_;
      const auto& background = vf_.background_;
      const auto& x = vf_.x_;
      double v;
      if (!c.complemented) {
        for (Eigen::Index r = 0; r < with_background_.rows(); ++r) {
          for (const int j : c.members) with_background_(r, j) = x(j);
        }
        v = vf_.MeanPrediction(with_background_);
        for (Eigen::Index r = 0; r < with_background_.rows(); ++r) {
          for (const int j : c.members) with_background_(r, j) = background(r, j);
        }
      } else {
        for (Eigen::Index r = 0; r < with_x_.rows(); ++r) {
          for (const int j : c.members) with_x_(r, j) = background(r, j);
        }
        v = vf_.MeanPrediction(with_x_);
        for (Eigen::Index r = 0; r < with_x_.rows(); ++r) {
          for (const int j : c.members) with_x_(r, j) = x(j);
        }
      }
      return v;
    }

    // Permutation walks: present features are added one at a time.
    void Reset() { with_background_ = vf_.background_; }
    double AddAndEvaluate(int feature) {
      for (Eigen::Index r = 0; r < with_background_.rows(); ++r) {
        with_background_(r, feature) = vf_.x_(feature);
      }
      return vf_.MeanPrediction(with_background_);
    }

   private:
    const ValueFunction& vf_;
    RowMatrix with_background_;
    RowMatrix with_x_;
  };

 private:
  double MeanPrediction(const RowMatrix& batch) const {
    const Vector p = model_.PredictStep(batch, step_);
    Count(batch.rows());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) sum += p(i);
    return sum / static_cast<double>(p.size());
  }

  void Count(int64_t rows) const {
    evals_ += rows;
    ++calls_;
  }

  const predictor::Predictor& model_;
  const Vector& x_;
  const RowMatrix& background_;
  int step_;
  double base_ = 0.0;
  double f_x_ = 0.0;
  mutable std::atomic<int64_t> evals_{0};
  mutable std::atomic<int64_t> calls_{0};
};

void CheckExplainInputs(const predictor::Predictor& model, const Vector& x,
                        const RowMatrix& background,
                        const ExplainerConfig& config) {
  Require(background.rows() > 0, ErrorCode::kInput, "empty background");
  Require(x.size() == model.input_shape().flat_size(), ErrorCode::kShape,
          "explained sample does not match the model input width");
  Require(config.step >= 0 && config.step < model.horizon(), ErrorCode::kShape,
          "horizon step out of range");
}

Coalition FromMask(uint32_t mask, int p) {
  Coalition c;
  const int present = std::popcount(mask);
  c.complemented = present > p / 2;
  for (int j = 0; j < p; ++j) {
    const bool in = (mask >> j) & 1u;
    if (in != c.complemented) c.members.push_back(j);
  }
  return c;
}

std::vector<double> EvaluateAll(const ValueFunction& vf,
                                const std::vector<Coalition>& coalitions,
                                int workers) {
  std::vector<double> values(coalitions.size());
  const int n = static_cast<int>(coalitions.size());
  const int chunks = std::max(1, std::min(n, 4 * std::max(1, workers)));
  ParallelFor(chunks, workers, [&](int c) {
    ValueFunction::Scratch scratch(vf);
    const int begin = static_cast<int>(static_cast<int64_t>(n) * c / chunks);
    const int end = static_cast<int>(static_cast<int64_t>(n) * (c + 1) / chunks);
    for (int i = begin; i < end; ++i) values[i] = scratch.Evaluate(coalitions[i]);
  });
  return values;
}

double LogChoose(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// Coalitions drawn with probability proportional to the total kernel weight
// of their size, each together with its complement. Sizes s and F - s carry
// equal weight, so the draw is over the smaller side t <= F / 2.
std::vector<Coalition> SampleCoalitions(int p, int n_samples, uint64_t seed) {
  const int half = p / 2;
  std::vector<double> cdf(half);
  double total = 0.0;
  for (int t = 1; t <= half; ++t) {
    double w = 1.0 / (static_cast<double>(t) * (p - t));
    if (2 * t != p) w *= 2.0;
    total += w;
    cdf[t - 1] = total;
  }
  Rng rng(seed);
  std::vector<Coalition> out;
  const int pairs = (n_samples + 1) / 2;
  out.reserve(2 * pairs);
  for (int i = 0; i < pairs; ++i) {
    const double u = rng.Uniform() * total;
    const int t = static_cast<int>(
                      std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) + 1;
    std::vector<int> members = rng.SampleWithoutReplacement(p, std::min(t, half));
    std::sort(members.begin(), members.end());
    out.push_back({members, false, 1.0});
    out.push_back({std::move(members), true, 1.0});
  }
  return out;
}

Attribution Finish(const ValueFunction& vf, Method method,
                   const ExplainerConfig& config, Vector phi) {
  Attribution a;
  a.phi = std::move(phi);
  a.phi0 = vf.base();
  a.f_x = vf.f_x();
  a.method = method;
  a.n_evals = vf.evals();
  a.n_calls = vf.calls();
  a.n_samples = config.n_samples;
  a.seed = config.seed;
  return a;
}

// Marginal contributions along one ordering; they telescope to f_x - base.
void Walk(ValueFunction::Scratch& scratch, const ValueFunction& vf,
          std::span<const int> order, std::span<double> contrib) {
  scratch.Reset();
  double prev = vf.base();
  const int p = static_cast<int>(order.size());
  for (int k = 0; k + 1 < p; ++k) {
    const double v = scratch.AddAndEvaluate(order[k]);
    contrib[order[k]] = v - prev;
    prev = v;
  }
  contrib[order[p - 1]] = vf.f_x() - prev;
}

Attribution Summarize(const ValueFunction& vf, Method method,
                      const ExplainerConfig& config, const RowMatrix& rows) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index p = rows.cols();
  Vector mean = Vector::Zero(p);
  for (Eigen::Index r = 0; r < n; ++r) mean += rows.row(r).transpose();
  mean /= static_cast<double>(n);
  Vector std_err(p);
  if (n < 2) {
    std_err.setConstant(std::numeric_limits<double>::quiet_NaN());
  } else {
    Vector sq = Vector::Zero(p);
    for (Eigen::Index r = 0; r < n; ++r) {
      sq += (rows.row(r).transpose() - mean).cwiseAbs2();
    }
    std_err = (sq / static_cast<double>(n - 1)).cwiseSqrt() /
              std::sqrt(static_cast<double>(n));
  }
  Attribution a = Finish(vf, method, config, std::move(mean));
  a.std_err = std::move(std_err);
  return a;
}

}  // namespace

std::string MethodName(Method m) {
  switch (m) {
    case Method::kKernel: return "kernel";
    case Method::kSampling: return "sampling";
    case Method::kPermutation: return "permutation";
    case Method::kExact: return "exact";
  }
  return "exact";
}

Method ParseMethod(const std::string& name) {
  if (name == "kernel") return Method::kKernel;
  if (name == "sampling") return Method::kSampling;
  if (name == "permutation") return Method::kPermutation;
  if (name == "exact") return Method::kExact;
  Fail(ErrorCode::kParameter, "unknown explainer method '" + name + "'");
}

double BaseValue(const predictor::Predictor& model, const RowMatrix& background,
                 int step) {
  Require(background.rows() > 0, ErrorCode::kInput, "empty background");
  const Vector p = model.PredictStep(background, step);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) sum += p(i);
  return sum / static_cast<double>(p.size());
}

double MaskedPrediction(const predictor::Predictor& model, const Vector& x,
                        std::span<const int> present,
                        const RowMatrix& background, int step) {
  const int p = static_cast<int>(x.size());
  std::vector<uint8_t> in(p, 0);
  for (const int j : present) {
    Require(j >= 0 && j < p, ErrorCode::kShape,
            "coalition index " + std::to_string(j) + " out of range");
    in[j] = 1;
  }
  const int count = static_cast<int>(std::count(in.begin(), in.end(), 1));
  Coalition c;
  c.complemented = count > p / 2;
  for (int j = 0; j < p; ++j) {
    if (static_cast<bool>(in[j]) != c.complemented) c.members.push_back(j);
  }
  ValueFunction vf(model, x, background, step);
  ValueFunction::Scratch scratch(vf);
  return scratch.Evaluate(c);
}

double KernelWeight(int features, int size) {
  if (size <= 0 || size >= features) {
    Fail(ErrorCode::kUndefined,
         "kernel weight is infinite for the empty and full coalitions");
  }
  return (features - 1) /
         (std::exp(LogChoose(features, size)) * size * (features - size));
}

Attribution KernelShap(const predictor::Predictor& model, const Vector& x,
                       const RowMatrix& background,
                       const ExplainerConfig& config) {
  CheckExplainInputs(model, x, background, config);
  const int p = static_cast<int>(x.size());
  Require(p >= 2, ErrorCode::kParameter, "kernel SHAP needs at least 2 features");
  ValueFunction vf(model, x, background, config.step);

  std::vector<Coalition> coalitions;
  const bool enumerate = p <= config.enumerate_threshold && p <= 30;
  if (enumerate) {
    const uint32_t full = (1u << p) - 1;
    coalitions.reserve(full - 1);
    for (uint32_t mask = 1; mask < full; ++mask) {
      Coalition c = FromMask(mask, p);
      c.weight = KernelWeight(p, std::popcount(mask));
      coalitions.push_back(std::move(c));
    }
  } else {
    Require(config.n_samples >= 2, ErrorCode::kParameter,
            "kernel SHAP needs at least 2 sampled coalitions");
    coalitions = SampleCoalitions(p, config.n_samples, config.seed);
  }
  const std::vector<double> values = EvaluateAll(vf, coalitions, config.workers);

  // Weighted Gram matrix sum w z z^T and moment sum w z (v - base), built
  // from the smaller side of each coalition: for a complemented coalition
  // z = 1 - e, so z z^T = 1 1^T - 1 e^T - e 1^T + e e^T.
  const double phi0 = vf.base();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
  Vector moment = Vector::Zero(p);
  Vector comp_members = Vector::Zero(p);
  double comp_weight = 0.0;
  double comp_moment = 0.0;
  for (size_t i = 0; i < coalitions.size(); ++i) {
    const Coalition& c = coalitions[i];
    const double w = c.weight;
    const double wy = w * (values[i] - phi0);
    if (c.complemented) {
      comp_weight += w;
      comp_moment += wy;
    }
    for (const int a : c.members) {
      if (c.complemented) {
        comp_members(a) += w;
        moment(a) -= wy;
      } else {
        moment(a) += wy;
      }
      for (const int b : c.members) gram(a, b) += w;
    }
  }
  gram.array() += comp_weight;
  gram.colwise() -= comp_members;
  gram.rowwise() -= comp_members.transpose();
  moment.array() += comp_moment;

  // Efficiency is imposed exactly by eliminating the last attribution:
  // phi_last = delta - sum(others), regressors z_i - z_last.
  const int last = p - 1;
  const double delta = vf.f_x() - phi0;
  const int m = p - 1;
  Eigen::MatrixXd reduced(m, m);
  Vector rhs(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      reduced(i, j) = gram(i, j) - gram(i, last) - gram(last, j) + gram(last, last);
    }
    rhs(i) = moment(i) - moment(last) - delta * (gram(i, last) - gram(last, last));
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(reduced);
  const Vector d = ldlt.vectorD();
  const double d_max = d.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || d_max <= 0.0 ||
      d.minCoeff() <= 1e-10 * d_max) {
    Fail(ErrorCode::kNumerical,
         "coalition design is rank deficient with " +
             std::to_string(coalitions.size()) +
             " coalitions; increase n_samples");
  }
  const Vector solution = ldlt.solve(rhs);
  Vector phi(p);
  phi.head(m) = solution;
  phi(last) = delta - solution.sum();
  return Finish(vf, Method::kKernel, config, std::move(phi));
}

Attribution ExactShapley(const predictor::Predictor& model, const Vector& x,
                         const RowMatrix& background,
                         const ExplainerConfig& config) {
  CheckExplainInputs(model, x, background, config);
  const int p = static_cast<int>(x.size());
  if (p > kMaxExactFeatures) {
    Fail(ErrorCode::kBudget, "exact Shapley values over " + std::to_string(p) +
                                 " features exceed the limit of " +
                                 std::to_string(kMaxExactFeatures));
  }
  ValueFunction vf(model, x, background, config.step);
  const uint32_t count = 1u << p;
  std::vector<Coalition> coalitions;
  coalitions.reserve(count);
  for (uint32_t mask = 0; mask < count; ++mask) {
    coalitions.push_back(FromMask(mask, p));
  }
  const std::vector<double> values = EvaluateAll(vf, coalitions, config.workers);

  // Shapley weight |S|! (F - |S| - 1)! / F! = 1 / (F * C(F - 1, |S|)).
  std::vector<double> weight(p);
  for (int s = 0; s < p; ++s) {
    weight[s] = 1.0 / (p * std::exp(LogChoose(p - 1, s)));
  }
  Vector phi = Vector::Zero(p);
  for (uint32_t mask = 0; mask < count; ++mask) {
    const double w = weight[std::popcount(mask)];
    for (int i = 0; i < p; ++i) {
      if ((mask >> i) & 1u) continue;
      phi(i) += w * (values[mask | (1u << i)] - values[mask]);
    }
  }
  return Finish(vf, Method::kExact, config, std::move(phi));
}

Attribution SamplingShap(const predictor::Predictor& model, const Vector& x,
                         const RowMatrix& background,
                         const ExplainerConfig& config) {
  CheckExplainInputs(model, x, background, config);
  Require(config.n_samples >= 1, ErrorCode::kParameter,
          "sampling SHAP needs at least one permutation");
  const int p = static_cast<int>(x.size());
  ValueFunction vf(model, x, background, config.step);
  // When every ordering fits in the budget, walk each exactly once.
  int64_t orderings = 1;
  for (int k = 2; k <= p && orderings <= config.n_samples; ++k) orderings *= k;
  const bool complete = orderings <= config.n_samples;
  std::vector<std::vector<int>> orders;
  if (complete) {
    std::vector<int> order(p);
    std::iota(order.begin(), order.end(), 0);
    do {
      orders.push_back(order);
    } while (std::next_permutation(order.begin(), order.end()));
  } else {
    Rng rng(config.seed);
    orders.assign(config.n_samples, std::vector<int>(p));
    for (auto& order : orders) {
      std::iota(order.begin(), order.end(), 0);
      rng.Shuffle(order);
    }
  }
  const int n = static_cast<int>(orders.size());
  RowMatrix contributions(n, p);
  ParallelFor(n, config.workers, [&](int s) {
    ValueFunction::Scratch scratch(vf);
    Walk(scratch, vf, orders[s], {contributions.row(s).data(), static_cast<size_t>(p)});
  });
  Attribution a = Summarize(vf, Method::kSampling, config, contributions);
  if (complete) {
    a.n_samples = n;
    a.std_err.setZero();
  }
  return a;
}

Attribution PermutationShap(const predictor::Predictor& model, const Vector& x,
                            const RowMatrix& background,
                            const ExplainerConfig& config) {
  CheckExplainInputs(model, x, background, config);
  Require(config.n_samples >= 1, ErrorCode::kParameter,
          "permutation SHAP needs at least one permutation pair");
  const int p = static_cast<int>(x.size());
  ValueFunction vf(model, x, background, config.step);
  Rng rng(config.seed);
  std::vector<std::vector<int>> orders(config.n_samples, std::vector<int>(p));
  for (auto& order : orders) {
    std::iota(order.begin(), order.end(), 0);
    rng.Shuffle(order);
  }
  RowMatrix contributions(config.n_samples, p);
  ParallelFor(config.n_samples, config.workers, [&](int s) {
    ValueFunction::Scratch scratch(vf);
    std::vector<double> forward(p), backward(p);
    std::vector<int> reversed(orders[s].rbegin(), orders[s].rend());
    Walk(scratch, vf, orders[s], forward);
    Walk(scratch, vf, reversed, backward);
    for (int j = 0; j < p; ++j) {
      contributions(s, j) = 0.5 * (forward[j] + backward[j]);
    }
  });
  return Summarize(vf, Method::kPermutation, config, contributions);
}

Attribution Explain(Method method, const predictor::Predictor& model,
                    const Vector& x, const RowMatrix& background,
                    const ExplainerConfig& config) {
  switch (method) {
    case Method::kKernel: return KernelShap(model, x, background, config);
    case Method::kSampling: return SamplingShap(model, x, background, config);
    case Method::kPermutation:
      return PermutationShap(model, x, background, config);
    case Method::kExact: return ExactShapley(model, x, background, config);
  }
  Fail(ErrorCode::kParameter, "unknown method");
}

nlohmann::json AttributionToJson(const Attribution& a, WindowShape shape,
                                 const std::vector<std::string>& feature_names) {
  Require(a.phi.size() == shape.flat_size(), ErrorCode::kShape,
          "attribution length does not match the window shape");
  Require(static_cast<int>(feature_names.size()) == shape.features,
          ErrorCode::kShape, "feature name count does not match the shape");
  nlohmann::json phi = nlohmann::json::array();
  for (int t = 0; t < shape.steps; ++t) {
    for (int f = 0; f < shape.features; ++f) {
      const int i = shape.FlatIndex(t, f);
      nlohmann::json entry = {{"index", i},
                              {"time_step", t},
                              {"feature", feature_names[f]},
                              {"value", a.phi(i)}};
      if (a.std_err.size() == a.phi.size() && std::isfinite(a.std_err(i))) {
        entry["std_err"] = a.std_err(i);
      }
      phi.push_back(std::move(entry));
    }
  }
  return {{"method", MethodName(a.method)},
          {"seed", a.seed},
          {"n_samples", a.n_samples},
          {"n_evals", a.n_evals},
          {"n_calls", a.n_calls},
          {"phi0", a.phi0},
          {"f_x", a.f_x},
          {"phi", std::move(phi)}};
}

}  // namespace ctxshap::explain
