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

#ifndef CTXSHAP_TYPES_H_
#define CTXSHAP_TYPES_H_

#include <cstddef>

#include <Eigen/Dense>

namespace ctxshap {

// Row-major so that each row of a batch is one flattened window: element
// (t, f) of an I x F window sits at offset t * F + f.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct WindowShape {
  int steps = 0;     // I
  int features = 0;  // F

  int flat_size() const { return steps * features; }
  int FlatIndex(int step, int feature) const {
    return step * features + feature;
  }
  bool operator==(const WindowShape&) const = default;
};

}  // namespace ctxshap

#endif  // CTXSHAP_TYPES_H_
