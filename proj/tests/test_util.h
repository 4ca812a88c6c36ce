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

#ifndef CTXSHAP_TESTS_TEST_UTIL_H_
#define CTXSHAP_TESTS_TEST_UTIL_H_

#include <functional>
#include <string>

#include "gtest/gtest.h"
#include "ctxshap/error.h"
#include "ctxshap/predictor.h"
#include "ctxshap/rng.h"
#include "ctxshap/types.h"

namespace ctxshap::testing {

// Runs `fn` and checks that it raises ctxshap::Error with `code`.
inline ::testing::AssertionResult RaisesCode(const std::function<void()>& fn,
                                             ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() == code) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure()
           << "raised " << ErrorCodeName(e.code()) << " (" << e.what()
           << "), wanted " << ErrorCodeName(code);
  } catch (const std::exception& e) {
    return ::testing::AssertionFailure() << "raised non-ctxshap " << e.what();
  }
  return ::testing::AssertionFailure() << "nothing raised";
}

inline RowMatrix RandomMatrix(int rows, int cols, Rng& rng,
                              double scale = 1.0) {
  RowMatrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = scale * rng.Normal();
  }
  return m;
}

inline Vector RandomVector(int n, Rng& rng, double scale = 1.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.Normal();
  return v;
}

// f(x) = w . x + b on a single-step "window" of n features.
inline predictor::FunctionModel LinearModel(const Vector& w, double b) {
  const int n = static_cast<int>(w.size());
  return predictor::FunctionModel(
      WindowShape{1, n}, 1,
      [w, b, n](std::span<const double> x, std::span<double> out) {
        double s = b;
        for (int i = 0; i < n; ++i) s += w[i] * x[i];
        out[0] = s;
      },
      "linear");
}

}  // namespace ctxshap::testing

#endif  // CTXSHAP_TESTS_TEST_UTIL_H_
