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

#ifndef CTXSHAP_RNG_H_
#define CTXSHAP_RNG_H_

#include <cstdint>
#include <random>
#include <vector>

namespace ctxshap {

// Mixes a base seed with a stream id (splitmix64 finalizer). Used to hand
// each tree, anomaly or rerun its own independent seed.
uint64_t DeriveSeed(uint64_t base, uint64_t stream);

// Seeded generator with platform-independent distributions. The standard
// library distributions are implementation-defined, so only the raw
// mt19937_64 stream is used.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }
  // Uniform on [0, 1).
  double Uniform();
  // Uniform integer on [0, n). n must be positive.
  uint64_t UniformInt(uint64_t n);
  double Normal();

  // k distinct indices drawn uniformly from [0, n), in draw order.
  std::vector<int> SampleWithoutReplacement(int n, int k);
  template <typename T>
  void Shuffle(std::vector<T>& values) {
    for (size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[UniformInt(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ctxshap

#endif  // CTXSHAP_RNG_H_
