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

#ifndef CTXSHAP_SYNTH_H_
#define CTXSHAP_SYNTH_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ctxshap/dataset.h"

// Synthetic hourly energy series with daily/weekly seasonality, correlated
// weather channels and injected anomalies with known ground truth.
namespace ctxshap::synth {

struct SynthConfig {
  int length = 8760;  // hours
  double daily_amplitude = 5.0;
  double weekly_amplitude = 2.0;
  double base_load = 20.0;
  double noise_sd = 1.0;
  double weather_coupling = 0.3;  // kWh per degree C above 15
  uint64_t seed = 0;
  dataset::Timestamp start = dataset::ParseTimestamp("2023-01-01T00:00:00");
  // Used only for the minimum-length check T >= 2 * (I + h).
  int window_length = 48;
  int horizon = 24;
};

// energy = base + daily sinusoid + weekly sinusoid
//          + coupling * (temperature - 15) + N(0, noise_sd), clipped at 0.
std::vector<dataset::TimeSeriesRecord> GenerateSeries(const SynthConfig& cfg);

enum class AnomalyKind { kSpike, kLevelShift, kSustained };

std::string AnomalyKindName(AnomalyKind kind);
AnomalyKind ParseAnomalyKind(const std::string& name);

struct AnomalySpec {
  int count = 30;
  double magnitude_sigmas = 8.0;
  AnomalyKind kind = AnomalyKind::kSpike;
  int min_separation = 24;  // hours between onsets
  // Hours modified per anomaly. Spikes always touch exactly one hour; a
  // level shift holds the offset for `duration` hours and a sustained
  // anomaly ramps up to it linearly over `duration` hours.
  int duration = 6;
  double noise_sd = 1.0;  // the sigma that magnitude_sigmas refers to
  // Onsets are placed in [region_begin, region_end); -1 means series end.
  int region_begin = 0;
  int region_end = -1;
};

struct InjectedAnomaly {
  int index = 0;  // onset row
  dataset::Timestamp timestamp;
  AnomalyKind kind = AnomalyKind::kSpike;
  int duration = 1;
  double magnitude = 0.0;  // kWh at peak
};

struct InjectionResult {
  std::vector<dataset::TimeSeriesRecord> records;
  std::vector<InjectedAnomaly> ground_truth;  // sorted by onset
};

InjectionResult InjectAnomalies(
    const std::vector<dataset::TimeSeriesRecord>& records,
    const AnomalySpec& spec, uint64_t seed);

// Allowed onset range so that every onset is the h=1 target of some test
// window and none falls in the first I + h hours of the test split.
struct Region {
  int begin = 0;
  int end = 0;
};
Region TestInjectionRegion(int length, const dataset::SplitFractions& fractions,
                           int window_length, int horizon);

}  // namespace ctxshap::synth

#endif  // CTXSHAP_SYNTH_H_
