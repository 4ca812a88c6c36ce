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

#include "ctxshap/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ctxshap/error.h"
#include "ctxshap/rng.h"

namespace ctxshap::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// AR(1) noise with stationary standard deviation `sd`.
class SmoothNoise {
 public:
  SmoothNoise(double phi, double sd) : phi_(phi), innovation_(sd * std::sqrt(1 - phi * phi)) {}
  double Next(Rng& rng) {
    state_ = phi_ * state_ + innovation_ * rng.Normal();
    return state_;
  }

 private:
  double phi_;
  double innovation_;
  double state_ = 0.0;
};

}  // namespace

std::vector<dataset::TimeSeriesRecord> GenerateSeries(const SynthConfig& cfg) {
  Require(cfg.base_load > 0.0, ErrorCode::kParameter,
          "base_load must be positive");
  Require(cfg.noise_sd >= 0.0, ErrorCode::kParameter,
          "noise_sd must be nonnegative");
  const int min_length = 2 * (cfg.window_length + cfg.horizon);
  Require(cfg.length >= min_length, ErrorCode::kSizing,
          "series length " + std::to_string(cfg.length) +
              " is below the minimum " + std::to_string(min_length));

  // Separate streams so the weather does not shift when noise_sd changes.
  Rng weather_rng(DeriveSeed(cfg.seed, 1));
  Rng noise_rng(DeriveSeed(cfg.seed, 2));
  SmoothNoise temp_noise(0.97, 2.0);
  SmoothNoise hum_noise(0.95, 6.0);
  SmoothNoise wind_noise(0.9, 4.0);

  std::vector<dataset::TimeSeriesRecord> out;
  out.reserve(cfg.length);
  for (int t = 0; t < cfg.length; ++t) {
    const dataset::Timestamp ts = cfg.start + std::chrono::hours{t};
    const auto day = std::chrono::floor<std::chrono::days>(ts);
    const double hour = static_cast<double>(
        std::chrono::duration_cast<std::chrono::hours>(ts - day).count());
    const std::chrono::year_month_day ymd{day};
    const double day_of_year =
        (day - std::chrono::sys_days{ymd.year() / std::chrono::January / 1})
            .count();

    const double temperature =
        12.0 + 10.0 * std::sin(kTwoPi * (day_of_year - 110.0) / 365.25) +
        4.0 * std::sin(kTwoPi * (hour - 9.0) / 24.0) +
        temp_noise.Next(weather_rng);
    const double humidity = std::clamp(
        70.0 - 1.5 * (temperature - 12.0) + hum_noise.Next(weather_rng), 5.0,
        100.0);
    const double wind = std::abs(12.0 + wind_noise.Next(weather_rng));

    double energy = cfg.base_load +
                    cfg.daily_amplitude * std::sin(kTwoPi * (hour - 6.0) / 24.0) +
                    cfg.weekly_amplitude * std::sin(kTwoPi * t / 168.0) +
                    cfg.weather_coupling * (temperature - 15.0);
    if (cfg.noise_sd > 0.0) energy += cfg.noise_sd * noise_rng.Normal();

    dataset::TimeSeriesRecord r;
    r.timestamp = ts;
    r.energy = std::max(0.0, energy);
    r.temperature = temperature;
    r.humidity = humidity;
    r.wind_speed = wind;
    out.push_back(r);
  }
  return out;
}

std::string AnomalyKindName(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kSpike: return "spike";
    case AnomalyKind::kLevelShift: return "level-shift";
    case AnomalyKind::kSustained: return "sustained";
  }
  return "spike";
}

AnomalyKind ParseAnomalyKind(const std::string& name) {
  if (name == "spike") return AnomalyKind::kSpike;
  if (name == "level-shift") return AnomalyKind::kLevelShift;
  if (name == "sustained") return AnomalyKind::kSustained;
  Fail(ErrorCode::kParameter, "unknown anomaly kind '" + name + "'");
}

InjectionResult InjectAnomalies(
    const std::vector<dataset::TimeSeriesRecord>& records,
    const AnomalySpec& spec, uint64_t seed) {
  InjectionResult result;
  result.records = records;
  Require(spec.count >= 0, ErrorCode::kParameter,
          "anomaly count must be nonnegative");
  if (spec.count == 0) return result;
  Require(spec.min_separation >= 1, ErrorCode::kParameter,
          "min_separation must be at least 1");

  const int duration = spec.kind == AnomalyKind::kSpike ? 1 : spec.duration;
  Require(duration >= 1, ErrorCode::kParameter, "duration must be positive");
  Require(spec.min_separation >= duration, ErrorCode::kPlacement,
          "min_separation must be at least the anomaly duration");

  const int n = static_cast<int>(records.size());
  const int begin = std::max(0, spec.region_begin);
  const int end = spec.region_end < 0 ? n : std::min(n, spec.region_end);
  // Last onset must leave room for the full duration.
  const int onset_range = end - begin - (duration - 1);
  const int slots = onset_range - (spec.count - 1) * (spec.min_separation - 1);
  if (onset_range <= 0 || slots < spec.count) {
    Fail(ErrorCode::kPlacement,
         "cannot place " + std::to_string(spec.count) + " anomalies " +
             std::to_string(spec.min_separation) + " hours apart in rows [" +
             std::to_string(begin) + ", " + std::to_string(end) + ")");
  }

  // Sorted distinct draws from the compressed range, spread back out by the
  // separation, are uniform over all valid placements.
  Rng rng(seed);
  std::vector<int> picks = rng.SampleWithoutReplacement(slots, spec.count);
  std::sort(picks.begin(), picks.end());

  const double magnitude = spec.magnitude_sigmas * spec.noise_sd;
  for (int i = 0; i < spec.count; ++i) {
    const int onset = begin + picks[i] + i * (spec.min_separation - 1);
    for (int k = 0; k < duration; ++k) {
      double delta = magnitude;
      if (spec.kind == AnomalyKind::kSustained) {
        delta = magnitude * (k + 1) / duration;
      }
      auto& energy = result.records[onset + k].energy;
      energy = std::max(0.0, energy + delta);
    }
    InjectedAnomaly a;
    a.index = onset;
    a.timestamp = records[onset].timestamp;
    a.kind = spec.kind;
    a.duration = duration;
    a.magnitude = magnitude;
    result.ground_truth.push_back(a);
  }
  return result;
}

Region TestInjectionRegion(int length, const dataset::SplitFractions& fractions,
                           int window_length, int horizon) {
  const auto sizes = dataset::ComputeSplitSizes(length, fractions);
  const int test_begin = sizes.train + sizes.validation;
  return {test_begin + window_length + horizon, length - horizon + 1};
}

}  // namespace ctxshap::synth
