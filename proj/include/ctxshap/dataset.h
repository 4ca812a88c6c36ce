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

#ifndef CTXSHAP_DATASET_H_
#define CTXSHAP_DATASET_H_

#include <array>
#include <chrono>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxshap/types.h"

// Ingestion, calendar/weather feature engineering, min-max scaling,
// chronological splitting and sliding-window construction.
namespace ctxshap::dataset {

using Timestamp = std::chrono::sys_seconds;

// Accepts "YYYY-MM-DDTHH:MM[:SS][Z]" (a space may replace the 'T').
Timestamp ParseTimestamp(std::string_view text);
std::string FormatTimestamp(Timestamp t);

struct TimeSeriesRecord {
  Timestamp timestamp;
  double energy = 0.0;  // kWh
  std::optional<double> temperature;  // degrees C
  std::optional<double> humidity;     // percent
  std::optional<double> wind_speed;   // km/h
};

// Header names for each column. Weather columns may be absent from the file.
struct CsvSchema {
  std::string timestamp = "timestamp";
  std::string energy = "energy";
  std::string temperature = "temperature";
  std::string humidity = "humidity";
  std::string wind_speed = "wind_speed";
};

struct IngestReport {
  std::vector<TimeSeriesRecord> records;  // sorted by timestamp
  std::vector<Timestamp> gaps;            // missing hourly stamps
};

IngestReport IngestCsv(const std::filesystem::path& path,
                       const CsvSchema& schema = {});
IngestReport ParseCsv(std::istream& in, const CsvSchema& schema = {});
void WriteCsv(std::ostream& out, const std::vector<TimeSeriesRecord>& records);

enum class ImputationMode { kForwardBackFill, kConstant };

struct ImputationConfig {
  ImputationMode mode = ImputationMode::kForwardBackFill;
  double constant = 0.0;
};

inline constexpr std::array<std::string_view, 10> kCanonicalFeatures = {
    "energy",     "hour",  "day_of_week", "day_of_month", "day_of_year",
    "month",      "is_weekend", "temperature", "humidity", "wind_speed"};
inline constexpr int kEnergyColumn = 0;

struct FeatureMatrix {
  std::vector<std::string> columns;
  RowMatrix values;  // T x F
  std::string target_column = "energy";
  std::vector<Timestamp> timestamps;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  int ColumnIndex(std::string_view name) const;
  FeatureMatrix Slice(int begin, int count) const;
};

FeatureMatrix EngineerFeatures(const std::vector<TimeSeriesRecord>& records,
                               const ImputationConfig& imputation = {});

struct ScalingParams {
  Vector min;
  Vector max;

  bool fitted() const { return min.size() > 0 && min.size() == max.size(); }
  double Scale(int feature, double value) const;
  double Unscale(int feature, double value) const;
};

ScalingParams FitScaler(const FeatureMatrix& train);
// X' = (X - min) / (max - min); a feature with max == min maps to 0.
FeatureMatrix ApplyScaler(const FeatureMatrix& m, const ScalingParams& p);
FeatureMatrix InvertScaler(const FeatureMatrix& m, const ScalingParams& p);

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct SplitSizes {
  int train = 0;
  int validation = 0;
  int test = 0;
};

// Validation and test sizes are floor(fraction * T); the remainder goes to
// the training split.
SplitSizes ComputeSplitSizes(int total_rows, const SplitFractions& fractions);

struct Splits {
  FeatureMatrix train;
  FeatureMatrix validation;
  FeatureMatrix test;
  SplitSizes sizes;
  // Row offsets of each split in the source matrix.
  int train_begin = 0;
  int validation_begin = 0;
  int test_begin = 0;
};

// Every split must hold at least `min_rows` rows (I + h for windowing).
Splits ChronologicalSplit(const FeatureMatrix& m,
                          const SplitFractions& fractions, int min_rows);

struct WindowedDataset {
  RowMatrix inputs;   // N x (I * F), each row a flattened window
  RowMatrix targets;  // N x h, energy at steps t+1 .. t+h
  WindowShape shape;
  int horizon = 0;
  std::vector<int> origin_indices;          // first row of each window
  std::vector<Timestamp> target_timestamps;  // timestamp of the h=1 target

  int size() const { return static_cast<int>(inputs.rows()); }
};

WindowedDataset MakeWindows(const FeatureMatrix& m, int window_length,
                            int horizon);

Vector FlattenWindow(const RowMatrix& window);
RowMatrix Unflatten(const Vector& flat, int steps, int features);

}  // namespace ctxshap::dataset

#endif  // CTXSHAP_DATASET_H_
