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

#include "ctxshap/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "ctxshap/error.h"

namespace ctxshap::dataset {

namespace {

using std::chrono::days;
using std::chrono::hours;
using std::chrono::sys_days;

int ParseInt(std::string_view text, std::string_view original) {
  int value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    Fail(ErrorCode::kParse,
         "unparseable timestamp '" + std::string(original) + "'");
  }
  return value;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(Trim(line.substr(start)));
      break;
    }
    fields.push_back(Trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

std::optional<double> ParseOptionalReal(std::string_view field,
                                        const std::string& column,
                                        int line_number) {
  if (field.empty() || field == "NA" || field == "nan" || field == "NaN") {
    return std::nullopt;
  }
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(value)) {
    Fail(ErrorCode::kParse, "line " + std::to_string(line_number) +
                                ": bad value '" + std::string(field) +
                                "' in column '" + column + "'");
  }
  return value;
}

void Impute(std::vector<std::optional<double>>& column, std::string_view name,
            const ImputationConfig& config) {
  const bool any = std::any_of(column.begin(), column.end(),
                               [](const auto& v) { return v.has_value(); });
  if (config.mode == ImputationMode::kConstant) {
    for (auto& v : column) {
      if (!v) v = config.constant;
    }
    return;
  }
  if (!any) {
    Fail(ErrorCode::kInput,
         "weather column '" + std::string(name) +
             "' has no values; forward/back fill cannot impute it, "
             "configure constant imputation instead");
  }
  std::optional<double> last;
  for (auto& v : column) {
    if (v) {
      last = v;
    } else {
      v = last;
    }
  }
  std::optional<double> next;
  for (auto it = column.rbegin(); it != column.rend(); ++it) {
    if (*it) {
      next = *it;
    } else {
      *it = next;
    }
  }
}

}  // namespace

Timestamp ParseTimestamp(std::string_view text) {
  const std::string_view original = text;
  text = Trim(text);
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  // YYYY-MM-DD?HH:MM[:SS]
  if (text.size() != 16 && text.size() != 19) {
    Fail(ErrorCode::kParse,
         "unparseable timestamp '" + std::string(original) + "'");
  }
  if (text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':' || (text.size() == 19 && text[16] != ':')) {
    Fail(ErrorCode::kParse,
         "unparseable timestamp '" + std::string(original) + "'");
  }
  const int y = ParseInt(text.substr(0, 4), original);
  const int mo = ParseInt(text.substr(5, 2), original);
  const int d = ParseInt(text.substr(8, 2), original);
  const int hh = ParseInt(text.substr(11, 2), original);
  const int mm = ParseInt(text.substr(14, 2), original);
  const int ss = text.size() == 19 ? ParseInt(text.substr(17, 2), original) : 0;
  const std::chrono::year_month_day ymd{
      std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
      std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || hh > 23 || mm > 59 || ss > 59 || hh < 0 || mm < 0 ||
      ss < 0) {
    Fail(ErrorCode::kParse,
         "unparseable timestamp '" + std::string(original) + "'");
  }
  return sys_days{ymd} + hours{hh} + std::chrono::minutes{mm} +
         std::chrono::seconds{ss};
}

std::string FormatTimestamp(Timestamp t) {
  const sys_days day = std::chrono::floor<days>(t);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{t - day};
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02u-%02uT%02ld:%02ld:%02ld",
                static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()),
                static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buffer;
}

IngestReport IngestCsv(const std::filesystem::path& path,
                       const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    Fail(ErrorCode::kInput, "cannot open '" + path.string() + "'");
  }
  return ParseCsv(in, schema);
}

IngestReport ParseCsv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  int line_number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_number;
    if (!Trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) Fail(ErrorCode::kInput, "empty CSV input");

  std::map<std::string, int, std::less<>> header;
  {
    const auto names = SplitFields(line);
    for (int i = 0; i < static_cast<int>(names.size()); ++i) {
      header.emplace(std::string(names[i]), i);
    }
  }
  auto column = [&](const std::string& name, bool required) -> int {
    const auto it = header.find(name);
    if (it == header.end()) {
      if (required) {
        Fail(ErrorCode::kSchema, "missing column '" + name + "'");
      }
      return -1;
    }
    return it->second;
  };
  const int ts_col = column(schema.timestamp, true);
  const int energy_col = column(schema.energy, true);
  const int temp_col = column(schema.temperature, false);
  const int hum_col = column(schema.humidity, false);
  const int wind_col = column(schema.wind_speed, false);

  IngestReport report;
  while (std::getline(in, line)) {
    ++line_number;
    if (Trim(line).empty()) continue;
    const auto fields = SplitFields(line);
    if (fields.size() != header.size()) {
      Fail(ErrorCode::kParse, "line " + std::to_string(line_number) +
                                  ": expected " +
                                  std::to_string(header.size()) +
                                  " fields, found " +
                                  std::to_string(fields.size()));
    }
    TimeSeriesRecord record;
    try {
      record.timestamp = ParseTimestamp(fields[ts_col]);
    } catch (const Error& e) {
      Fail(ErrorCode::kParse,
           "line " + std::to_string(line_number) + ": " + e.what());
    }
    const auto energy =
        ParseOptionalReal(fields[energy_col], schema.energy, line_number);
    if (!energy || *energy < 0.0) {
      Fail(ErrorCode::kParse, "line " + std::to_string(line_number) +
                                  ": energy must be a nonnegative number");
    }
    record.energy = *energy;
    if (temp_col >= 0) {
      record.temperature = ParseOptionalReal(fields[temp_col],
                                             schema.temperature, line_number);
    }
    if (hum_col >= 0) {
      record.humidity =
          ParseOptionalReal(fields[hum_col], schema.humidity, line_number);
    }
    if (wind_col >= 0) {
      record.wind_speed =
          ParseOptionalReal(fields[wind_col], schema.wind_speed, line_number);
    }
    report.records.push_back(record);
  }
  if (report.records.empty()) Fail(ErrorCode::kInput, "CSV has no data rows");

  std::stable_sort(report.records.begin(), report.records.end(),
                   [](const auto& a, const auto& b) {
                     return a.timestamp < b.timestamp;
                   });
  for (size_t i = 1; i < report.records.size(); ++i) {
    const Timestamp prev = report.records[i - 1].timestamp;
    const Timestamp cur = report.records[i].timestamp;
    if (cur == prev) {
      Fail(ErrorCode::kInput,
           "duplicate timestamp " + FormatTimestamp(cur));
    }
    for (Timestamp t = prev + hours{1}; t < cur; t += hours{1}) {
      report.gaps.push_back(t);
    }
  }
  return report;
}

void WriteCsv(std::ostream& out,
              const std::vector<TimeSeriesRecord>& records) {
  auto put = [&out](const std::optional<double>& v) {
    if (v) out << *v;
  };
  const auto old_precision = out.precision(17);
  out << "timestamp,energy,temperature,humidity,wind_speed\n";
  for (const auto& r : records) {
    out << FormatTimestamp(r.timestamp) << ',' << r.energy << ',';
    put(r.temperature);
    out << ',';
    put(r.humidity);
    out << ',';
    put(r.wind_speed);
    out << '\n';
  }
  out.precision(old_precision);
}

int FeatureMatrix::ColumnIndex(std::string_view name) const {
  for (int i = 0; i < static_cast<int>(columns.size()); ++i) {
    if (columns[i] == name) return i;
  }
  Fail(ErrorCode::kLookup, "no column '" + std::string(name) + "'");
}

FeatureMatrix FeatureMatrix::Slice(int begin, int count) const {
  Require(begin >= 0 && count >= 0 && begin + count <= rows(),
          ErrorCode::kShape, "slice out of range");
  FeatureMatrix out;
  out.columns = columns;
  out.target_column = target_column;
  out.values = values.middleRows(begin, count);
  if (!timestamps.empty()) {
    out.timestamps.assign(timestamps.begin() + begin,
                          timestamps.begin() + begin + count);
  }
  return out;
}

FeatureMatrix EngineerFeatures(const std::vector<TimeSeriesRecord>& records,
                               const ImputationConfig& imputation) {
  Require(!records.empty(), ErrorCode::kInput, "no records");
  const int t_count = static_cast<int>(records.size());
  std::vector<std::optional<double>> temperature(t_count), humidity(t_count),
      wind(t_count);
  for (int t = 0; t < t_count; ++t) {
    if (t > 0) {
      Require(records[t].timestamp > records[t - 1].timestamp,
              ErrorCode::kInput, "records must be strictly increasing");
    }
    temperature[t] = records[t].temperature;
    humidity[t] = records[t].humidity;
    wind[t] = records[t].wind_speed;
  }
  Impute(temperature, "temperature", imputation);
  Impute(humidity, "humidity", imputation);
  Impute(wind, "wind_speed", imputation);

  FeatureMatrix m;
  m.columns.assign(kCanonicalFeatures.begin(), kCanonicalFeatures.end());
  m.values.resize(t_count, static_cast<Eigen::Index>(kCanonicalFeatures.size()));
  m.timestamps.reserve(t_count);
  for (int t = 0; t < t_count; ++t) {
    const Timestamp ts = records[t].timestamp;
    const sys_days day = std::chrono::floor<days>(ts);
    const std::chrono::year_month_day ymd{day};
    const std::chrono::weekday wd{day};
    const int hour = static_cast<int>(
        std::chrono::duration_cast<hours>(ts - day).count());
    const int day_of_week = static_cast<int>(wd.iso_encoding()) - 1;  // Mon=0
    const int day_of_year =
        (day - sys_days{ymd.year() / std::chrono::January / 1}).count() + 1;
    auto row = m.values.row(t);
    row(0) = records[t].energy;
    row(1) = hour;
    row(2) = day_of_week;
    row(3) = static_cast<unsigned>(ymd.day());
    row(4) = day_of_year;
    row(5) = static_cast<unsigned>(ymd.month());
    row(6) = day_of_week >= 5 ? 1.0 : 0.0;
    row(7) = *temperature[t];
    row(8) = *humidity[t];
    row(9) = *wind[t];
    m.timestamps.push_back(ts);
  }
  return m;
}

double ScalingParams::Scale(int feature, double value) const {
  const double range = max(feature) - min(feature);
  if (range == 0.0) return 0.0;
  return (value - min(feature)) / range;
}

double ScalingParams::Unscale(int feature, double value) const {
  return value * (max(feature) - min(feature)) + min(feature);
}

ScalingParams FitScaler(const FeatureMatrix& train) {
  Require(train.rows() > 0, ErrorCode::kInput,
          "cannot fit scaler on an empty matrix");
  ScalingParams p;
  p.min = train.values.colwise().minCoeff().transpose();
  p.max = train.values.colwise().maxCoeff().transpose();
  return p;
}

FeatureMatrix ApplyScaler(const FeatureMatrix& m, const ScalingParams& p) {
  Require(p.fitted(), ErrorCode::kState, "scaling parameters are not fitted");
  Require(p.min.size() == m.cols(), ErrorCode::kShape,
          "scaler fitted for " + std::to_string(p.min.size()) +
              " features, matrix has " + std::to_string(m.cols()));
  FeatureMatrix out = m;
  for (int f = 0; f < m.cols(); ++f) {
    for (int t = 0; t < m.rows(); ++t) {
      out.values(t, f) = p.Scale(f, m.values(t, f));
    }
  }
  return out;
}

FeatureMatrix InvertScaler(const FeatureMatrix& m, const ScalingParams& p) {
  Require(p.fitted(), ErrorCode::kState, "scaling parameters are not fitted");
  Require(p.min.size() == m.cols(), ErrorCode::kShape,
          "scaler/matrix feature count mismatch");
  FeatureMatrix out = m;
  for (int f = 0; f < m.cols(); ++f) {
    for (int t = 0; t < m.rows(); ++t) {
      out.values(t, f) = p.Unscale(f, m.values(t, f));
    }
  }
  return out;
}

SplitSizes ComputeSplitSizes(int total_rows, const SplitFractions& fractions) {
  Require(fractions.train >= 0 && fractions.validation >= 0 &&
              fractions.test >= 0,
          ErrorCode::kParameter, "split fractions must be nonnegative");
  Require(std::abs(fractions.train + fractions.validation + fractions.test -
                   1.0) < 1e-9,
          ErrorCode::kParameter, "split fractions must sum to 1");
  // The small epsilon keeps exact products such as 0.1 * 100 from flooring
  // down to 9.
  SplitSizes s;
  s.validation =
      static_cast<int>(std::floor(fractions.validation * total_rows + 1e-9));
  s.test = static_cast<int>(std::floor(fractions.test * total_rows + 1e-9));
  s.train = total_rows - s.validation - s.test;
  return s;
}

Splits ChronologicalSplit(const FeatureMatrix& m,
                          const SplitFractions& fractions, int min_rows) {
  Splits out;
  out.sizes = ComputeSplitSizes(m.rows(), fractions);
  const auto check = [&](int size, const char* name) {
    if (size < min_rows) {
      Fail(ErrorCode::kSizing,
           std::string(name) + " split has " + std::to_string(size) +
               " rows; at least " + std::to_string(min_rows) +
               " are needed to form one window");
    }
  };
  check(out.sizes.train, "training");
  check(out.sizes.validation, "validation");
  check(out.sizes.test, "test");
  out.train_begin = 0;
  out.validation_begin = out.sizes.train;
  out.test_begin = out.sizes.train + out.sizes.validation;
  out.train = m.Slice(out.train_begin, out.sizes.train);
  out.validation = m.Slice(out.validation_begin, out.sizes.validation);
  out.test = m.Slice(out.test_begin, out.sizes.test);
  return out;
}

WindowedDataset MakeWindows(const FeatureMatrix& m, int window_length,
                            int horizon) {
  Require(window_length > 0 && horizon > 0, ErrorCode::kParameter,
          "window length and horizon must be positive");
  const int t_count = m.rows();
  Require(t_count >= window_length + horizon, ErrorCode::kSizing,
          "series of " + std::to_string(t_count) +
              " rows is shorter than window + horizon = " +
              std::to_string(window_length + horizon));
  const int target = m.ColumnIndex(m.target_column);
  const int f_count = m.cols();
  const int n = t_count - window_length - horizon + 1;

  WindowedDataset ds;
  ds.shape = {window_length, f_count};
  ds.horizon = horizon;
  ds.inputs.resize(n, ds.shape.flat_size());
  ds.targets.resize(n, horizon);
  ds.origin_indices.resize(n);
  for (int w = 0; w < n; ++w) {
    // Row-major storage makes the window block contiguous.
    const double* src = m.values.data() + static_cast<Eigen::Index>(w) * f_count;
    std::copy(src, src + ds.shape.flat_size(), ds.inputs.row(w).data());
    for (int k = 0; k < horizon; ++k) {
      ds.targets(w, k) = m.values(w + window_length + k, target);
    }
    ds.origin_indices[w] = w;
    if (!m.timestamps.empty()) {
      ds.target_timestamps.push_back(m.timestamps[w + window_length]);
    }
  }
  return ds;
}

Vector FlattenWindow(const RowMatrix& window) {
  Vector flat(window.size());
  for (Eigen::Index t = 0; t < window.rows(); ++t) {
    for (Eigen::Index f = 0; f < window.cols(); ++f) {
      flat(t * window.cols() + f) = window(t, f);
    }
  }
  return flat;
}

RowMatrix Unflatten(const Vector& flat, int steps, int features) {
  Require(features > 0 && flat.size() % features == 0, ErrorCode::kShape,
          "flat length " + std::to_string(flat.size()) +
              " is not divisible by " + std::to_string(features));
  Require(flat.size() == static_cast<Eigen::Index>(steps) * features,
          ErrorCode::kShape, "flat length does not match steps x features");
  RowMatrix window(steps, features);
  for (int t = 0; t < steps; ++t) {
    for (int f = 0; f < features; ++f) window(t, f) = flat(t * features + f);
  }
  return window;
}

}  // namespace ctxshap::dataset
