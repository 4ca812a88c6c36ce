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

#include <ctime>
#include <sstream>

#include "gtest/gtest.h"
#include "test_util.h"

namespace ctxshap::dataset {
namespace {

using ::ctxshap::testing::RaisesCode;

std::vector<TimeSeriesRecord> HourlyRecords(const std::string& start, int n) {
  std::vector<TimeSeriesRecord> out;
  const Timestamp t0 = ParseTimestamp(start);
  for (int i = 0; i < n; ++i) {
    TimeSeriesRecord r;
    r.timestamp = t0 + std::chrono::hours(i);
    r.energy = 10.0 + i;
    r.temperature = 15.0 + 0.1 * i;
    r.humidity = 50.0;
    r.wind_speed = 3.0 + (i % 5);
    out.push_back(r);
  }
  return out;
}

FeatureMatrix Ramp(int rows, int cols) {
  FeatureMatrix m;
  for (int c = 0; c < cols; ++c) m.columns.push_back("c" + std::to_string(c));
  m.values.resize(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m.values(r, c) = 100.0 * c + r;
    m.timestamps.push_back(ParseTimestamp("2020-01-01T00:00") +
                           std::chrono::hours(r));
  }
  m.target_column = "c0";
  return m;
}

TEST(IngestCsv, ReadsRowsInOrder) {
  std::istringstream in(
      "timestamp,energy,temperature,humidity,wind_speed\n"
      "2023-01-01T00:00:00,1.5,3,40,2\n"
      "2023-01-01T01:00:00,2.5,4,41,3\n"
      "2023-01-01T02:00:00,3.5,5,42,4\n");
  const auto report = ParseCsv(in);
  ASSERT_EQ(report.records.size(), 3u);
  EXPECT_TRUE(report.gaps.empty());
  EXPECT_DOUBLE_EQ(report.records[0].energy, 1.5);
  EXPECT_DOUBLE_EQ(report.records[2].energy, 3.5);
  EXPECT_DOUBLE_EQ(*report.records[1].temperature, 4.0);
  EXPECT_LT(report.records[0].timestamp, report.records[1].timestamp);
}

TEST(IngestCsv, SortsOutOfOrderRows) {
  std::istringstream in(
      "energy,timestamp\n"
      "2,2023-01-01 01:00\n"
      "1,2023-01-01 00:00\n");
  const auto report = ParseCsv(in);
  ASSERT_EQ(report.records.size(), 2u);
  EXPECT_DOUBLE_EQ(report.records[0].energy, 1.0);
  EXPECT_FALSE(report.records[0].temperature.has_value());
}

TEST(IngestCsv, DuplicateTimestampNamesIt) {
  std::istringstream in(
      "timestamp,energy\n"
      "2023-01-01T00:00:00,1\n"
      "2023-01-01T05:00:00,2\n"
      "2023-01-01T05:00:00,3\n");
  try {
    ParseCsv(in);
    FAIL() << "duplicate accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInput);
    EXPECT_NE(std::string(e.what()).find("2023-01-01T05:00:00"),
              std::string::npos)
        << e.what();
  }
}

TEST(IngestCsv, ListsGapHours) {
  std::istringstream in(
      "timestamp,energy\n"
      "2023-01-01T00:00:00,1\n"
      "2023-01-01T01:00:00,1\n"
      "2023-01-01T03:00:00,1\n");
  const auto report = ParseCsv(in);
  EXPECT_EQ(report.records.size(), 3u);
  ASSERT_EQ(report.gaps.size(), 1u);
  EXPECT_EQ(report.gaps[0], ParseTimestamp("2023-01-01T02:00:00"));
}

TEST(IngestCsv, SchemaAndParseErrors) {
  std::istringstream no_energy("timestamp,load\n2023-01-01T00:00,1\n");
  EXPECT_TRUE(RaisesCode([&] { ParseCsv(no_energy); }, ErrorCode::kSchema));
  std::istringstream bad_time("timestamp,energy\nyesterday,1\n");
  EXPECT_TRUE(RaisesCode([&] { ParseCsv(bad_time); }, ErrorCode::kParse));
  std::istringstream bad_value("timestamp,energy\n2023-01-01T00:00,abc\n");
  EXPECT_TRUE(RaisesCode([&] { ParseCsv(bad_value); }, ErrorCode::kParse));
  std::istringstream empty("");
  EXPECT_TRUE(RaisesCode([&] { ParseCsv(empty); }, ErrorCode::kInput));
}

TEST(IngestCsv, CustomSchema) {
  std::istringstream in("time,kwh\n2023-01-01T00:00,4\n");
  CsvSchema schema;
  schema.timestamp = "time";
  schema.energy = "kwh";
  EXPECT_DOUBLE_EQ(ParseCsv(in, schema).records.at(0).energy, 4.0);
}

TEST(IngestCsv, WriteThenReadRoundTrips) {
  const auto records = HourlyRecords("2023-03-01T00:00", 5);
  std::stringstream buf;
  WriteCsv(buf, records);
  const auto back = ParseCsv(buf).records;
  ASSERT_EQ(back.size(), records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(back[i].timestamp, records[i].timestamp);
    EXPECT_EQ(back[i].energy, records[i].energy);
    EXPECT_EQ(*back[i].temperature, *records[i].temperature);
  }
}

TEST(EngineerFeatures, CanonicalColumns) {
  const auto m = EngineerFeatures(HourlyRecords("2023-01-01T00:00", 4));
  ASSERT_EQ(m.cols(), 10);
  for (size_t i = 0; i < kCanonicalFeatures.size(); ++i) {
    EXPECT_EQ(m.columns[i], kCanonicalFeatures[i]);
  }
  EXPECT_EQ(m.ColumnIndex("energy"), kEnergyColumn);
  EXPECT_TRUE(RaisesCode([&] { m.ColumnIndex("pressure"); },
                         ErrorCode::kLookup));
}

TEST(EngineerFeatures, SundayAfternoon) {
  const auto m = EngineerFeatures(HourlyRecords("2003-06-15T13:00", 1));
  EXPECT_EQ(m.values(0, m.ColumnIndex("hour")), 13);
  EXPECT_EQ(m.values(0, m.ColumnIndex("day_of_week")), 6);
  EXPECT_EQ(m.values(0, m.ColumnIndex("is_weekend")), 1);
  EXPECT_EQ(m.values(0, m.ColumnIndex("day_of_month")), 15);
  EXPECT_EQ(m.values(0, m.ColumnIndex("month")), 6);
}

TEST(EngineerFeatures, NewYearMidnight) {
  const auto m = EngineerFeatures(HourlyRecords("2021-01-01T00:00", 1));
  EXPECT_EQ(m.values(0, m.ColumnIndex("day_of_year")), 1);
  EXPECT_EQ(m.values(0, m.ColumnIndex("month")), 1);
  EXPECT_EQ(m.values(0, m.ColumnIndex("hour")), 0);
}

// Calendar fields against the C library's own broken-down time.
TEST(EngineerFeatures, MatchesLibcCalendar) {
  const auto records = HourlyRecords("1999-12-25T07:00", 24 * 800);
  const auto m = EngineerFeatures(records);
  for (int r = 0; r < m.rows(); r += 37) {
    const std::time_t t = std::chrono::system_clock::to_time_t(
        records[r].timestamp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    const int monday_first = (tm.tm_wday + 6) % 7;
    ASSERT_EQ(m.values(r, m.ColumnIndex("hour")), tm.tm_hour) << r;
    ASSERT_EQ(m.values(r, m.ColumnIndex("day_of_week")), monday_first) << r;
    ASSERT_EQ(m.values(r, m.ColumnIndex("day_of_month")), tm.tm_mday) << r;
    ASSERT_EQ(m.values(r, m.ColumnIndex("day_of_year")), tm.tm_yday + 1) << r;
    ASSERT_EQ(m.values(r, m.ColumnIndex("month")), tm.tm_mon + 1) << r;
    ASSERT_EQ(m.values(r, m.ColumnIndex("is_weekend")), monday_first >= 5)
        << r;
  }
}

TEST(EngineerFeatures, ConsecutiveHoursShareTheDay) {
  const auto m = EngineerFeatures(HourlyRecords("2023-05-10T10:00", 2));
  EXPECT_EQ(m.values(1, m.ColumnIndex("hour")) -
                m.values(0, m.ColumnIndex("hour")),
            1);
  for (const char* c : {"day_of_week", "day_of_month", "day_of_year", "month"}) {
    EXPECT_EQ(m.values(0, m.ColumnIndex(c)), m.values(1, m.ColumnIndex(c))) << c;
  }
}

TEST(EngineerFeatures, ImputesMissingWeather) {
  auto records = HourlyRecords("2023-01-01T00:00", 5);
  records[0].temperature.reset();
  records[2].temperature.reset();
  records[3].temperature.reset();
  const auto m = EngineerFeatures(records);
  const int c = m.ColumnIndex("temperature");
  EXPECT_DOUBLE_EQ(m.values(0, c), *records[1].temperature);  // back-fill
  EXPECT_DOUBLE_EQ(m.values(2, c), *records[1].temperature);  // forward-fill
  EXPECT_DOUBLE_EQ(m.values(3, c), *records[1].temperature);
  EXPECT_TRUE(m.values.allFinite());
}

TEST(EngineerFeatures, AllMissingColumn) {
  auto records = HourlyRecords("2023-01-01T00:00", 3);
  for (auto& r : records) r.humidity.reset();
  EXPECT_TRUE(RaisesCode([&] { EngineerFeatures(records); },
                         ErrorCode::kInput));
  const auto m = EngineerFeatures(
      records, {.mode = ImputationMode::kConstant, .constant = 55.0});
  EXPECT_DOUBLE_EQ(m.values(2, m.ColumnIndex("humidity")), 55.0);
}

TEST(EngineerFeatures, Deterministic) {
  const auto records = HourlyRecords("2023-01-01T00:00", 50);
  EXPECT_EQ(EngineerFeatures(records).values, EngineerFeatures(records).values);
}

TEST(Scaler, EndpointsAndMidpoint) {
  FeatureMatrix m;
  m.columns = {"x", "k"};
  m.values.resize(3, 2);
  m.values << 0, 7, 5, 7, 10, 7;
  const auto p = FitScaler(m);
  const auto s = ApplyScaler(m, p);
  EXPECT_DOUBLE_EQ(s.values(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.values(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(s.values(2, 0), 1.0);
  for (int r = 0; r < 3; ++r) EXPECT_EQ(s.values(r, 1), 0.0);
  EXPECT_DOUBLE_EQ(p.Scale(0, 12.0), 1.2);
}

TEST(Scaler, RoundTripWithinTolerance) {
  Rng rng(3);
  FeatureMatrix m;
  m.columns = {"a", "b", "c"};
  m.values = ::ctxshap::testing::RandomMatrix(200, 3, rng, 40.0);
  const auto p = FitScaler(m);
  const auto s = ApplyScaler(m, p);
  EXPECT_GE(s.values.minCoeff(), 0.0);
  EXPECT_LE(s.values.maxCoeff(), 1.0);
  const auto back = InvertScaler(s, p);
  EXPECT_LE((back.values - m.values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Scaler, UnfittedIsStateError) {
  const auto m = Ramp(3, 2);
  EXPECT_TRUE(RaisesCode([&] { ApplyScaler(m, ScalingParams{}); },
                         ErrorCode::kState));
}

TEST(Split, ExactDivision) {
  const auto s = ComputeSplitSizes(100, {});
  EXPECT_EQ(s.train, 80);
  EXPECT_EQ(s.validation, 10);
  EXPECT_EQ(s.test, 10);
}

TEST(Split, RemainderToTrain) {
  const auto s = ComputeSplitSizes(101, {});
  EXPECT_EQ(s.train, 81);
  EXPECT_EQ(s.validation, 10);
  EXPECT_EQ(s.test, 10);
}

TEST(Split, PartitionsInOrder) {
  for (int t : {100, 257, 999}) {
    const auto m = Ramp(t, 2);
    const auto s = ChronologicalSplit(m, {}, 3);
    EXPECT_EQ(s.train.rows() + s.validation.rows() + s.test.rows(), t);
    EXPECT_EQ(s.validation_begin, s.train.rows());
    EXPECT_EQ(s.test_begin, s.train.rows() + s.validation.rows());
    EXPECT_EQ(s.validation.values(0, 0), m.values(s.validation_begin, 0));
    EXPECT_EQ(s.test.values(s.test.rows() - 1, 0), m.values(t - 1, 0));
  }
}

TEST(Split, TooSmallForWindow) {
  const auto m = Ramp(10, 2);
  EXPECT_TRUE(RaisesCode([&] { ChronologicalSplit(m, {}, 48); },
                         ErrorCode::kSizing));
}

TEST(Windows, CountAndAlignment) {
  const auto m = Ramp(5, 3);
  const auto w = MakeWindows(m, 2, 1);
  EXPECT_EQ(w.size(), 3);
  EXPECT_EQ(w.inputs.cols(), 6);
  for (int n = 0; n < w.size(); ++n) {
    EXPECT_EQ(w.targets(n, 0), m.values(w.origin_indices[n] + 2, 0));
  }
}

TEST(Windows, ExactFit) {
  const auto w = MakeWindows(Ramp(7, 2), 4, 3);
  EXPECT_EQ(w.size(), 1);
  EXPECT_EQ(w.targets(0, 2), 6.0);
}

TEST(Windows, CountFormulaAndRoundTrip) {
  const auto m = Ramp(120, 4);
  const auto w = MakeWindows(m, 48, 24);
  EXPECT_EQ(w.size(), 120 - 48 - 24 + 1);
  for (int n = 0; n < w.size(); n += 7) {
    const RowMatrix win = Unflatten(w.inputs.row(n).transpose(), 48, 4);
    EXPECT_EQ(win, m.values.middleRows(w.origin_indices[n], 48));
    EXPECT_EQ(w.target_timestamps[n], m.timestamps[w.origin_indices[n] + 48]);
  }
}

TEST(Windows, BadParameters) {
  const auto m = Ramp(10, 2);
  EXPECT_TRUE(RaisesCode([&] { MakeWindows(m, 0, 1); }, ErrorCode::kParameter));
  EXPECT_TRUE(RaisesCode([&] { MakeWindows(m, 8, 3); }, ErrorCode::kSizing));
}

TEST(Flatten, RowMajor) {
  RowMatrix w(2, 2);
  w << 1, 2, 3, 4;
  const Vector v = FlattenWindow(w);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v[0], 1);
  EXPECT_EQ(v[1], 2);
  EXPECT_EQ(v[2], 3);
  EXPECT_EQ(v[3], 4);
}

TEST(Flatten, CanonicalWindowIs480Long) {
  Rng rng(8);
  const RowMatrix w = ::ctxshap::testing::RandomMatrix(48, 10, rng);
  const Vector v = FlattenWindow(w);
  EXPECT_EQ(v.size(), 480);
  EXPECT_EQ(Unflatten(v, 48, 10), w);
  EXPECT_EQ(FlattenWindow(Unflatten(v, 48, 10)), v);
  EXPECT_TRUE(RaisesCode([&] { Unflatten(v, 47, 10); }, ErrorCode::kShape));
}

TEST(Timestamp, ParseAndFormat) {
  EXPECT_EQ(FormatTimestamp(ParseTimestamp("2024-02-29T23:15")),
            "2024-02-29T23:15:00");
  EXPECT_EQ(ParseTimestamp("2024-02-29 23:15:00Z"),
            ParseTimestamp("2024-02-29T23:15"));
  EXPECT_TRUE(RaisesCode([] { ParseTimestamp("2024-13-01T00:00"); },
                         ErrorCode::kParse));
}

}  // namespace
}  // namespace ctxshap::dataset
