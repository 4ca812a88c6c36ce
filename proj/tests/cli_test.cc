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

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gtest/gtest.h"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int exit_code = -1;
  std::string output;
};

Result RunCli(const std::string& args) {
  const std::string cmd = std::string(CTXSHAP_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  while (size_t n = fread(buf, 1, sizeof buf, pipe)) r.output.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// One small trained workspace shared by every test.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(fs::temp_directory_path() / "ctxshap_cli_test");
    fs::remove_all(*root_);
    fs::create_directories(*root_);
    const auto synth = RunCli("synth --out " + Dir("data") +
                           " --hours 2160 --anomalies 6 --seed 3");
    ASSERT_EQ(synth.exit_code, 0) << synth.output;
    const auto train = RunCli("train --data " + Csv() + " --out " + Dir("model") +
                           " --window 24 --horizon 6");
    ASSERT_EQ(train.exit_code, 0) << train.output;
    const auto detect =
        RunCli("detect --model " + Model() + " --data " + Csv() + " --out " +
            Dir("detect"));
    ASSERT_EQ(detect.exit_code, 0) << detect.output;
  }

  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
  }

  static std::string Dir(const std::string& name) {
    return (*root_ / name).string();
  }
  static std::string Csv() { return Dir("data") + "/data.csv"; }
  static std::string Model() { return Dir("model") + "/model.json"; }

  // Window indices of detected anomalies, from anomalies.jsonl.
  static std::vector<int> Anomalies() {
    std::ifstream in(*root_ / "detect" / "anomalies.jsonl");
    std::vector<int> out;
    for (std::string line; std::getline(in, line);) {
      const auto j = json::parse(line);
      if (j.contains("window_index")) out.push_back(j["window_index"]);
    }
    return out;
  }

  static fs::path* root_;
};

fs::path* CliTest::root_ = nullptr;

TEST_F(CliTest, SynthWritesExpectedFilesDeterministically) {
  for (const char* f : {"data.csv", "ground_truth.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(*root_ / "data" / f)) << f;
  }
  const auto again = RunCli("synth --out " + Dir("data2") +
                         " --hours 2160 --anomalies 6 --seed 3");
  ASSERT_EQ(again.exit_code, 0) << again.output;
  EXPECT_EQ(Slurp(*root_ / "data" / "data.csv"),
            Slurp(*root_ / "data2" / "data.csv"));
  const auto truth = json::parse(Slurp(*root_ / "data" / "ground_truth.json"));
  EXPECT_FALSE(truth.empty());
}

TEST_F(CliTest, TrainWritesArtifacts) {
  for (const char* f : {"model.json", "preprocess.json", "metrics.json",
                        "importance.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(*root_ / "model" / f)) << f;
  }
  const auto model = json::parse(Slurp(*root_ / "model" / "model.json"));
  EXPECT_EQ(model["kind"], "ridge");
}

TEST_F(CliTest, DetectFindsInjectedAnomalies) {
  EXPECT_FALSE(Anomalies().empty());
  std::ifstream in(*root_ / "detect" / "anomalies.jsonl");
  std::string line, last;
  while (std::getline(in, line)) last = line;
  const auto summary = json::parse(last);
  ASSERT_TRUE(summary.contains("summary"));
  EXPECT_EQ(summary["summary"]["anomalous"], Anomalies().size());
}

TEST_F(CliTest, ExplainIsDeterministic) {
  const auto ids = Anomalies();
  ASSERT_FALSE(ids.empty());
  const std::string base = "explain --model " + Model() + " --data " + Csv() +
                           " --anomaly " + std::to_string(ids[0]) +
                           " --k 20 --samples 1024 --seed 4 --out ";
  const auto a = RunCli(base + Dir("explain_a"));
  ASSERT_EQ(a.exit_code, 0) << a.output;
  const auto b = RunCli(base + Dir("explain_b") + " --workers 2");
  ASSERT_EQ(b.exit_code, 0) << b.output;
  for (const char* f : {"attribution.json", "background.json", "heatmap.csv",
                        "heatmap.json"}) {
    EXPECT_EQ(Slurp(*root_ / "explain_a" / f), Slurp(*root_ / "explain_b" / f))
        << f;
  }
  const auto bg = json::parse(Slurp(*root_ / "explain_a" / "background.json"));
  EXPECT_EQ(bg["indices"].size(), 20u);
}

TEST_F(CliTest, RandomSelectionRuns) {
  const auto ids = Anomalies();
  ASSERT_FALSE(ids.empty());
  const auto r = RunCli("explain --model " + Model() + " --data " + Csv() +
                     " --anomaly " + std::to_string(ids.back()) +
                     " --k 10 --samples 8 --method permutation"
                     " --selection random --out " + Dir("explain_r"));
  EXPECT_EQ(r.exit_code, 0) << r.output;
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(RunCli("train --out " + Dir("x")).exit_code, 2);
  EXPECT_EQ(RunCli("explain --model " + Model()).exit_code, 2);
  EXPECT_EQ(RunCli("no-such-command").exit_code, 2);
}

TEST_F(CliTest, UnknownAnomalyIsALookupError) {
  const auto r = RunCli("explain --model " + Model() + " --data " + Csv() +
                     " --anomaly 999999 --out " + Dir("explain_x"));
  EXPECT_EQ(r.exit_code, 3) << r.output;
  EXPECT_NE(r.output.find("not a detected anomaly"), std::string::npos);
}

TEST_F(CliTest, ExactOverBudget) {
  const auto ids = Anomalies();
  ASSERT_FALSE(ids.empty());
  const auto r = RunCli("explain --model " + Model() + " --data " + Csv() +
                     " --anomaly " + std::to_string(ids[0]) +
                     " --method exact --out " + Dir("explain_e"));
  EXPECT_EQ(r.exit_code, 4) << r.output;
}

TEST_F(CliTest, MissingInputFileIsAUsageError) {
  const auto r = RunCli("train --data " + Dir("nope.csv") + " --out " + Dir("y"));
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("nope.csv"), std::string::npos);
}

TEST_F(CliTest, UnderdeterminedKernelIsNumerical) {
  const auto ids = Anomalies();
  ASSERT_FALSE(ids.empty());
  const auto r = RunCli("explain --model " + Model() + " --data " + Csv() +
                        " --anomaly " + std::to_string(ids[0]) +
                        " --samples 64 --out " + Dir("explain_n"));
  EXPECT_EQ(r.exit_code, 4) << r.output;
}

}  // namespace
