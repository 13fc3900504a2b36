// Copyright 2026 The jurybt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "jurybt/cli.h"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace jurybt {
namespace {

namespace fs = std::filesystem;

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("jurybt_cli_" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(P("config.json")) << R"({"n_contexts": 6, "n_items": 6,
        "aspects": ["coh", "flu"], "sigmas": [0.5, 1.0, 2.0],
        "noise_std": 0.3, "human_noise": 0.5, "seed": 3})";
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  int Run(std::vector<std::string> args) {
    args.insert(args.begin(), "jurybt");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return RunCli(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  void Synth() {
    ASSERT_EQ(Run({"synth", "--config", P("config.json"), "--out", P("data.jsonl"),
                   "--truth", P("truth.json"), "--scores-out", P("human.jsonl")}),
              0)
        << err_.str();
  }

  fs::path dir_;
  std::stringstream out_, err_;
};

TEST_F(CliTest, FullPipeline) {
  Synth();
  ASSERT_EQ(Run({"ingest", "--data", P("data.jsonl"), "--scores", P("human.jsonl"),
                 "--out", P("summary.json")}),
            0)
      << err_.str();
  ASSERT_EQ(Run({"debias", "--data", P("data.jsonl"), "--dump", P("pairs.jsonl")}), 0)
      << err_.str();
  ASSERT_EQ(Run({"cycles", "--data", P("data.jsonl"), "--out", P("cycles.csv")}), 0)
      << err_.str();
  EXPECT_EQ(Slurp(P("cycles.csv")).rfind("judge,aspect,mean_cycle_rate,contexts\n", 0), 0u);
  for (const char* variant : {"soft-bt", "bt-sigma"}) {
    ASSERT_EQ(Run({"fit", "--data", P("data.jsonl"), "--variant", variant, "--out",
                   P(std::string(variant) + ".json")}),
              0)
        << err_.str();
  }
  ASSERT_EQ(Run({"calibrate", "--data", P("data.jsonl"), "--scores", P("human.jsonl"),
                 "--out", P("temps.json")}),
            0)
      << err_.str();
  ASSERT_EQ(Run({"eval", "--model", P("soft-bt.json"), "--model",
                 "sigma=" + P("bt-sigma.json"), "--data", P("data.jsonl"), "--temps",
                 P("temps.json"), "--scores", P("human.jsonl"), "--out",
                 P("report.json"), "--table", P("table.csv"), "--scatter",
                 P("scatter.csv")}),
            0)
      << err_.str();
  const auto report = nlohmann::json::parse(Slurp(P("report.json")));
  EXPECT_TRUE(report.at("methods").contains("sigma"));
  EXPECT_TRUE(report.contains("reliability"));
  EXPECT_TRUE(fs::exists(P("scatter.csv")));
  EXPECT_TRUE(fs::exists(P("scatter.coh.csv")));
  EXPECT_TRUE(fs::exists(P("table.csv")));

  const auto manifest = nlohmann::json::parse(Slurp(P("report.json.manifest.json")));
  for (const char* key : {"tool", "version", "command", "config", "inputs", "outputs",
                          "run_key", "wall_time_seconds"}) {
    EXPECT_TRUE(manifest.contains(key)) << key;
  }
  EXPECT_EQ(manifest.at("command"), "eval");
  EXPECT_EQ(manifest.at("inputs").size(), 5u);
}

TEST_F(CliTest, EmptyDatasetReportsJsonError) {
  std::ofstream(P("empty.jsonl")).close();
  EXPECT_EQ(Run({"fit", "--data", P("empty.jsonl"), "--out", P("m.json")}), 1);
  const auto error = nlohmann::json::parse(err_.str());
  EXPECT_EQ(error.at("error"), "empty dataset");
  EXPECT_EQ(error.at("command"), "fit");
  EXPECT_FALSE(fs::exists(P("m.json")));
}

TEST_F(CliTest, MissingInputAndBadArguments) {
  EXPECT_EQ(Run({"fit", "--data", P("absent.jsonl"), "--out", P("m.json")}), 1);
  EXPECT_NE(err_.str().find("input file not found"), std::string::npos);
  Synth();
  EXPECT_EQ(Run({"fit", "--data", P("data.jsonl"), "--variant", "nope", "--out",
                 P("m.json")}),
            2);
  EXPECT_EQ(Run({"fit", "--data", P("data.jsonl"), "--judges", "ghost", "--out",
                 P("m.json")}),
            1);
}

TEST_F(CliTest, RepeatedRunsAreByteIdenticalAndShareRunKey) {
  Synth();
  const std::string data_before = Slurp(P("data.jsonl"));
  std::string first_model, first_key;
  for (const char* workers : {"1", "3"}) {
    ASSERT_EQ(Run({"fit", "--data", P("data.jsonl"), "--variant", "bt-sigma-asp",
                   "--workers", workers, "--out", P("m.json")}),
              0)
        << err_.str();
    const std::string model = Slurp(P("m.json"));
    const std::string key =
        nlohmann::json::parse(Slurp(P("m.json.manifest.json"))).at("run_key");
    if (first_model.empty()) {
      first_model = model;
      first_key = key;
    } else {
      EXPECT_EQ(model, first_model);
      EXPECT_EQ(key, first_key);
    }
  }
  EXPECT_EQ(Slurp(P("data.jsonl")), data_before);
}

TEST_F(CliTest, RefusesToOverwriteAnInput) {
  Synth();
  const std::string before = Slurp(P("data.jsonl"));
  EXPECT_EQ(Run({"fit", "--data", P("data.jsonl"), "--out", P("data.jsonl")}), 1);
  EXPECT_EQ(Slurp(P("data.jsonl")), before);
}

TEST_F(CliTest, JudgeFilterChangesTheFit) {
  Synth();
  ASSERT_EQ(Run({"fit", "--data", P("data.jsonl"), "--variant", "bt-sigma",
                 "--exclude-judges", "judge2", "--out", P("m.json")}),
            0)
      << err_.str();
  const auto model = nlohmann::json::parse(Slurp(P("m.json")));
  EXPECT_FALSE(model.at("sigmas").dump().find("judge2") != std::string::npos);
}

TEST_F(CliTest, Sha256KnownAnswer) {
  EXPECT_EQ(Sha256Hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace jurybt
