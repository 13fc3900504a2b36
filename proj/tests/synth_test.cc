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

#include "jurybt/synth.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "test_util.h"

namespace jurybt {
namespace {

SynthConfig Small() {
  SynthConfig config;
  config.n_contexts = 3;
  config.n_items = 6;
  config.aspects = {"coh", "flu"};
  config.sigmas = {1.0, 2.0};
  config.noise_std = 0.3;
  config.seed = 77;
  return config;
}

std::string Serialized(const SynthResult& r) {
  std::stringstream out;
  WriteRecordsJsonl(r.dataset.records(), out);
  WriteHumanScoresJsonl(r.human, out);
  out << TruthToJson(r.truth);
  return out.str();
}

TEST(GenerateTest, SameSeedIsByteIdentical) {
  EXPECT_EQ(Serialized(Generate(Small())), Serialized(Generate(Small())));
  SynthConfig other = Small();
  other.seed = 78;
  EXPECT_NE(Serialized(Generate(Small())), Serialized(Generate(other)));
}

TEST(GenerateTest, ShapeAndNames) {
  const SynthResult r = Generate(Small());
  EXPECT_EQ(r.dataset.records().size(), 3u * 2 * 2 * 6 * 5);
  EXPECT_EQ(r.dataset.judges(), (std::vector<std::string>{"judge0", "judge1"}));
  EXPECT_EQ(r.dataset.contexts().front(), "ctx0");
  EXPECT_EQ(r.dataset.items(0).front(), "item0");
  for (const auto& [key, group] : r.dataset.groups()) {
    EXPECT_TRUE(r.dataset.IsComplete(key));
  }
  SynthConfig wide = Small();
  wide.n_items = 12;
  EXPECT_EQ(Generate(wide).dataset.items(0).front(), "item00");
}

TEST(GenerateTest, PlantedSkillsAreCenteredAndHumanScoresFollowThem) {
  const SynthResult r = Generate(Small());
  for (const auto& [key, skills] : r.truth.skills) {
    double sum = 0.0;
    for (const auto& [item, s] : skills) {
      sum += s;
      EXPECT_EQ(*r.human.Get(key.first, key.second, item), s);
    }
    EXPECT_NEAR(sum, 0.0, 1e-12);
  }
  EXPECT_EQ(r.truth.sigmas.at("judge1"), 2.0);
}

TEST(GenerateTest, NoiselessUnitJudgeFollowsBradleyTerry) {
  SynthConfig config = Small();
  config.sigmas = {1.0};
  config.noise_std = 0.0;
  const SynthResult r = Generate(config);
  for (const ComparisonRecord& rec : r.dataset.records()) {
    const auto& skills = r.truth.skills.at({rec.context, rec.aspect});
    const double expected =
        Logistic(skills.at(rec.item_first) - skills.at(rec.item_second));
    EXPECT_NEAR(rec.prob_first_wins, std::clamp(expected, 1e-6, 1.0 - 1e-6), 1e-15);
  }
}

TEST(GenerateTest, PositionBiasBreaksCommutativityUntilDebiased) {
  SynthConfig config = Small();
  config.sigmas = {1.0};
  config.noise_std = 0.0;
  config.bias = {0.5};
  const SynthResult r = Generate(config);
  std::map<std::tuple<std::string, std::string, std::string, std::string>, double> p;
  for (const ComparisonRecord& rec : r.dataset.records()) {
    p[{rec.context, rec.aspect, rec.item_first, rec.item_second}] = rec.prob_first_wins;
  }
  double max_gap = 0.0;
  for (const auto& [k, v] : p) {
    const auto& [c, a, i, j] = k;
    max_gap = std::max(max_gap, std::abs(v + p.at({c, a, j, i}) - 1.0));
  }
  EXPECT_GT(max_gap, 0.1);
  const DebiasedPairSet pairs = Symmetrize(r.dataset);
  for (const PairGroup& g : pairs.groups()) {
    for (const DebiasedPair& d : g.pairs) {
      EXPECT_EQ(*g.Prob(d.first, d.second) + *g.Prob(d.second, d.first), 1.0);
    }
  }
}

double JudgeCycleRate(const SynthConfig& config) {
  const ConsistencyReport report = AnalyzeConsistency(Symmetrize(Generate(config).dataset));
  return report.averages.begin()->second.mean_cycle_rate;
}

TEST(GenerateTest, CycleNoiseRaisesCycleRate) {
  SynthConfig config;
  config.n_contexts = 10;
  config.n_items = 10;
  config.sigmas = {1.0};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    config.seed = seed;
    config.cycle_noise = {0.0};
    const double clean = JudgeCycleRate(config);
    config.cycle_noise = {0.3};
    const double noisy = JudgeCycleRate(config);
    EXPECT_EQ(clean, 0.0) << seed;
    EXPECT_GT(noisy, clean) << seed;
  }
}

TEST(GenerateTest, HumanNoiseIsGumbel) {
  SynthConfig config;
  config.n_contexts = 400;
  config.n_items = 10;
  config.human_noise = 1.0;
  const SynthResult r = Generate(config);
  double sum = 0.0, sum2 = 0.0, n = 0.0;
  for (const auto& [key, skills] : r.truth.skills) {
    for (const auto& [item, s] : skills) {
      const double e = *r.human.Get(key.first, key.second, item) - s;
      sum += e;
      sum2 += e * e;
      n += 1.0;
    }
  }
  const double mean = sum / n, var = sum2 / n - mean * mean;
  // Standard Gumbel: mean is the Euler-Mascheroni constant, variance pi^2/6.
  EXPECT_NEAR(mean, 0.5772156649, 0.05);
  EXPECT_NEAR(var, M_PI * M_PI / 6.0, 0.15);
}

TEST(SynthConfigTest, ValidationErrors) {
  auto invalid = [](auto mutate) {
    SynthConfig c = Small();
    mutate(c);
    EXPECT_THROW(c.Validate(), Error);
  };
  invalid([](SynthConfig& c) { c.sigmas = {}; });
  invalid([](SynthConfig& c) { c.sigmas = {1.0, -1.0}; });
  invalid([](SynthConfig& c) { c.bias = {0.1, 0.2, 0.3}; });
  invalid([](SynthConfig& c) { c.cycle_noise = {1.5}; });
  invalid([](SynthConfig& c) { c.noise_std = -0.1; });
  invalid([](SynthConfig& c) { c.n_items = 1; });
  invalid([](SynthConfig& c) { c.n_contexts = 0; });
  invalid([](SynthConfig& c) { c.aspects = {}; });
  EXPECT_NO_THROW(Small().Validate());
}

TEST(SynthConfigTest, JsonRoundTrip) {
  SynthConfig c = Small();
  c.bias = {0.1, 0.2};
  c.cycle_noise = {0.05};
  c.human_noise = 0.7;
  const SynthConfig again = SynthConfigFromJson(SynthConfigToJson(c));
  EXPECT_EQ(SynthConfigToJson(again), SynthConfigToJson(c));
  EXPECT_EQ(SynthConfigFromJson(R"({"bias": 0.25})").bias, std::vector<double>{0.25});
  EXPECT_THROW(SynthConfigFromJson("[]"), Error);
  EXPECT_THROW(SynthConfigFromJson("{"), Error);
}

TEST(MixSeedTest, DistinctInputsGiveDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 20; ++a) {
    for (std::uint64_t b = 0; b < 20; ++b) seen.insert(MixSeed(a, b));
  }
  EXPECT_EQ(seen.size(), 400u);
}

TEST(OracleTest, CycleCountExamples) {
  AdjacencyMatrix rps(3);
  rps.Set(0, 1, true);
  rps.Set(1, 2, true);
  rps.Set(2, 0, true);
  EXPECT_EQ(OracleCycleCount(rps), 1);
  AdjacencyMatrix order(5);
  for (int i = 0; i < 5; ++i) {
    for (int j = i + 1; j < 5; ++j) order.Set(i, j, true);
  }
  EXPECT_EQ(OracleCycleCount(order), 0);
}

TEST(OracleTest, BtFitReferenceValues) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> one =
      OracleBtFit({{nan, 0.73}, {0.27, nan}}, Variant::kSoftBt);
  // Logit of 0.73, split symmetrically.
  EXPECT_NEAR(one[0] - one[1], std::log(0.73 / 0.27), 1e-6);
  EXPECT_NEAR(one[0] + one[1], 0.0, 1e-12);
  const std::vector<double> flat = OracleBtFit(
      {{nan, 0.5, 0.5}, {0.5, nan, 0.5}, {0.5, 0.5, nan}}, Variant::kSoftBt);
  for (double v : flat) EXPECT_NEAR(v, 0.0, 1e-6);
  EXPECT_THROW(OracleBtFit(std::vector<std::vector<double>>(7, std::vector<double>(7, 0.5)),
                           Variant::kSoftBt),
               Error);
  EXPECT_THROW(OracleBtFit({{nan, 0.5}, {0.5, nan}}, Variant::kBtSigma), Error);
}

}  // namespace
}  // namespace jurybt
