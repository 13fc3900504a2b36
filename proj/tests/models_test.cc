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

#include "jurybt/models.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "jurybt/eval.h"
#include "jurybt/synth.h"
#include "test_util.h"

namespace jurybt {
namespace {

using testing::BtMatrix;
using testing::MatrixRecords;
using testing::PairsOf;
using testing::Rec;

// Cross-entropy at the matched optimum for p = 0.73, from a 40-digit
// evaluation.
constexpr double kCrossEntropy073 = 0.5832588401285969937685948015313465;
constexpr double kLogit073 = 0.9946225751440620549063731466709654;

DebiasedPairSet SmallJury(std::uint64_t seed, int judges = 3,
                          std::vector<std::string> aspects = {"x", "y"}) {
  SynthConfig config;
  config.n_contexts = 3;
  config.n_items = 5;
  config.aspects = std::move(aspects);
  config.sigmas.clear();
  for (int k = 0; k < judges; ++k) config.sigmas.push_back(0.5 + k);
  config.noise_std = 0.5;
  config.bias = {0.3};
  config.seed = seed;
  return Symmetrize(Generate(config).dataset);
}

std::vector<double> RandomPoint(const BtObjective& objective,
                                std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> theta(objective.num_parameters());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    theta[i] = i < objective.num_skills() ? 1.5 * normal(rng) : 0.5 * normal(rng);
  }
  return theta;
}

double Norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

std::vector<int> Ranking(const std::vector<double>& s) {
  std::vector<int> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return s[a] > s[b]; });
  return order;
}

TEST(LogisticTest, ReferenceValues) {
  EXPECT_EQ(Logistic(0.0), 0.5);
  EXPECT_NEAR(Logistic(50.0), 1.0, 1e-15);
  EXPECT_NEAR(Logistic(std::log(3.0)), 0.75, 1e-15);
  EXPECT_NEAR(Logistic(-800.0), 0.0, 1e-300);
  EXPECT_NEAR(Logit(0.75), std::log(3.0), 1e-15);
}

TEST(LogLikelihoodTest, SinglePairReferenceValues) {
  {
    const BtObjective obj(PairsOf({Rec("A", "B", 0.5), Rec("B", "A", 0.5)}),
                          Variant::kSoftBt);
    EXPECT_NEAR(obj.LogLikelihood(std::vector<double>{0.0, 0.0}), std::log(0.5),
                1e-15);
  }
  {
    const BtObjective obj(PairsOf({Rec("A", "B", 0.9), Rec("B", "A", 0.1)}),
                          Variant::kHardBt);
    EXPECT_NEAR(obj.LogLikelihood(std::vector<double>{0.3, 0.3}), std::log(0.5),
                1e-15);
  }
  {
    const BtObjective obj(PairsOf({Rec("A", "B", 0.73), Rec("B", "A", 0.27)}),
                          Variant::kSoftBt);
    const double gap = std::log(0.73 / 0.27);
    const long double p = 0.73L;
    const long double oracle = p * std::log(p) + (1 - p) * std::log(1 - p);
    const double ll = obj.LogLikelihood(std::vector<double>{gap / 2, -gap / 2});
    EXPECT_NEAR(ll, -kCrossEntropy073, 1e-14);
    EXPECT_NEAR(ll, static_cast<double>(oracle), 1e-14);
  }
}

TEST(LogLikelihoodTest, JuryLikelihoodSumsJudges) {
  const DebiasedPairSet two = PairsOf({Rec("A", "B", 0.8, "j1"), Rec("A", "B", 0.6, "j2")});
  const BtObjective obj(two, Variant::kSoftBt);
  const double d = 0.4;
  auto term = [&](double p) {
    const double q = 1.0 / (1.0 + std::exp(-d));
    return p * std::log(q) + (1 - p) * std::log(1 - q);
  };
  EXPECT_NEAR(obj.LogLikelihood(std::vector<double>{0.2, -0.2}),
              term(0.8) + term(0.6), 1e-14);
}

TEST(LogLikelihoodTest, ClampKeepsCertainLabelsFinite) {
  const BtObjective obj(PairsOf({Rec("A", "B", 1.0), Rec("B", "A", 0.0)}),
                        Variant::kSoftBt);
  const double ll = obj.LogLikelihood(std::vector<double>{-400.0, 400.0});
  EXPECT_TRUE(std::isfinite(ll));
  EXPECT_NEAR(ll, std::log(1e-12), 1e-6);
}

TEST(GradientTest, MatchesCentralDifferencesForEveryVariant) {
  std::mt19937_64 rng(99);
  const DebiasedPairSet pairs = SmallJury(4);
  for (Variant v : kAllVariants) {
    const BtObjective obj(pairs, v);
    for (int point = 0; point < 5; ++point) {
      std::vector<double> theta = RandomPoint(obj, rng);
      std::vector<double> analytic(theta.size()), numeric(theta.size());
      obj.Gradient(theta, analytic);
      const double h = 1e-5;
      for (std::size_t i = 0; i < theta.size(); ++i) {
        std::vector<double> up = theta, down = theta;
        up[i] += h;
        down[i] -= h;
        numeric[i] = (obj.LogLikelihood(up) - obj.LogLikelihood(down)) / (2 * h);
      }
      std::vector<double> diff(theta.size());
      for (std::size_t i = 0; i < theta.size(); ++i) diff[i] = analytic[i] - numeric[i];
      EXPECT_LE(Norm(diff) / std::max(Norm(analytic), 1e-12), 1e-5)
          << VariantName(v);
    }
  }
}

TEST(GradientTest, VanishesOnConsistentDataAtTrueSkills) {
  const std::vector<double> s = {0.9, -0.4, 0.1, -0.6};
  const BtObjective obj(PairsOf(MatrixRecords(BtMatrix(s))), Variant::kSoftBt);
  std::vector<double> grad(4);
  obj.Gradient(s, grad);
  for (double g : grad) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(GradientTest, SingleJudgeHasNoDiscriminators) {
  const BtObjective obj(PairsOf(MatrixRecords(BtMatrix({1, 0, -1}))),
                        Variant::kBtSigma);
  EXPECT_TRUE(obj.fell_back());
  EXPECT_EQ(obj.mode(), DiscriminatorMode::kFixedUnit);
  EXPECT_TRUE(obj.discriminator_keys().empty());
  EXPECT_EQ(obj.num_parameters(), 3u);
}

TEST(GradientTest, StructuredFormMatchesFlatForm) {
  const BtObjective obj(SmallJury(8), Variant::kBtSigmaAsp);
  std::mt19937_64 rng(1);
  const std::vector<double> theta = RandomPoint(obj, rng);
  const ModelParameters params = obj.Unflatten(theta);
  EXPECT_EQ(obj.Flatten(params), theta);
  EXPECT_EQ(obj.LogLikelihood(params), obj.LogLikelihood(theta));
  std::vector<double> grad(theta.size());
  obj.Gradient(theta, grad);
  EXPECT_EQ(obj.Flatten(obj.Gradient(params)), grad);
}

TEST(ObjectiveTest, LikelihoodChangeMatchesDifference) {
  const BtObjective obj(SmallJury(3), Variant::kBtSigma);
  std::mt19937_64 rng(5);
  const std::vector<double> a = RandomPoint(obj, rng);
  const std::vector<double> b = RandomPoint(obj, rng);
  EXPECT_NEAR(obj.LogLikelihoodChange(a, b),
              obj.LogLikelihood(b) - obj.LogLikelihood(a), 1e-9);
}

TEST(ObjectiveTest, NormalizePreservesLikelihoodAndCenters) {
  for (Variant v : {Variant::kBtSigma, Variant::kBtSigmaAsp}) {
    const BtObjective obj(SmallJury(3), v);
    std::mt19937_64 rng(6);
    std::vector<double> theta = RandomPoint(obj, rng);
    const double before = obj.LogLikelihood(theta);
    obj.Normalize(theta);
    EXPECT_NEAR(obj.LogLikelihood(theta), before, 1e-9);
    for (const auto& b : obj.blocks()) {
      double sum = 0.0;
      for (int i = 0; i < b.n_items; ++i) sum += theta[b.offset + i];
      EXPECT_NEAR(sum, 0.0, 1e-12);
    }
    const ModelParameters p = obj.Unflatten(theta);
    const double rho_sum =
        std::accumulate(p.log_sigmas.begin(), p.log_sigmas.end(), 0.0);
    EXPECT_NEAR(rho_sum, 0.0, 1e-12);
  }
}

TEST(ObjectiveTest, NewtonDirectionSolvesAgainstFiniteDifferenceHessian) {
  const DebiasedPairSet pairs = SmallJury(12);
  for (Variant v : {Variant::kSoftBt, Variant::kBtSigma, Variant::kBtSigmaAsp}) {
    const BtObjective obj(pairs, v);
    // Start near the optimum, where the negative Hessian is positive
    // definite on the constraint set.
    FitOptions options;
    options.max_iter = 3;
    const FittedModel rough = Fit(pairs, v, options);
    ModelParameters params = obj.ZeroParameters();
    for (std::size_t b = 0; b < obj.blocks().size(); ++b) {
      params.skills[b] = rough.blocks[b].skills;
    }
    for (std::size_t d = 0; d < obj.discriminator_keys().size(); ++d) {
      params.log_sigmas[d] = std::log(rough.sigmas.at(obj.discriminator_keys()[d]));
    }
    const std::vector<double> theta = obj.Flatten(params);
    std::vector<double> grad(theta.size()), dir(theta.size());
    obj.Gradient(theta, grad);
    ASSERT_TRUE(obj.NewtonDirection(theta, grad, dir, false)) << VariantName(v);
    // -H d by central differences of the gradient along d.
    const double h = 1e-6;
    std::vector<double> up(theta.size()), down(theta.size());
    std::vector<double> g_up(theta.size()), g_down(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      up[i] = theta[i] + h * dir[i];
      down[i] = theta[i] - h * dir[i];
    }
    obj.Gradient(up, g_up);
    obj.Gradient(down, g_down);
    std::vector<double> residual(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      residual[i] = -(g_up[i] - g_down[i]) / (2 * h) - grad[i];
    }
    EXPECT_LE(Norm(residual) / Norm(grad), 1e-4) << VariantName(v);
  }
}

TEST(FitTest, SinglePairGapIsLogit) {
  const FittedModel m =
      Fit(PairsOf({Rec("A", "B", 0.73), Rec("B", "A", 0.27)}), Variant::kSoftBt);
  ASSERT_TRUE(m.diagnostics.converged);
  const auto& s = m.blocks.at(0).skills;
  EXPECT_NEAR(s[0] - s[1], kLogit073, 1e-9);
  EXPECT_NEAR(s[0] - s[1], std::log(0.73L / 0.27L), 1e-9);
  EXPECT_EQ(m.sigmas.at("j"), 1.0);
}

TEST(FitTest, EmptyInputIsRejected) {
  EXPECT_THROW(Fit(DebiasedPairSet(), Variant::kSoftBt), Error);
}

TEST(FitTest, RecoversConsistentSkillsExactly) {
  const std::vector<double> s = {1.2, -0.3, 0.4, -1.3};
  const FittedModel m =
      Fit(PairsOf(MatrixRecords(BtMatrix(s))), Variant::kSoftBt);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(m.blocks[0].skills[i], s[i], 1e-9);
}

TEST(FitTest, JuryEqualsFitOnAveragedProbabilities) {
  SynthConfig config;
  config.n_contexts = 4;
  config.n_items = 8;
  config.sigmas = {0.5, 1.0, 1.5, 2.0, 3.0};
  config.noise_std = 0.3;
  config.seed = 21;
  const DebiasedPairSet pairs = Symmetrize(Generate(config).dataset);
  const FittedModel jury = Fit(pairs, Variant::kSoftBt);
  const FittedModel averaged = Fit(AverageAcrossJudges(pairs), Variant::kSoftBt);
  ASSERT_EQ(jury.blocks.size(), averaged.blocks.size());
  for (std::size_t b = 0; b < jury.blocks.size(); ++b) {
    for (std::size_t i = 0; i < jury.blocks[b].skills.size(); ++i) {
      EXPECT_NEAR(jury.blocks[b].skills[i], averaged.blocks[b].skills[i], 1e-6);
    }
  }
}

TEST(FitTest, RecoversDiscriminatorRatio) {
  SynthConfig config;
  config.n_contexts = 50;
  config.n_items = 16;
  config.sigmas = {0.5, 2.0};
  config.seed = 4;
  const FittedModel m = Fit(Generate(config).dataset, Variant::kBtSigma);
  ASSERT_TRUE(m.diagnostics.converged);
  const double ratio = m.sigmas.at("judge1") / m.sigmas.at("judge0");
  EXPECT_NEAR(ratio, 4.0, 0.4);
  EXPECT_NEAR(m.sigmas.at("judge0") * m.sigmas.at("judge1"), 1.0, 1e-9);
}

TEST(FitTest, TranslationAndScaleOfTruthDoNotChangeFit) {
  const std::vector<double> s = {0.7, -0.2, 0.5, -1.0, 0.0};
  std::vector<double> shifted = s, scaled = s;
  for (double& v : shifted) v += 3.0;
  for (double& v : scaled) v *= 2.5;
  std::vector<ComparisonRecord> base, moved, stretched;
  for (auto& r : MatrixRecords(BtMatrix(s, 0.5), "j1")) base.push_back(r);
  for (auto& r : MatrixRecords(BtMatrix(s, 2.0), "j2")) base.push_back(r);
  for (auto& r : MatrixRecords(BtMatrix(shifted, 0.5), "j1")) moved.push_back(r);
  for (auto& r : MatrixRecords(BtMatrix(shifted, 2.0), "j2")) moved.push_back(r);
  for (auto& r : MatrixRecords(BtMatrix(scaled, 0.5 * 2.5), "j1")) stretched.push_back(r);
  for (auto& r : MatrixRecords(BtMatrix(scaled, 2.0 * 2.5), "j2")) stretched.push_back(r);
  const FittedModel a = Fit(PairsOf(base), Variant::kBtSigma);
  const FittedModel b = Fit(PairsOf(moved), Variant::kBtSigma);
  const FittedModel c = Fit(PairsOf(stretched), Variant::kBtSigma);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(a.blocks[0].skills[i], b.blocks[0].skills[i], 1e-8);
    EXPECT_NEAR(a.blocks[0].skills[i], c.blocks[0].skills[i], 1e-8);
  }
  EXPECT_NEAR(a.sigmas.at("j1"), c.sigmas.at("j1"), 1e-8);
  EXPECT_NEAR(a.sigmas.at("j2") / a.sigmas.at("j1"), 4.0, 1e-7);
}

TEST(FitTest, HardAndSoftRankingsAgreeOnConsistentData) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> s(7);
    for (double& v : s) v = normal(rng);
    const DebiasedPairSet pairs = PairsOf(MatrixRecords(BtMatrix(s)));
    const FittedModel soft = Fit(pairs, Variant::kSoftBt);
    const FittedModel hard = Fit(pairs, Variant::kHardBt);
    EXPECT_EQ(Ranking(soft.blocks[0].skills), Ranking(s));
    EXPECT_EQ(Ranking(hard.blocks[0].skills), Ranking(s));
  }
}

TEST(FitTest, AcceptedIteratesNeverDecreaseLikelihood) {
  FitOptions options;
  options.record_trace = true;
  for (Variant v : kAllVariants) {
    const FittedModel m = Fit(SmallJury(13), v, options);
    ASSERT_GE(m.diagnostics.trace.size(), 2u);
    for (std::size_t i = 1; i < m.diagnostics.trace.size(); ++i) {
      EXPECT_GE(m.diagnostics.trace[i], m.diagnostics.trace[i - 1])
          << VariantName(v) << " step " << i;
    }
  }
}

TEST(FitTest, SingleJudgeSigmaFallsBackToSoftBt) {
  SynthConfig config;
  config.n_contexts = 5;
  config.n_items = 6;
  config.noise_std = 0.4;
  config.seed = 2;
  const Dataset ds = Generate(config).dataset;
  const FittedModel sigma = Fit(ds, Variant::kBtSigma);
  const FittedModel soft = Fit(ds, Variant::kSoftBt);
  EXPECT_EQ(sigma.mode, DiscriminatorMode::kFixedUnit);
  ASSERT_FALSE(sigma.diagnostics.warnings.empty());
  for (std::size_t b = 0; b < soft.blocks.size(); ++b) {
    EXPECT_EQ(Ranking(sigma.blocks[b].skills), Ranking(soft.blocks[b].skills));
  }
}

TEST(FitTest, ContextsDecoupleAtFixedDiscriminators) {
  const DebiasedPairSet pairs = SmallJury(17, 3, {"x"});
  const FittedModel joint = Fit(pairs, Variant::kBtSigma);
  FitOptions fixed;
  fixed.fixed_sigmas = joint.sigmas;
  for (int c = 0; c < static_cast<int>(pairs.catalog().contexts.size()); ++c) {
    const FittedModel alone = Fit(
        pairs.Filter([&](const PairGroup& g) { return g.key.context == c; }),
        Variant::kBtSigma, fixed);
    ASSERT_EQ(alone.blocks.size(), 1u);
    for (std::size_t i = 0; i < alone.blocks[0].skills.size(); ++i) {
      EXPECT_NEAR(alone.blocks[0].skills[i], joint.FindBlock(c, 0)->skills[i],
                  1e-7);
    }
    EXPECT_EQ(alone.sigmas, joint.sigmas);
  }
}

TEST(FitTest, MatchesGoldenSectionOracle) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int trial = 0; trial < 15; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    std::vector<std::vector<double>> raw(n, std::vector<double>(n, 0.5));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) raw[i][j] = u(rng);
      }
    }
    std::vector<std::vector<double>> debiased(n, std::vector<double>(n, 0.5));
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) debiased[i][j] = 0.5 * (raw[i][j] + 1.0 - raw[j][i]);
      }
    }
    const std::vector<double> oracle = OracleBtFit(debiased, Variant::kSoftBt);
    const FittedModel m = Fit(PairsOf(MatrixRecords(raw)), Variant::kSoftBt);
    for (int i = 0; i < n; ++i) {
      EXPECT_NEAR(m.blocks[0].skills[i], oracle[i], 1e-4);
    }
  }
}

TEST(FitTest, WorkerCountDoesNotChangeResult) {
  const DebiasedPairSet pairs = SmallJury(23, 4);
  FitOptions serial, parallel;
  parallel.workers = 3;
  const FittedModel a = Fit(pairs, Variant::kBtSigmaAsp, serial);
  const FittedModel b = Fit(pairs, Variant::kBtSigmaAsp, parallel);
  EXPECT_EQ(ModelToJson(a), ModelToJson(b));
}

TEST(FitTest, PerAspectDiscriminatorsAreCenteredPerAspect) {
  const FittedModel m = Fit(SmallJury(29), Variant::kBtSigmaAsp);
  EXPECT_EQ(m.mode, DiscriminatorMode::kPerJudgeAspect);
  for (const char* aspect : {"x", "y"}) {
    double sum = 0.0;
    for (const auto& judge : m.catalog.judges) {
      sum += std::log(*m.Sigma(judge, aspect));
    }
    EXPECT_NEAR(sum, 0.0, 1e-12);
  }
}

TEST(ModelJsonTest, RoundTripPreservesEverything) {
  const FittedModel m = Fit(SmallJury(19), Variant::kBtSigmaAsp);
  const std::string text = ModelToJson(m);
  const FittedModel back = ModelFromJson(text);
  EXPECT_EQ(ModelToJson(back), text);
  EXPECT_EQ(back.variant, Variant::kBtSigmaAsp);
  EXPECT_EQ(back.Skill("ctx1", "y", "item3"), m.Skill("ctx1", "y", "item3"));
  EXPECT_EQ(back.Sigma("judge2", "x"), m.Sigma("judge2", "x"));
}

TEST(ModelJsonTest, RejectsMalformedInput) {
  EXPECT_THROW(ModelFromJson("not json"), Error);
  EXPECT_THROW(ModelFromJson(R"({"variant":"nope","skills":{},"sigmas":{}})"), Error);
  EXPECT_THROW(ModelFromJson(R"({"variant":"soft-bt"})"), Error);
}

TEST(VariantTest, NamesRoundTrip) {
  for (Variant v : kAllVariants) EXPECT_EQ(ParseVariant(VariantName(v)), v);
  EXPECT_THROW(ParseVariant("bt"), Error);
  EXPECT_EQ(NominalMode(Variant::kHardBtSigma), DiscriminatorMode::kSharedPerJudge);
  EXPECT_TRUE(IsHardVariant(Variant::kHardBtSigma));
  EXPECT_FALSE(IsHardVariant(Variant::kBtSigmaAsp));
}

}  // namespace
}  // namespace jurybt
