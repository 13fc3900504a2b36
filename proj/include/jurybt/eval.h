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

#ifndef JURYBT_EVAL_H_
#define JURYBT_EVAL_H_

// Rank-correlation evaluation of predicted item scores against human scores,
// the average-win-probability baseline, and judge-reliability analyses
// relating learned discriminators to per-judge performance and consistency.

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jurybt/core.h"
#include "jurybt/debias.h"
#include "jurybt/models.h"

namespace jurybt {

// Predicted scores per (context, aspect), keyed by names.
class ScoreTable {
 public:
  using Key = std::pair<std::string, std::string>;  // (context, aspect)

  void Set(const std::string& context, const std::string& aspect,
           const std::string& item, double score);
  const std::map<Key, std::map<std::string, double>>& entries() const {
    return scores_;
  }
  const std::map<std::string, double>* Find(const std::string& context,
                                            const std::string& aspect) const;

  // Skills of a fitted model.
  static ScoreTable FromModel(const FittedModel& model);

 private:
  std::map<Key, std::map<std::string, double>> scores_;
};

// Mean debiased win probability of each item against all others. With
// `judge` unset the probabilities are first averaged across judges. Throws
// Error naming the context when a pair is missing.
ScoreTable AvgProbScores(const DebiasedPairSet& pairs,
                         std::optional<std::string> judge = std::nullopt);

// Fractional (average) ranks, 1-based.
std::vector<double> FractionalRanks(std::span<const double> values);

// Both return nullopt when either input is constant. Throws Error on length
// mismatch or fewer than two points.
std::optional<double> Pearson(std::span<const double> x,
                              std::span<const double> y);
std::optional<double> Spearman(std::span<const double> x,
                               std::span<const double> y);

struct AspectResult {
  double mean_src = 0.0;
  int contexts = 0;
  // Contexts whose correlation is undefined (constant scores).
  int excluded = 0;
  // SRC per context, in context order.
  std::map<std::string, double> per_context;
};

struct EvalReport {
  std::map<std::string, AspectResult> aspects;
  // Mean over aspects with at least one defined context.
  std::optional<double> all;
};

// Per-context SRC against human scores, averaged within each aspect. Throws
// Error when a scored item lacks a human score.
EvalReport Evaluate(const ScoreTable& scores, const HumanScores& human,
                    const std::vector<std::string>& aspects);

struct Correlation {
  std::optional<double> pcc;
  std::optional<double> src;
};

struct JudgeReliability {
  std::string judge;
  double inv_sigma = 0.0;
  std::optional<double> avg_prob_src;
  std::optional<double> one_minus_cycle_rate;
};

// One scope of the reliability analysis: a single aspect or "ALL".
struct ReliabilityScope {
  std::vector<JudgeReliability> judges;
  Correlation sigma_vs_performance;  // 1/sigma against Avg-Prob SRC
  Correlation sigma_vs_consistency;  // 1/sigma against 1 - CycleRate
};

struct ReliabilityReport {
  std::map<std::string, ReliabilityScope> scopes;  // aspect name or "ALL"
};

// Relates each judge's learned 1/sigma to its single-judge Avg-Prob SRC and
// mean (1 - CycleRate). Correlations are missing with fewer than 3 judges.
// Throws Error when the model has fixed unit discriminators.
ReliabilityReport ComputeReliability(const FittedModel& model,
                                     const DebiasedPairSet& pairs,
                                     const HumanScores& human);

std::string EvalReportToJson(const EvalReport& report);
std::string ReliabilityToJson(const ReliabilityReport& report);

// Rows are methods, columns the aspects followed by ALL.
void WriteMethodTableCsv(
    const std::vector<std::pair<std::string, EvalReport>>& rows,
    std::ostream& out);
void WriteMethodTableText(
    const std::vector<std::pair<std::string, EvalReport>>& rows,
    std::ostream& out);

// Scatter data `judge,inv_sigma,avg_prob_src,one_minus_cycle_rate` for one
// scope.
void WriteScatterCsv(const ReliabilityScope& scope, std::ostream& out);

}  // namespace jurybt

#endif  // JURYBT_EVAL_H_
