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

#ifndef JURYBT_CALIBRATION_H_
#define JURYBT_CALIBRATION_H_

// Temperature annealing of pairwise probabilities, expected calibration error
// against human scores, and the supervised temperature-then-BT baseline.

#include <map>
#include <string>
#include <vector>

#include "jurybt/core.h"
#include "jurybt/debias.h"
#include "jurybt/models.h"

namespace jurybt {

// p^(1/T) / (p^(1/T) + (1-p)^(1/T)), evaluated as logistic(logit(p) / T).
// Throws Error unless T > 0.
double Anneal(double p, double temperature);

// Keyed by "judge@aspect".
using TemperatureMap = std::map<std::string, double>;

struct EceBin {
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  int count = 0;
};

struct EceReport {
  int n_bins = 0;
  std::vector<EceBin> bins;
  int total = 0;
  // Pairs skipped because both items have the same human score.
  int excluded_ties = 0;
  double ece = 0.0;
};

// One scored prediction: confidence in [0.5, 1] and whether the favoured item
// really is better.
struct CalibrationSample {
  double confidence = 0.5;
  bool correct = false;
};

// Bins samples into `n_bins` equal-width bins on [0.5, 1].
EceReport ComputeEce(const std::vector<CalibrationSample>& samples, int n_bins);

// Samples for one judge on one aspect, pooled over contexts. The favoured
// item is the one with debiased probability above 0.5 (the lower-indexed item
// at exactly 0.5). Throws Error when a human score is missing.
std::vector<CalibrationSample> CalibrationSamples(const DebiasedPairSet& pairs,
                                                  int judge, int aspect,
                                                  const HumanScores& human,
                                                  int* excluded_ties = nullptr);

EceReport Ece(const DebiasedPairSet& pairs, int judge, int aspect,
              const HumanScores& human, int n_bins = 10);

// n values log-spaced on [min, max] inclusive.
std::vector<double> LogSpacedGrid(double min, double max, int n);

// Default search grid: 25 log-spaced temperatures on [0.1, 10].
std::vector<double> DefaultTemperatureGrid();

// For every (judge, aspect) with data, the grid temperature minimizing ECE of
// the annealed debiased probabilities. Ties go to the temperature closest to
// 1, then to the smaller one.
TemperatureMap FitTemperatures(const DebiasedPairSet& pairs,
                               const HumanScores& human,
                               const std::vector<double>& grid,
                               int n_bins = 10);

// Anneals each judge's debiased probabilities with its temperature. Throws
// Error when a (judge, aspect) key is missing.
DebiasedPairSet AnnealPairs(const DebiasedPairSet& pairs,
                            const TemperatureMap& temperatures);

// Supervised reference: anneal per judge and aspect, then fit jury soft BT.
FittedModel TempBt(const DebiasedPairSet& pairs,
                   const TemperatureMap& temperatures,
                   const FitOptions& options = {});

std::string TemperaturesToJson(const TemperatureMap& temperatures);
TemperatureMap TemperaturesFromJson(const std::string& text);

}  // namespace jurybt

#endif  // JURYBT_CALIBRATION_H_
