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

#ifndef JURYBT_SYNTH_H_
#define JURYBT_SYNTH_H_

// Synthetic juries with planted skills and discriminators, and brute-force
// reference implementations used to check the main code paths.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "jurybt/consistency.h"
#include "jurybt/core.h"
#include "jurybt/debias.h"
#include "jurybt/models.h"

namespace jurybt {

struct SynthConfig {
  int n_contexts = 50;
  int n_items = 16;
  std::vector<std::string> aspects = {"overall"};
  // One entry per judge.
  std::vector<double> sigmas = {1.0};
  // Std of the Gaussian noise added to every ordered-pair logit.
  double noise_std = 0.0;
  // Per-judge logit offset favouring the first-presented item. Empty means 0;
  // a single value applies to every judge.
  std::vector<double> bias;
  // Per-judge probability of reversing the skill margin of an unordered
  // pair (both orders). Same broadcasting as `bias`.
  std::vector<double> cycle_noise;
  // Scale of the standard Gumbel noise added to the planted skills to form
  // human scores; 0 makes human scores equal the planted skills.
  double human_noise = 0.0;
  std::uint64_t seed = 0;

  // Throws Error on invalid settings.
  void Validate() const;
  int num_judges() const { return static_cast<int>(sigmas.size()); }
  std::string JudgeName(int k) const;
  std::string ContextName(int c) const;
  std::string ItemName(int i) const;
};

struct SynthTruth {
  // (context, aspect) -> item -> planted mean-zero skill.
  std::map<std::pair<std::string, std::string>, std::map<std::string, double>>
      skills;
  std::map<std::string, double> sigmas;  // judge -> planted sigma
};

struct SynthResult {
  Dataset dataset;
  HumanScores human;
  SynthTruth truth;
};

// Deterministic in `config`. Each (context, aspect) draws from its own
// sub-seed, so contexts do not depend on one another.
SynthResult Generate(const SynthConfig& config);

SynthConfig SynthConfigFromJson(const std::string& text);
std::string SynthConfigToJson(const SynthConfig& config);
std::string TruthToJson(const SynthTruth& truth);

// Literal evaluation of both 3-cycle orientations over all i < j < k.
// Refuses matrices with more than 8 items.
std::int64_t OracleCycleCount(const AdjacencyMatrix& adj);

// Maximizes the single-context log-likelihood by cyclic golden-section
// search on each skill in turn; independent of the gradient code. Accepts
// `n` <= 6 items and a unit-discriminator variant (soft-bt or hard-bt).
// `prob[i][j]` holds the debiased probability that i beats j (i != j, only
// the i < j entries are read); NaN marks an unobserved pair. Returns
// mean-zero skills.
std::vector<double> OracleBtFit(const std::vector<std::vector<double>>& prob,
                                Variant variant);

// splitmix64 finalizer, used for seed derivation.
std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b);

}  // namespace jurybt

#endif  // JURYBT_SYNTH_H_
