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

#ifndef JURYBT_DEBIAS_H_
#define JURYBT_DEBIAS_H_

// Positional-bias removal by symmetrizing the two presentation orders of each
// pair, and binarization of the result for the hard-outcome models.

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "jurybt/core.h"

namespace jurybt {

// Which presentation orders of an unordered pair were observed.
enum class Coverage {
  kBoth,
  kFirstOnly,   // only (first, second) was observed
  kSecondOnly,  // only (second, first) was observed
};

std::string CoverageName(Coverage coverage);

// Debiased preference for an unordered pair, stored from the perspective of
// the lower-indexed item (`first` < `second`). The probability for the other
// perspective is 1 - prob_first, so commutativity holds by construction.
struct DebiasedPair {
  int first = 0;
  int second = 0;
  double prob_first = 0.5;
  Coverage coverage = Coverage::kBoth;
};

struct PairGroup {
  GroupKey key;
  std::vector<DebiasedPair> pairs;  // sorted by (first, second)

  // Probability that item `i` beats item `j` (either orientation), or nullopt
  // when the pair was not observed.
  std::optional<double> Prob(int i, int j) const;
};

// Debiased pairs for every (judge, context, aspect) group of a dataset.
class DebiasedPairSet {
 public:
  DebiasedPairSet() = default;
  DebiasedPairSet(Catalog catalog, std::vector<PairGroup> groups);

  const Catalog& catalog() const { return catalog_; }
  const std::vector<PairGroup>& groups() const { return groups_; }
  const PairGroup* Find(const GroupKey& key) const;

  // True when every unordered pair of the group's context is covered.
  bool IsComplete(const PairGroup& group) const;

  // Returns a copy with every probability replaced by fn(group, p).
  DebiasedPairSet Transform(
      const std::function<double(const PairGroup&, double)>& fn) const;

  // Keeps only the groups for which `keep` returns true.
  DebiasedPairSet Filter(
      const std::function<bool(const PairGroup&)>& keep) const;

 private:
  Catalog catalog_;
  std::vector<PairGroup> groups_;  // ascending key order
};

// p'_ij = (p_ij + 1 - p_ji) / 2 when both orders were observed; a one-sided
// observation passes through unchanged.
DebiasedPairSet Symmetrize(const Dataset& dataset);

struct BinaryOutcome {
  GroupKey key;
  int winner = 0;
  int loser = 0;
};

// Winner is the lower-indexed item when its debiased probability is >= 0.5.
std::vector<BinaryOutcome> Binarize(const DebiasedPairSet& pairs);

// The same pairs with each probability replaced by its 0/1 outcome.
DebiasedPairSet BinarizedPairs(const DebiasedPairSet& pairs);

// Averages debiased probabilities across judges for each (context, aspect)
// pair, producing a single pseudo-judge named `jury_name`. A pair covered by
// only some judges is averaged over those judges.
DebiasedPairSet AverageAcrossJudges(const DebiasedPairSet& pairs,
                                    const std::string& jury_name = "jury");

// Writes one JSON object per debiased pair (both orientations are implied).
void WriteDebiasedJsonl(const DebiasedPairSet& pairs, std::ostream& out);

}  // namespace jurybt

#endif  // JURYBT_DEBIAS_H_
