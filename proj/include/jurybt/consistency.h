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

#ifndef JURYBT_CONSISTENCY_H_
#define JURYBT_CONSISTENCY_H_

// Transitivity diagnostics: directed 3-cycle counts over thresholded debiased
// preferences.

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "jurybt/debias.h"

namespace jurybt {

// n x n 0/1 matrix with A(i, j) = 1 meaning "i is preferred to j".
class AdjacencyMatrix {
 public:
  explicit AdjacencyMatrix(int n) : n_(n), entries_(n * n, 0) {}

  int size() const { return n_; }
  bool operator()(int i, int j) const { return entries_[i * n_ + j] != 0; }
  void Set(int i, int j, bool edge) { entries_[i * n_ + j] = edge ? 1 : 0; }

 private:
  int n_;
  std::vector<std::uint8_t> entries_;
};

// A(i, j) = 1 iff p'_ij > 0.5. Throws Error naming the missing pairs when the
// group does not cover every unordered pair of its context.
AdjacencyMatrix Adjacency(const DebiasedPairSet& pairs, const PairGroup& group);
AdjacencyMatrix Adjacency(const DebiasedPairSet& pairs, const GroupKey& key);

struct CycleStats {
  std::int64_t n_cycles = 0;
  std::int64_t n_triples = 0;
  double cycle_rate = 0.0;
};

// Number of directed 3-cycles, counting both orientations of every triple.
std::int64_t CountCycles(const AdjacencyMatrix& adj);

// Throws Error when the matrix has fewer than 3 items.
CycleStats CycleRate(const AdjacencyMatrix& adj);

struct ConsistencyEntry {
  GroupKey key;
  CycleStats stats;
};

struct JudgeAspectRate {
  double mean_cycle_rate = 0.0;
  int contexts = 0;
};

struct ConsistencyReport {
  std::vector<ConsistencyEntry> entries;
  // (judge, aspect) -> average over contexts.
  std::map<std::pair<int, int>, JudgeAspectRate> averages;
  // Groups skipped because of incomplete coverage or fewer than 3 items.
  std::vector<GroupKey> skipped;
};

// Cycle statistics for every complete group with at least 3 items.
ConsistencyReport AnalyzeConsistency(const DebiasedPairSet& pairs);

// Same analysis on judge-averaged debiased probabilities.
ConsistencyReport AnalyzeJuryConsistency(const DebiasedPairSet& pairs);

// CSV with header `judge,aspect,mean_cycle_rate,contexts`.
void WriteCycleCsv(const ConsistencyReport& report, const Catalog& catalog,
                   std::ostream& out);

}  // namespace jurybt

#endif  // JURYBT_CONSISTENCY_H_
