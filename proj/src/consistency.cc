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

#include "jurybt/consistency.h"

#include <bit>
#include <cstdint>
#include <string>

namespace jurybt {
namespace {

using Bits = std::vector<std::uint64_t>;

std::int64_t Choose3(std::int64_t n) { return n * (n - 1) * (n - 2) / 6; }

ConsistencyReport Analyze(const DebiasedPairSet& pairs) {
  ConsistencyReport report;
  std::map<std::pair<int, int>, double> sums;
  for (const PairGroup& g : pairs.groups()) {
    if (!pairs.IsComplete(g) || pairs.catalog().ItemCount(g.key.context) < 3) {
      report.skipped.push_back(g.key);
      continue;
    }
    CycleStats stats = CycleRate(Adjacency(pairs, g));
    report.entries.push_back({g.key, stats});
    auto key = std::pair(g.key.judge, g.key.aspect);
    sums[key] += stats.cycle_rate;
    ++report.averages[key].contexts;
  }
  for (auto& [key, avg] : report.averages) {
    avg.mean_cycle_rate = sums[key] / avg.contexts;
  }
  return report;
}

}  // namespace

AdjacencyMatrix Adjacency(const DebiasedPairSet& pairs,
                          const PairGroup& group) {
  const int n = pairs.catalog().ItemCount(group.key.context);
  if (!pairs.IsComplete(group)) {
    const auto& names = pairs.catalog().items[group.key.context];
    std::string missing;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (group.Prob(i, j)) continue;
        if (!missing.empty()) missing += ",";
        missing += names[i] + "|" + names[j];
      }
    }
    throw Error("incomplete pair coverage for judge=" +
                pairs.catalog().judges[group.key.judge] +
                " context=" + pairs.catalog().contexts[group.key.context] +
                " aspect=" + pairs.catalog().aspects[group.key.aspect] +
                "; missing pairs: " + missing);
  }
  AdjacencyMatrix adj(n);
  for (const DebiasedPair& p : group.pairs) {
    adj.Set(p.first, p.second, p.prob_first > 0.5);
    adj.Set(p.second, p.first, 1.0 - p.prob_first > 0.5);
  }
  return adj;
}

AdjacencyMatrix Adjacency(const DebiasedPairSet& pairs, const GroupKey& key) {
  const PairGroup* group = pairs.Find(key);
  if (group == nullptr) throw Error("no comparisons for the requested group");
  return Adjacency(pairs, *group);
}

std::int64_t CountCycles(const AdjacencyMatrix& adj) {
  // Each directed 3-cycle i->j->k->i appears once per starting vertex in
  // trace(A^3), so the count is that trace divided by three. Rows and
  // columns are packed into bitsets so the inner step is a popcount.
  const int n = adj.size();
  const int words = (n + 63) / 64;
  std::vector<Bits> out(n, Bits(words, 0)), in(n, Bits(words, 0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || !adj(i, j)) continue;
      out[i][j / 64] |= std::uint64_t{1} << (j % 64);
      in[j][i / 64] |= std::uint64_t{1} << (i % 64);
    }
  }
  std::int64_t closed_walks = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || !adj(i, j)) continue;
      for (int w = 0; w < words; ++w) {
        closed_walks += std::popcount(out[j][w] & in[i][w]);
      }
    }
  }
  return closed_walks / 3;
}

CycleStats CycleRate(const AdjacencyMatrix& adj) {
  if (adj.size() < 3) throw Error("cycle rate undefined below 3 items");
  CycleStats stats;
  stats.n_cycles = CountCycles(adj);
  stats.n_triples = Choose3(adj.size());
  stats.cycle_rate =
      static_cast<double>(stats.n_cycles) / static_cast<double>(stats.n_triples);
  return stats;
}

ConsistencyReport AnalyzeConsistency(const DebiasedPairSet& pairs) {
  return Analyze(pairs);
}

ConsistencyReport AnalyzeJuryConsistency(const DebiasedPairSet& pairs) {
  return Analyze(AverageAcrossJudges(pairs));
}

void WriteCycleCsv(const ConsistencyReport& report, const Catalog& catalog,
                   std::ostream& out) {
  out << "judge,aspect,mean_cycle_rate,contexts\n";
  char buf[64];
  for (const auto& [key, avg] : report.averages) {
    std::snprintf(buf, sizeof(buf), "%.10g", avg.mean_cycle_rate);
    out << catalog.judges[key.first] << ',' << catalog.aspects[key.second]
        << ',' << buf << ',' << avg.contexts << '\n';
  }
}

}  // namespace jurybt
