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

#include "jurybt/debias.h"

#include <algorithm>
#include <map>
#include <tuple>
#include <utility>

#include "json.hpp"

namespace jurybt {

std::string CoverageName(Coverage coverage) {
  switch (coverage) {
    case Coverage::kBoth:
      return "both";
    case Coverage::kFirstOnly:
      return "first_only";
    case Coverage::kSecondOnly:
      return "second_only";
  }
  return "unknown";
}

std::optional<double> PairGroup::Prob(int i, int j) const {
  const int lo = std::min(i, j);
  const int hi = std::max(i, j);
  auto it = std::lower_bound(pairs.begin(), pairs.end(), std::pair(lo, hi),
                             [](const DebiasedPair& p, std::pair<int, int> k) {
                               return std::pair(p.first, p.second) < k;
                             });
  if (it == pairs.end() || it->first != lo || it->second != hi) {
    return std::nullopt;
  }
  return i == lo ? it->prob_first : 1.0 - it->prob_first;
}

DebiasedPairSet::DebiasedPairSet(Catalog catalog, std::vector<PairGroup> groups)
    : catalog_(std::move(catalog)), groups_(std::move(groups)) {
  std::sort(groups_.begin(), groups_.end(),
            [](const PairGroup& a, const PairGroup& b) { return a.key < b.key; });
}

const PairGroup* DebiasedPairSet::Find(const GroupKey& key) const {
  auto it = std::lower_bound(
      groups_.begin(), groups_.end(), key,
      [](const PairGroup& g, const GroupKey& k) { return g.key < k; });
  if (it == groups_.end() || it->key != key) return nullptr;
  return &*it;
}

bool DebiasedPairSet::IsComplete(const PairGroup& group) const {
  const std::size_t n = catalog_.items[group.key.context].size();
  return group.pairs.size() == n * (n - 1) / 2;
}

DebiasedPairSet DebiasedPairSet::Transform(
    const std::function<double(const PairGroup&, double)>& fn) const {
  DebiasedPairSet out = *this;
  for (PairGroup& g : out.groups_) {
    for (DebiasedPair& p : g.pairs) p.prob_first = fn(g, p.prob_first);
  }
  return out;
}

DebiasedPairSet DebiasedPairSet::Filter(
    const std::function<bool(const PairGroup&)>& keep) const {
  DebiasedPairSet out;
  out.catalog_ = catalog_;
  for (const PairGroup& g : groups_) {
    if (keep(g)) out.groups_.push_back(g);
  }
  return out;
}

DebiasedPairSet Symmetrize(const Dataset& dataset) {
  std::vector<PairGroup> groups;
  for (const auto& [key, observations] : dataset.groups()) {
    // (lo, hi) -> observed p_lo,hi and p_hi,lo.
    std::map<std::pair<int, int>,
             std::pair<std::optional<double>, std::optional<double>>>
        orders;
    for (const OrderedObservation& o : observations) {
      if (o.first < o.second) {
        orders[{o.first, o.second}].first = o.prob_first_wins;
      } else {
        orders[{o.second, o.first}].second = o.prob_first_wins;
      }
    }
    PairGroup group{key, {}};
    group.pairs.reserve(orders.size());
    for (const auto& [pair, probs] : orders) {
      DebiasedPair d{pair.first, pair.second, 0.5, Coverage::kBoth};
      const auto& [forward, backward] = probs;
      if (forward && backward) {
        d.prob_first = 0.5 * (*forward + (1.0 - *backward));
      } else if (forward) {
        d.prob_first = *forward;
        d.coverage = Coverage::kFirstOnly;
      } else {
        d.prob_first = 1.0 - *backward;
        d.coverage = Coverage::kSecondOnly;
      }
      group.pairs.push_back(d);
    }
    groups.push_back(std::move(group));
  }
  return DebiasedPairSet(dataset.catalog(), std::move(groups));
}

std::vector<BinaryOutcome> Binarize(const DebiasedPairSet& pairs) {
  std::vector<BinaryOutcome> outcomes;
  for (const PairGroup& g : pairs.groups()) {
    for (const DebiasedPair& p : g.pairs) {
      if (p.prob_first >= 0.5) {
        outcomes.push_back({g.key, p.first, p.second});
      } else {
        outcomes.push_back({g.key, p.second, p.first});
      }
    }
  }
  return outcomes;
}

DebiasedPairSet BinarizedPairs(const DebiasedPairSet& pairs) {
  return pairs.Transform(
      [](const PairGroup&, double p) { return p >= 0.5 ? 1.0 : 0.0; });
}

DebiasedPairSet AverageAcrossJudges(const DebiasedPairSet& pairs,
                                    const std::string& jury_name) {
  // (context, aspect) -> (lo, hi) -> (sum, count)
  std::map<std::pair<int, int>,
           std::map<std::pair<int, int>, std::pair<double, int>>>
      sums;
  for (const PairGroup& g : pairs.groups()) {
    auto& block = sums[{g.key.context, g.key.aspect}];
    for (const DebiasedPair& p : g.pairs) {
      auto& [sum, count] = block[{p.first, p.second}];
      sum += p.prob_first;
      ++count;
    }
  }
  Catalog catalog = pairs.catalog();
  catalog.judges = {jury_name};
  std::vector<PairGroup> groups;
  for (const auto& [block_key, block] : sums) {
    PairGroup group{GroupKey{0, block_key.first, block_key.second}, {}};
    for (const auto& [pair, acc] : block) {
      group.pairs.push_back(DebiasedPair{pair.first, pair.second,
                                         acc.first / acc.second,
                                         Coverage::kBoth});
    }
    groups.push_back(std::move(group));
  }
  return DebiasedPairSet(std::move(catalog), std::move(groups));
}

void WriteDebiasedJsonl(const DebiasedPairSet& pairs, std::ostream& out) {
  const Catalog& c = pairs.catalog();
  for (const PairGroup& g : pairs.groups()) {
    for (const DebiasedPair& p : g.pairs) {
      nlohmann::ordered_json j;
      j["context"] = c.contexts[g.key.context];
      j["aspect"] = c.aspects[g.key.aspect];
      j["judge"] = c.judges[g.key.judge];
      j["item_i"] = c.items[g.key.context][p.first];
      j["item_j"] = c.items[g.key.context][p.second];
      j["prob_i_wins"] = p.prob_first;
      j["coverage"] = CoverageName(p.coverage);
      out << j.dump() << '\n';
    }
  }
}

}  // namespace jurybt
