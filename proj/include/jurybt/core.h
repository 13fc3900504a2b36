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

#ifndef JURYBT_CORE_H_
#define JURYBT_CORE_H_

// Domain data model: pairwise comparison records from multiple judges and the
// validated, indexed dataset built from them.

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace jurybt {

// All library failures are reported with this exception type. The message is
// a single line suitable for machine parsing.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One ordered pairwise judgment: `judge` says `item_first` (presented first)
// beats `item_second` with probability `prob_first_wins`.
struct ComparisonRecord {
  std::string context;
  std::string aspect;
  std::string judge;
  std::string item_first;
  std::string item_second;
  double prob_first_wins = 0.5;

  friend bool operator==(const ComparisonRecord&,
                         const ComparisonRecord&) = default;
};

// Human reference scores keyed by (context, aspect, item).
class HumanScores {
 public:
  void Set(std::string_view context, std::string_view aspect,
           std::string_view item, double score);
  std::optional<double> Get(std::string_view context, std::string_view aspect,
                            std::string_view item) const;
  bool empty() const { return scores_.empty(); }
  std::size_t size() const { return scores_.size(); }

  using Key = std::tuple<std::string, std::string, std::string>;
  const std::map<Key, double>& entries() const { return scores_; }

 private:
  std::map<Key, double> scores_;
};

// Name tables assigning deterministic numeric indices (lexicographic order) to
// contexts, items within a context, judges and aspects.
struct Catalog {
  std::vector<std::string> contexts;
  std::vector<std::vector<std::string>> items;  // per context, sorted
  std::vector<std::string> judges;
  std::vector<std::string> aspects;

  std::optional<int> FindContext(std::string_view name) const;
  std::optional<int> FindItem(int context, std::string_view name) const;
  std::optional<int> FindJudge(std::string_view name) const;
  std::optional<int> FindAspect(std::string_view name) const;

  int ItemCount(int context) const {
    return static_cast<int>(items[context].size());
  }

  friend bool operator==(const Catalog&, const Catalog&) = default;
};

// Identifies one (judge, context, aspect) comparison group by index.
struct GroupKey {
  int judge = 0;
  int context = 0;
  int aspect = 0;

  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

// Ordered pair observation inside a group, with item indices local to the
// context.
struct OrderedObservation {
  int first = 0;
  int second = 0;
  double prob_first_wins = 0.5;

  friend bool operator==(const OrderedObservation&,
                         const OrderedObservation&) = default;
};

// Immutable, validated collection of comparison records.
//
// Records are stored in canonical order (judge, context, aspect, first item,
// second item) so that building from any permutation of the same records
// yields an identical dataset.
class Dataset {
 public:
  // Validates and indexes `records`. Throws Error on an empty input, an
  // out-of-range or non-finite probability, a self-comparison, or a duplicate
  // ordered pair within one (judge, context, aspect).
  static Dataset Build(std::vector<ComparisonRecord> records,
                       std::optional<HumanScores> human_scores = std::nullopt);

  const std::vector<ComparisonRecord>& records() const { return records_; }
  const Catalog& catalog() const { return catalog_; }
  const std::vector<std::string>& contexts() const { return catalog_.contexts; }
  const std::vector<std::string>& judges() const { return catalog_.judges; }
  const std::vector<std::string>& aspects() const { return catalog_.aspects; }
  const std::vector<std::string>& items(int context) const {
    return catalog_.items[context];
  }
  const std::optional<HumanScores>& human_scores() const {
    return human_scores_;
  }

  // Groups in ascending GroupKey order, each with its observations sorted by
  // (first, second).
  const std::map<GroupKey, std::vector<OrderedObservation>>& groups() const {
    return groups_;
  }

  // True when every one of the N(N-1) ordered pairs of the context is present
  // for the group.
  bool IsComplete(const GroupKey& key) const;
  bool IsComplete(std::string_view judge, std::string_view context,
                  std::string_view aspect) const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.records_ == b.records_ && a.catalog_ == b.catalog_;
  }

 private:
  std::vector<ComparisonRecord> records_;
  Catalog catalog_;
  std::map<GroupKey, std::vector<OrderedObservation>> groups_;
  std::optional<HumanScores> human_scores_;
};

// JSONL serialization of records and human scores.
std::vector<ComparisonRecord> ReadRecordsJsonl(std::istream& in);
std::vector<ComparisonRecord> ReadRecordsFile(const std::string& path);
void WriteRecordsJsonl(const std::vector<ComparisonRecord>& records,
                       std::ostream& out);
std::string RecordToJsonLine(const ComparisonRecord& record);

HumanScores ReadHumanScoresJsonl(std::istream& in);
HumanScores ReadHumanScoresFile(const std::string& path);
void WriteHumanScoresJsonl(const HumanScores& scores, std::ostream& out);

}  // namespace jurybt

#endif  // JURYBT_CORE_H_
