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

#include "jurybt/core.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace jurybt {
namespace {

std::optional<int> FindSorted(const std::vector<std::string>& names,
                              std::string_view name) {
  auto it = std::lower_bound(names.begin(), names.end(), name);
  if (it == names.end() || *it != name) return std::nullopt;
  return static_cast<int>(it - names.begin());
}

std::string DescribeKey(const ComparisonRecord& r) {
  return "judge=" + r.judge + " context=" + r.context + " aspect=" + r.aspect +
         " item_first=" + r.item_first + " item_second=" + r.item_second;
}

bool RecordLess(const ComparisonRecord& a, const ComparisonRecord& b) {
  return std::tie(a.judge, a.context, a.aspect, a.item_first, a.item_second) <
         std::tie(b.judge, b.context, b.aspect, b.item_first, b.item_second);
}

bool SameKey(const ComparisonRecord& a, const ComparisonRecord& b) {
  return std::tie(a.judge, a.context, a.aspect, a.item_first, a.item_second) ==
         std::tie(b.judge, b.context, b.aspect, b.item_first, b.item_second);
}

std::string RequireString(const nlohmann::json& j, const char* field,
                          std::size_t line) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string()) {
    throw Error("line " + std::to_string(line) + ": missing string field \"" +
                field + "\"");
  }
  return it->get<std::string>();
}

double RequireNumber(const nlohmann::json& j, const char* field,
                     std::size_t line) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_number()) {
    throw Error("line " + std::to_string(line) + ": missing numeric field \"" +
                field + "\"");
  }
  return it->get<double>();
}

template <typename Fn>
void ForEachJsonLine(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error("line " + std::to_string(line_no) + ": invalid JSON");
    }
    if (!j.is_object()) {
      throw Error("line " + std::to_string(line_no) + ": expected an object");
    }
    fn(j, line_no);
  }
}

std::ifstream OpenInput(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace

void HumanScores::Set(std::string_view context, std::string_view aspect,
                      std::string_view item, double score) {
  if (!std::isfinite(score)) {
    throw Error("non-finite human score for item " + std::string(item));
  }
  scores_[Key(context, aspect, item)] = score;
}

std::optional<double> HumanScores::Get(std::string_view context,
                                       std::string_view aspect,
                                       std::string_view item) const {
  auto it = scores_.find(Key(context, aspect, item));
  if (it == scores_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> Catalog::FindContext(std::string_view name) const {
  return FindSorted(contexts, name);
}

std::optional<int> Catalog::FindItem(int context, std::string_view name) const {
  return FindSorted(items[context], name);
}

std::optional<int> Catalog::FindJudge(std::string_view name) const {
  return FindSorted(judges, name);
}

std::optional<int> Catalog::FindAspect(std::string_view name) const {
  return FindSorted(aspects, name);
}

Dataset Dataset::Build(std::vector<ComparisonRecord> records,
                       std::optional<HumanScores> human_scores) {
  if (records.empty()) throw Error("empty dataset");
  for (const ComparisonRecord& r : records) {
    if (!std::isfinite(r.prob_first_wins) || r.prob_first_wins < 0.0 ||
        r.prob_first_wins > 1.0) {
      throw Error("probability out of range: " + DescribeKey(r));
    }
    if (r.item_first == r.item_second) {
      throw Error("item compared with itself: " + DescribeKey(r));
    }
  }
  std::sort(records.begin(), records.end(), RecordLess);
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (SameKey(records[i - 1], records[i])) {
      throw Error("duplicate ordered pair: " + DescribeKey(records[i]));
    }
  }

  std::set<std::string> judges, aspects;
  std::map<std::string, std::set<std::string>> items_by_context;
  for (const ComparisonRecord& r : records) {
    judges.insert(r.judge);
    aspects.insert(r.aspect);
    auto& items = items_by_context[r.context];
    items.insert(r.item_first);
    items.insert(r.item_second);
  }

  Dataset ds;
  ds.catalog_.judges.assign(judges.begin(), judges.end());
  ds.catalog_.aspects.assign(aspects.begin(), aspects.end());
  for (auto& [context, items] : items_by_context) {
    ds.catalog_.contexts.push_back(context);
    ds.catalog_.items.emplace_back(items.begin(), items.end());
  }

  for (const ComparisonRecord& r : records) {
    GroupKey key{*ds.catalog_.FindJudge(r.judge),
                 *ds.catalog_.FindContext(r.context),
                 *ds.catalog_.FindAspect(r.aspect)};
    ds.groups_[key].push_back(
        OrderedObservation{*ds.catalog_.FindItem(key.context, r.item_first),
                           *ds.catalog_.FindItem(key.context, r.item_second),
                           r.prob_first_wins});
  }
  // Item names sort the same way as their indices, so the observations are
  // already ordered by (first, second).
  ds.records_ = std::move(records);
  ds.human_scores_ = std::move(human_scores);
  return ds;
}

bool Dataset::IsComplete(const GroupKey& key) const {
  auto it = groups_.find(key);
  if (it == groups_.end()) return false;
  const std::size_t n = catalog_.items[key.context].size();
  return it->second.size() == n * (n - 1);
}

bool Dataset::IsComplete(std::string_view judge, std::string_view context,
                         std::string_view aspect) const {
  auto j = catalog_.FindJudge(judge);
  auto c = catalog_.FindContext(context);
  auto a = catalog_.FindAspect(aspect);
  if (!j || !c || !a) return false;
  return IsComplete(GroupKey{*j, *c, *a});
}

std::vector<ComparisonRecord> ReadRecordsJsonl(std::istream& in) {
  std::vector<ComparisonRecord> records;
  ForEachJsonLine(in, [&](const nlohmann::json& j, std::size_t line) {
    ComparisonRecord r;
    r.context = RequireString(j, "context", line);
    r.aspect = RequireString(j, "aspect", line);
    r.judge = RequireString(j, "judge", line);
    r.item_first = RequireString(j, "item_first", line);
    r.item_second = RequireString(j, "item_second", line);
    r.prob_first_wins = RequireNumber(j, "prob_first_wins", line);
    records.push_back(std::move(r));
  });
  return records;
}

std::vector<ComparisonRecord> ReadRecordsFile(const std::string& path) {
  std::ifstream in = OpenInput(path);
  return ReadRecordsJsonl(in);
}

std::string RecordToJsonLine(const ComparisonRecord& r) {
  nlohmann::ordered_json j;
  j["context"] = r.context;
  j["aspect"] = r.aspect;
  j["judge"] = r.judge;
  j["item_first"] = r.item_first;
  j["item_second"] = r.item_second;
  j["prob_first_wins"] = r.prob_first_wins;
  return j.dump();
}

void WriteRecordsJsonl(const std::vector<ComparisonRecord>& records,
                       std::ostream& out) {
  for (const ComparisonRecord& r : records) out << RecordToJsonLine(r) << '\n';
}

HumanScores ReadHumanScoresJsonl(std::istream& in) {
  HumanScores scores;
  ForEachJsonLine(in, [&](const nlohmann::json& j, std::size_t line) {
    scores.Set(RequireString(j, "context", line),
               RequireString(j, "aspect", line), RequireString(j, "item", line),
               RequireNumber(j, "score", line));
  });
  return scores;
}

HumanScores ReadHumanScoresFile(const std::string& path) {
  std::ifstream in = OpenInput(path);
  return ReadHumanScoresJsonl(in);
}

void WriteHumanScoresJsonl(const HumanScores& scores, std::ostream& out) {
  for (const auto& [key, score] : scores.entries()) {
    nlohmann::ordered_json j;
    j["context"] = std::get<0>(key);
    j["aspect"] = std::get<1>(key);
    j["item"] = std::get<2>(key);
    j["score"] = score;
    out << j.dump() << '\n';
  }
}

}  // namespace jurybt
