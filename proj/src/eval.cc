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

#include "jurybt/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "json.hpp"
#include "jurybt/consistency.h"

namespace jurybt {
namespace {

bool IsConstant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

void CheckSizes(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("correlation inputs differ in length");
  if (x.size() < 2) throw Error("correlation needs at least two points");
}

std::optional<double> MeanOf(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Correlation Correlate(const std::vector<JudgeReliability>& judges,
                      std::optional<double> JudgeReliability::*field) {
  std::vector<double> x, y;
  for (const JudgeReliability& j : judges) {
    if (!(j.*field)) continue;
    x.push_back(j.inv_sigma);
    y.push_back(*(j.*field));
  }
  Correlation c;
  if (x.size() < 3) return c;
  c.pcc = Pearson(x, y);
  c.src = Spearman(x, y);
  return c;
}

nlohmann::ordered_json OptionalJson(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string FormatCell(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", *v);
  return buf;
}

std::vector<std::string> TableColumns(
    const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::set<std::string> aspects;
  for (const auto& [name, report] : rows) {
    for (const auto& [aspect, result] : report.aspects) aspects.insert(aspect);
  }
  std::vector<std::string> columns(aspects.begin(), aspects.end());
  columns.push_back("ALL");
  return columns;
}

std::optional<double> Cell(const EvalReport& report, const std::string& column) {
  if (column == "ALL") return report.all;
  auto it = report.aspects.find(column);
  if (it == report.aspects.end() || it->second.contexts == 0) {
    return std::nullopt;
  }
  return it->second.mean_src;
}

}  // namespace

void ScoreTable::Set(const std::string& context, const std::string& aspect,
                     const std::string& item, double score) {
  if (!std::isfinite(score)) throw Error("non-finite predicted score");
  scores_[{context, aspect}][item] = score;
}

const std::map<std::string, double>* ScoreTable::Find(
    const std::string& context, const std::string& aspect) const {
  auto it = scores_.find({context, aspect});
  return it == scores_.end() ? nullptr : &it->second;
}

ScoreTable ScoreTable::FromModel(const FittedModel& model) {
  ScoreTable table;
  const Catalog& c = model.catalog;
  for (const SkillBlock& b : model.blocks) {
    for (std::size_t i = 0; i < b.skills.size(); ++i) {
      table.Set(c.contexts[b.context], c.aspects[b.aspect],
                c.items[b.context][i], b.skills[i]);
    }
  }
  return table;
}

ScoreTable AvgProbScores(const DebiasedPairSet& pairs,
                         std::optional<std::string> judge) {
  DebiasedPairSet scoped;
  if (judge) {
    auto j = pairs.catalog().FindJudge(*judge);
    if (!j) throw Error("unknown judge " + *judge);
    scoped = AverageAcrossJudges(
        pairs.Filter([&](const PairGroup& g) { return g.key.judge == *j; }),
        *judge);
  } else {
    scoped = AverageAcrossJudges(pairs);
  }
  const Catalog& c = scoped.catalog();
  ScoreTable table;
  for (const PairGroup& g : scoped.groups()) {
    const std::string& context = c.contexts[g.key.context];
    if (!scoped.IsComplete(g)) {
      throw Error("incomplete pair coverage in context " + context);
    }
    const int n = c.ItemCount(g.key.context);
    std::vector<double> wins(n, 0.0);
    for (const DebiasedPair& p : g.pairs) {
      wins[p.first] += p.prob_first;
      wins[p.second] += 1.0 - p.prob_first;
    }
    for (int i = 0; i < n; ++i) {
      table.Set(context, c.aspects[g.key.aspect], c.items[g.key.context][i],
                n > 1 ? wins[i] / (n - 1) : 0.5);
    }
  }
  return table;
}

std::vector<double> FractionalRanks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> Pearson(std::span<const double> x,
                              std::span<const double> y) {
  CheckSizes(x, y);
  if (IsConstant(x) || IsConstant(y)) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> Spearman(std::span<const double> x,
                               std::span<const double> y) {
  CheckSizes(x, y);
  const std::vector<double> rx = FractionalRanks(x);
  const std::vector<double> ry = FractionalRanks(y);
  return Pearson(rx, ry);
}

EvalReport Evaluate(const ScoreTable& scores, const HumanScores& human,
                    const std::vector<std::string>& aspects) {
  EvalReport report;
  std::vector<double> aspect_means;
  for (const std::string& aspect : aspects) {
    AspectResult result;
    std::vector<double> srcs;
    for (const auto& [key, items] : scores.entries()) {
      if (key.second != aspect) continue;
      std::vector<double> predicted, reference;
      for (const auto& [item, score] : items) {
        auto h = human.Get(key.first, aspect, item);
        if (!h) {
          throw Error("missing human score for context=" + key.first +
                      " aspect=" + aspect + " item=" + item);
        }
        predicted.push_back(score);
        reference.push_back(*h);
      }
      std::optional<double> src;
      if (predicted.size() >= 2) src = Spearman(predicted, reference);
      if (!src) {
        ++result.excluded;
        continue;
      }
      result.per_context[key.first] = *src;
      srcs.push_back(*src);
    }
    result.contexts = static_cast<int>(srcs.size());
    if (!srcs.empty()) {
      result.mean_src = *MeanOf(srcs);
      aspect_means.push_back(result.mean_src);
    }
    report.aspects[aspect] = std::move(result);
  }
  report.all = MeanOf(aspect_means);
  return report;
}

ReliabilityReport ComputeReliability(const FittedModel& model,
                                     const DebiasedPairSet& pairs,
                                     const HumanScores& human) {
  if (model.mode == DiscriminatorMode::kFixedUnit) {
    throw Error("reliability analysis needs learned discriminators");
  }
  const Catalog& c = pairs.catalog();
  const DebiasedPairSet complete =
      pairs.Filter([&](const PairGroup& g) { return pairs.IsComplete(g); });
  const ConsistencyReport consistency = AnalyzeConsistency(complete);

  std::set<int> aspects;
  for (const PairGroup& g : pairs.groups()) aspects.insert(g.key.aspect);

  ReliabilityReport report;
  std::map<std::string, std::vector<double>> inv_sigmas, perf, consist;
  std::vector<std::string> judge_names;
  for (int a : aspects) {
    const std::string& aspect = c.aspects[a];
    ReliabilityScope scope;
    for (int j = 0; j < static_cast<int>(c.judges.size()); ++j) {
      const std::string& judge = c.judges[j];
      auto sigma = model.Sigma(judge, aspect);
      if (!sigma) continue;
      JudgeReliability r;
      r.judge = judge;
      r.inv_sigma = 1.0 / *sigma;
      const DebiasedPairSet mine = complete.Filter([&](const PairGroup& g) {
        return g.key.judge == j && g.key.aspect == a;
      });
      if (!mine.groups().empty()) {
        const EvalReport e =
            Evaluate(AvgProbScores(mine, judge), human, {aspect});
        const AspectResult& ar = e.aspects.at(aspect);
        if (ar.contexts > 0) r.avg_prob_src = ar.mean_src;
      }
      auto it = consistency.averages.find({j, a});
      if (it != consistency.averages.end()) {
        r.one_minus_cycle_rate = 1.0 - it->second.mean_cycle_rate;
      }
      if (!inv_sigmas.contains(judge)) judge_names.push_back(judge);
      inv_sigmas[judge].push_back(r.inv_sigma);
      if (r.avg_prob_src) perf[judge].push_back(*r.avg_prob_src);
      if (r.one_minus_cycle_rate) consist[judge].push_back(*r.one_minus_cycle_rate);
      scope.judges.push_back(std::move(r));
    }
    scope.sigma_vs_performance =
        Correlate(scope.judges, &JudgeReliability::avg_prob_src);
    scope.sigma_vs_consistency =
        Correlate(scope.judges, &JudgeReliability::one_minus_cycle_rate);
    report.scopes[aspect] = std::move(scope);
  }

  ReliabilityScope all;
  std::sort(judge_names.begin(), judge_names.end());
  for (const std::string& judge : judge_names) {
    JudgeReliability r;
    r.judge = judge;
    r.inv_sigma = *MeanOf(inv_sigmas[judge]);
    r.avg_prob_src = MeanOf(perf[judge]);
    r.one_minus_cycle_rate = MeanOf(consist[judge]);
    all.judges.push_back(std::move(r));
  }
  all.sigma_vs_performance = Correlate(all.judges, &JudgeReliability::avg_prob_src);
  all.sigma_vs_consistency =
      Correlate(all.judges, &JudgeReliability::one_minus_cycle_rate);
  report.scopes["ALL"] = std::move(all);
  return report;
}

std::string EvalReportToJson(const EvalReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json aspects = nlohmann::ordered_json::object();
  for (const auto& [aspect, r] : report.aspects) {
    nlohmann::ordered_json a;
    a["mean_src"] = r.contexts > 0 ? nlohmann::ordered_json(r.mean_src)
                                   : nlohmann::ordered_json(nullptr);
    a["contexts"] = r.contexts;
    a["excluded"] = r.excluded;
    a["per_context"] = r.per_context;
    aspects[aspect] = std::move(a);
  }
  j["aspects"] = std::move(aspects);
  j["ALL"] = OptionalJson(report.all);
  return j.dump(2);
}

std::string ReliabilityToJson(const ReliabilityReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [name, scope] : report.scopes) {
    nlohmann::ordered_json s;
    nlohmann::ordered_json judges = nlohmann::ordered_json::array();
    for (const JudgeReliability& r : scope.judges) {
      judges.push_back({{"judge", r.judge},
                        {"inv_sigma", r.inv_sigma},
                        {"avg_prob_src", OptionalJson(r.avg_prob_src)},
                        {"one_minus_cycle_rate",
                         OptionalJson(r.one_minus_cycle_rate)}});
    }
    s["judges"] = std::move(judges);
    s["sigma_vs_performance"] = {
        {"pcc", OptionalJson(scope.sigma_vs_performance.pcc)},
        {"src", OptionalJson(scope.sigma_vs_performance.src)}};
    s["sigma_vs_consistency"] = {
        {"pcc", OptionalJson(scope.sigma_vs_consistency.pcc)},
        {"src", OptionalJson(scope.sigma_vs_consistency.src)}};
    j[name] = std::move(s);
  }
  return j.dump(2);
}

void WriteMethodTableCsv(
    const std::vector<std::pair<std::string, EvalReport>>& rows,
    std::ostream& out) {
  const std::vector<std::string> columns = TableColumns(rows);
  out << "method";
  for (const std::string& col : columns) out << ',' << col;
  out << '\n';
  for (const auto& [name, report] : rows) {
    out << name;
    for (const std::string& col : columns) out << ',' << FormatCell(Cell(report, col));
    out << '\n';
  }
}

void WriteMethodTableText(
    const std::vector<std::pair<std::string, EvalReport>>& rows,
    std::ostream& out) {
  const std::vector<std::string> columns = TableColumns(rows);
  std::size_t name_width = 6;
  for (const auto& [name, report] : rows) name_width = std::max(name_width, name.size());
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(name_width), "method");
  out << buf;
  for (const std::string& col : columns) {
    std::snprintf(buf, sizeof(buf), "  %10s", col.c_str());
    out << buf;
  }
  out << '\n';
  for (const auto& [name, report] : rows) {
    std::snprintf(buf, sizeof(buf), "%-*s", static_cast<int>(name_width), name.c_str());
    out << buf;
    for (const std::string& col : columns) {
      auto v = Cell(report, col);
      if (v) {
        std::snprintf(buf, sizeof(buf), "  %10.4f", *v);
      } else {
        std::snprintf(buf, sizeof(buf), "  %10s", "-");
      }
      out << buf;
    }
    out << '\n';
  }
}

void WriteScatterCsv(const ReliabilityScope& scope, std::ostream& out) {
  out << "judge,inv_sigma,avg_prob_src,one_minus_cycle_rate\n";
  for (const JudgeReliability& r : scope.judges) {
    out << r.judge << ',' << FormatCell(r.inv_sigma) << ','
        << FormatCell(r.avg_prob_src) << ',' << FormatCell(r.one_minus_cycle_rate)
        << '\n';
  }
}

}  // namespace jurybt
