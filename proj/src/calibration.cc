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

#include "jurybt/calibration.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

#include "json.hpp"

namespace jurybt {

double Anneal(double p, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error("temperature must be positive and finite");
  }
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return Logistic(Logit(p) / temperature);
}

EceReport ComputeEce(const std::vector<CalibrationSample>& samples,
                     int n_bins) {
  if (n_bins < 1) throw Error("ECE needs at least one bin");
  EceReport report;
  report.n_bins = n_bins;
  report.bins.assign(n_bins, EceBin{});
  std::vector<double> conf_sum(n_bins, 0.0), correct_sum(n_bins, 0.0);
  for (const CalibrationSample& s : samples) {
    int bin = static_cast<int>((s.confidence - 0.5) / 0.5 * n_bins);
    bin = std::clamp(bin, 0, n_bins - 1);
    conf_sum[bin] += s.confidence;
    correct_sum[bin] += s.correct ? 1.0 : 0.0;
    ++report.bins[bin].count;
  }
  report.total = static_cast<int>(samples.size());
  for (int b = 0; b < n_bins; ++b) {
    EceBin& bin = report.bins[b];
    if (bin.count == 0) continue;
    bin.mean_confidence = conf_sum[b] / bin.count;
    bin.accuracy = correct_sum[b] / bin.count;
    report.ece += static_cast<double>(bin.count) / report.total *
                  std::abs(bin.mean_confidence - bin.accuracy);
  }
  return report;
}

std::vector<CalibrationSample> CalibrationSamples(const DebiasedPairSet& pairs,
                                                  int judge, int aspect,
                                                  const HumanScores& human,
                                                  int* excluded_ties) {
  const Catalog& c = pairs.catalog();
  std::vector<CalibrationSample> samples;
  int ties = 0;
  for (const PairGroup& g : pairs.groups()) {
    if (g.key.judge != judge || g.key.aspect != aspect) continue;
    const std::string& context = c.contexts[g.key.context];
    const std::string& aspect_name = c.aspects[aspect];
    const auto& names = c.items[g.key.context];
    for (const DebiasedPair& p : g.pairs) {
      auto hi = human.Get(context, aspect_name, names[p.first]);
      auto hj = human.Get(context, aspect_name, names[p.second]);
      if (!hi || !hj) {
        throw Error("missing human score in context=" + context +
                    " aspect=" + aspect_name + " for item " +
                    (hi ? names[p.second] : names[p.first]));
      }
      if (*hi == *hj) {
        ++ties;
        continue;
      }
      const bool first_favoured = p.prob_first >= 0.5;
      samples.push_back(
          {std::max(p.prob_first, 1.0 - p.prob_first),
           first_favoured ? (*hi > *hj) : (*hj > *hi)});
    }
  }
  if (excluded_ties != nullptr) *excluded_ties = ties;
  return samples;
}

EceReport Ece(const DebiasedPairSet& pairs, int judge, int aspect,
              const HumanScores& human, int n_bins) {
  int ties = 0;
  EceReport report =
      ComputeEce(CalibrationSamples(pairs, judge, aspect, human, &ties), n_bins);
  report.excluded_ties = ties;
  return report;
}

std::vector<double> LogSpacedGrid(double min, double max, int n) {
  if (!(min > 0.0) || !(max >= min) || n < 1) {
    throw Error("invalid temperature grid");
  }
  if (n == 1) return {min};
  std::vector<double> grid(n);
  const double lo = std::log(min), hi = std::log(max);
  for (int i = 0; i < n; ++i) {
    grid[i] = std::exp(lo + (hi - lo) * i / (n - 1));
  }
  grid.front() = min;
  grid.back() = max;
  return grid;
}

std::vector<double> DefaultTemperatureGrid() {
  std::vector<double> grid = LogSpacedGrid(0.1, 10.0, 25);
  grid[12] = 1.0;  // exp(0) up to rounding
  return grid;
}

TemperatureMap FitTemperatures(const DebiasedPairSet& pairs,
                               const HumanScores& human,
                               const std::vector<double>& grid, int n_bins) {
  if (grid.empty()) throw Error("temperature grid is empty");
  for (double t : grid) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw Error("temperature grid values must be positive");
    }
  }
  constexpr double kTieTolerance = 1e-12;
  const Catalog& c = pairs.catalog();
  std::set<std::pair<int, int>> keys;
  for (const PairGroup& g : pairs.groups()) {
    keys.insert({g.key.judge, g.key.aspect});
  }
  TemperatureMap result;
  for (const auto& [judge, aspect] : keys) {
    const std::vector<CalibrationSample> base =
        CalibrationSamples(pairs, judge, aspect, human);
    if (base.empty()) continue;
    double best_t = 0.0, best_ece = 0.0;
    bool have = false;
    for (double t : grid) {
      std::vector<CalibrationSample> annealed = base;
      for (CalibrationSample& s : annealed) {
        // Annealing keeps the favoured side, so correctness is unchanged.
        s.confidence = Anneal(s.confidence, t);
      }
      const double e = ComputeEce(annealed, n_bins).ece;
      bool better = !have || e < best_ece - kTieTolerance;
      if (!better && std::abs(e - best_ece) <= kTieTolerance) {
        const double d = std::abs(std::log(t)), best_d = std::abs(std::log(best_t));
        better = d < best_d || (d == best_d && t < best_t);
      }
      if (better) {
        best_t = t;
        best_ece = e;
        have = true;
      }
    }
    result[c.judges[judge] + "@" + c.aspects[aspect]] = best_t;
  }
  return result;
}

DebiasedPairSet AnnealPairs(const DebiasedPairSet& pairs,
                            const TemperatureMap& temperatures) {
  const Catalog& c = pairs.catalog();
  for (const PairGroup& g : pairs.groups()) {
    const std::string key =
        c.judges[g.key.judge] + "@" + c.aspects[g.key.aspect];
    if (!temperatures.contains(key)) {
      throw Error("missing temperature for " + key);
    }
  }
  return pairs.Transform([&](const PairGroup& g, double p) {
    return Anneal(p, temperatures.at(c.judges[g.key.judge] + "@" +
                                     c.aspects[g.key.aspect]));
  });
}

FittedModel TempBt(const DebiasedPairSet& pairs,
                   const TemperatureMap& temperatures,
                   const FitOptions& options) {
  return Fit(AnnealPairs(pairs, temperatures), Variant::kSoftBt, options);
}

std::string TemperaturesToJson(const TemperatureMap& temperatures) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, t] : temperatures) j[key] = t;
  return j.dump(2);
}

TemperatureMap TemperaturesFromJson(const std::string& text) {
  TemperatureMap result;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error("temperature JSON must be an object");
    for (const auto& [key, t] : j.items()) {
      const double value = t.get<double>();
      if (!(value > 0.0) || !std::isfinite(value)) {
        throw Error("temperature for " + key + " must be positive");
      }
      result[key] = value;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed temperature JSON: ") + e.what());
  }
  return result;
}

}  // namespace jurybt
