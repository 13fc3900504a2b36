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

#include "jurybt/synth.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "json.hpp"

namespace jurybt {
namespace {

constexpr double kProbClip = 1e-6;

double PerJudge(const std::vector<double>& values, int k) {
  if (values.empty()) return 0.0;
  if (values.size() == 1) return values[0];
  return values[k];
}

std::string Padded(const char* prefix, int value, int count) {
  int width = 1;
  for (int c = std::max(count - 1, 1); c >= 10; c /= 10) ++width;
  std::ostringstream out;
  out << prefix << std::setfill('0') << std::setw(width) << value;
  return out.str();
}

double RawLogLikelihood(const std::vector<std::vector<double>>& prob,
                        const std::vector<double>& s, bool hard) {
  constexpr double kEps = 1e-12;
  const int n = static_cast<int>(s.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double p = prob[i][j];
      if (std::isnan(p)) continue;
      if (hard) p = p >= 0.5 ? 1.0 : 0.0;
      double q = 1.0 / (1.0 + std::exp(-(s[i] - s[j])));
      q = std::min(std::max(q, kEps), 1.0 - kEps);
      total += p * std::log(q) + (1.0 - p) * std::log(1.0 - q);
    }
  }
  return total;
}

}  // namespace

std::uint64_t MixSeed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SynthConfig::Validate() const {
  if (n_contexts < 1) throw Error("synth: n_contexts must be positive");
  if (n_items < 2) throw Error("synth: n_items must be at least 2");
  if (aspects.empty()) throw Error("synth: at least one aspect is required");
  if (sigmas.empty()) throw Error("synth: at least one judge sigma is required");
  for (double s : sigmas) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error("synth: judge sigmas must be positive");
    }
  }
  auto check_per_judge = [&](const std::vector<double>& v, const char* name) {
    if (v.size() > 1 && v.size() != sigmas.size()) {
      throw Error(std::string("synth: ") + name +
                  " must have one value or one per judge");
    }
  };
  check_per_judge(bias, "bias");
  check_per_judge(cycle_noise, "cycle_noise");
  for (double c : cycle_noise) {
    if (c < 0.0 || c > 1.0) throw Error("synth: cycle_noise must lie in [0, 1]");
  }
  if (noise_std < 0.0 || human_noise < 0.0) {
    throw Error("synth: noise scales must be non-negative");
  }
}

std::string SynthConfig::JudgeName(int k) const {
  return Padded("judge", k, num_judges());
}

std::string SynthConfig::ContextName(int c) const {
  return Padded("ctx", c, n_contexts);
}

std::string SynthConfig::ItemName(int i) const {
  return Padded("item", i, n_items);
}

SynthResult Generate(const SynthConfig& config) {
  config.Validate();
  const int n = config.n_items;
  const int k_judges = config.num_judges();
  std::vector<ComparisonRecord> records;
  records.reserve(static_cast<std::size_t>(config.n_contexts) *
                  config.aspects.size() * k_judges * n * (n - 1));
  HumanScores human;
  SynthTruth truth;
  for (int k = 0; k < k_judges; ++k) {
    truth.sigmas[config.JudgeName(k)] = config.sigmas[k];
  }

  std::vector<std::string> items(n);
  for (int i = 0; i < n; ++i) items[i] = config.ItemName(i);

  for (int c = 0; c < config.n_contexts; ++c) {
    const std::string context = config.ContextName(c);
    for (std::size_t a = 0; a < config.aspects.size(); ++a) {
      const std::string& aspect = config.aspects[a];
      std::mt19937_64 rng(MixSeed(MixSeed(config.seed, c), a));
      std::normal_distribution<double> normal(0.0, 1.0);
      std::uniform_real_distribution<double> uniform(0.0, 1.0);

      std::vector<double> skills(n);
      for (double& s : skills) s = normal(rng);
      const double mean = std::accumulate(skills.begin(), skills.end(), 0.0) / n;
      for (double& s : skills) s -= mean;

      auto& planted = truth.skills[{context, aspect}];
      for (int i = 0; i < n; ++i) {
        planted[items[i]] = skills[i];
        // Standard Gumbel draw; differences of two are logistic.
        const double u = std::max(uniform(rng), 1e-300);
        const double gumbel = -std::log(-std::log(u));
        human.Set(context, aspect, items[i],
                  skills[i] + config.human_noise * gumbel);
      }

      for (int k = 0; k < k_judges; ++k) {
        const std::string judge = config.JudgeName(k);
        const double bias = PerJudge(config.bias, k);
        const double flip_prob = PerJudge(config.cycle_noise, k);
        for (int i = 0; i < n; ++i) {
          for (int j = i + 1; j < n; ++j) {
            const bool flip = uniform(rng) < flip_prob;
            const double z_forward = normal(rng);
            const double z_backward = normal(rng);
            double margin = (skills[i] - skills[j]) / config.sigmas[k];
            if (flip) margin = -margin;
            auto clip = [](double p) {
              return std::clamp(p, kProbClip, 1.0 - kProbClip);
            };
            const double p_ij =
                clip(Logistic(margin + bias + config.noise_std * z_forward));
            const double p_ji =
                clip(Logistic(-margin + bias + config.noise_std * z_backward));
            records.push_back({context, aspect, judge, items[i], items[j], p_ij});
            records.push_back({context, aspect, judge, items[j], items[i], p_ji});
          }
        }
      }
    }
  }
  SynthResult result{Dataset::Build(std::move(records), human), human,
                     std::move(truth)};
  return result;
}

SynthConfig SynthConfigFromJson(const std::string& text) {
  SynthConfig config;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (!j.is_object()) throw Error("synth config must be a JSON object");
    auto per_judge = [&](const char* key, std::vector<double>* out) {
      if (!j.contains(key)) return;
      const auto& v = j.at(key);
      *out = v.is_array() ? v.get<std::vector<double>>()
                          : std::vector<double>{v.get<double>()};
    };
    config.n_contexts = j.value("n_contexts", config.n_contexts);
    config.n_items = j.value("n_items", config.n_items);
    config.aspects = j.value("aspects", config.aspects);
    config.sigmas = j.value("sigmas", config.sigmas);
    config.noise_std = j.value("noise_std", config.noise_std);
    per_judge("bias", &config.bias);
    per_judge("cycle_noise", &config.cycle_noise);
    config.human_noise = j.value("human_noise", config.human_noise);
    config.seed = j.value("seed", config.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed synth config: ") + e.what());
  }
  config.Validate();
  return config;
}

std::string SynthConfigToJson(const SynthConfig& config) {
  nlohmann::ordered_json j;
  j["n_contexts"] = config.n_contexts;
  j["n_items"] = config.n_items;
  j["aspects"] = config.aspects;
  j["sigmas"] = config.sigmas;
  j["noise_std"] = config.noise_std;
  j["bias"] = config.bias;
  j["cycle_noise"] = config.cycle_noise;
  j["human_noise"] = config.human_noise;
  j["seed"] = config.seed;
  return j.dump(2);
}

std::string TruthToJson(const SynthTruth& truth) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json skills = nlohmann::ordered_json::object();
  for (const auto& [key, items] : truth.skills) {
    nlohmann::ordered_json block = nlohmann::ordered_json::object();
    for (const auto& [item, s] : items) block[item] = s;
    skills[key.first][key.second] = std::move(block);
  }
  j["skills"] = std::move(skills);
  nlohmann::ordered_json sigmas = nlohmann::ordered_json::object();
  for (const auto& [judge, s] : truth.sigmas) sigmas[judge] = s;
  j["sigmas"] = std::move(sigmas);
  return j.dump(2);
}

std::int64_t OracleCycleCount(const AdjacencyMatrix& adj) {
  const int n = adj.size();
  if (n > 8) throw Error("oracle cycle count is limited to 8 items");
  std::int64_t cycles = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int k = j + 1; k < n; ++k) {
        if (adj(i, j) && adj(j, k) && adj(k, i)) ++cycles;
        if (adj(i, k) && adj(k, j) && adj(j, i)) ++cycles;
      }
    }
  }
  return cycles;
}

std::vector<double> OracleBtFit(const std::vector<std::vector<double>>& prob,
                                Variant variant) {
  const int n = static_cast<int>(prob.size());
  if (n > 6) throw Error("oracle BT fit is limited to 6 items");
  if (variant != Variant::kSoftBt && variant != Variant::kHardBt) {
    throw Error("oracle BT fit supports soft-bt and hard-bt only");
  }
  const bool hard = variant == Variant::kHardBt;
  const double kInvPhi = (std::sqrt(5.0) - 1.0) / 2.0;
  constexpr double kHalfWidth = 30.0;
  constexpr double kLineTol = 1e-7;
  std::vector<double> s(n, 0.0);

  for (int sweep = 0; sweep < 5000; ++sweep) {
    double max_move = 0.0;
    for (int k = 0; k < n; ++k) {
      auto f = [&](double v) {
        std::vector<double> t = s;
        t[k] = v;
        return RawLogLikelihood(prob, t, hard);
      };
      double lo = s[k] - kHalfWidth, hi = s[k] + kHalfWidth;
      double x1 = hi - kInvPhi * (hi - lo), x2 = lo + kInvPhi * (hi - lo);
      double f1 = f(x1), f2 = f(x2);
      while (hi - lo > kLineTol) {
        if (f1 < f2) {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + kInvPhi * (hi - lo);
          f2 = f(x2);
        } else {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - kInvPhi * (hi - lo);
          f1 = f(x1);
        }
      }
      const double best = 0.5 * (lo + hi);
      max_move = std::max(max_move, std::abs(best - s[k]));
      s[k] = best;
    }
    if (max_move < 2 * kLineTol) break;
  }
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  for (double& v : s) v -= mean;
  return s;
}

}  // namespace jurybt
