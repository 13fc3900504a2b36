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

#ifndef JURYBT_MODELS_H_
#define JURYBT_MODELS_H_

// Maximum-likelihood fitting of the Bradley-Terry family on debiased pairwise
// probabilities:
//
//   hard-bt        binary outcomes, unit discriminator
//   soft-bt        probabilities as fractional labels, unit discriminator
//   bt-sigma       soft labels, one discriminator per judge
//   bt-sigma-asp   soft labels, one discriminator per (judge, aspect)
//   hard-bt-sigma  binary outcomes, one discriminator per judge
//
// Every variant maximizes
//
//   sum_k sum_(i,j) p_ij^k log q + (1 - p_ij^k) log(1 - q),
//   q = logistic((s_i - s_j) / sigma_k),
//
// where the sum runs over the unordered debiased pairs of each judge. Hard
// variants replace p by its 0/1 outcome. Skills live per (context, aspect) and
// are mean-zero within each; discriminators are parameterized as
// rho = log sigma with mean(rho) = 0 (per aspect in the per-aspect mode).

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jurybt/core.h"
#include "jurybt/debias.h"

namespace jurybt {

class WorkerPool;

enum class Variant { kHardBt, kSoftBt, kBtSigma, kBtSigmaAsp, kHardBtSigma };

enum class DiscriminatorMode { kFixedUnit, kSharedPerJudge, kPerJudgeAspect };

std::string VariantName(Variant variant);
Variant ParseVariant(std::string_view name);
std::string ModeName(DiscriminatorMode mode);
DiscriminatorMode ParseMode(std::string_view name);
bool IsHardVariant(Variant variant);
DiscriminatorMode NominalMode(Variant variant);

inline constexpr Variant kAllVariants[] = {
    Variant::kHardBt, Variant::kSoftBt, Variant::kBtSigma,
    Variant::kBtSigmaAsp, Variant::kHardBtSigma};

// 1 / (1 + exp(-x)), accurate in both tails.
double Logistic(double x);
// log(p / (1 - p)); +-infinity at the endpoints.
double Logit(double p);

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 5000;
  double epsilon = 1e-12;
  // Reserved for stochastic tie-breaks; the fit itself is deterministic.
  std::uint64_t seed = 0;
  int workers = 1;
  // When set, discriminators are held at these sigma values (keyed as in
  // FittedModel::sigmas) and only skills are optimized.
  std::optional<std::map<std::string, double>> fixed_sigmas;
  // Keep the log-likelihood of every accepted iterate in the diagnostics.
  bool record_trace = false;
};

// Parameters in structured form: one skill vector per (context, aspect) block
// and one log-discriminator per discriminator key.
struct ModelParameters {
  std::vector<std::vector<double>> skills;
  std::vector<double> log_sigmas;
};

// The log-likelihood of one variant on one set of debiased pairs, with its
// analytic gradient. Probabilities inside the logs are clamped to
// [epsilon, 1 - epsilon].
class BtObjective {
 public:
  struct Block {
    int context = 0;
    int aspect = 0;
    int n_items = 0;
    std::size_t offset = 0;  // into the flat parameter vector
  };

  // A sigma variant with fewer than two judges falls back to the fixed-unit
  // mode (`fell_back()` reports it).
  BtObjective(const DebiasedPairSet& pairs, Variant variant,
              double epsilon = 1e-12);

  Variant variant() const { return variant_; }
  DiscriminatorMode mode() const { return mode_; }
  bool fell_back() const { return fell_back_; }
  const Catalog& catalog() const { return catalog_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<std::string>& discriminator_keys() const {
    return disc_keys_;
  }
  std::size_t num_skills() const { return num_skills_; }
  std::size_t num_parameters() const { return num_skills_ + disc_keys_.size(); }

  // Flat layout: block skills in block order, then log-discriminators.
  std::vector<double> Flatten(const ModelParameters& params) const;
  ModelParameters Unflatten(std::span<const double> theta) const;
  ModelParameters ZeroParameters() const;

  double LogLikelihood(std::span<const double> theta,
                       WorkerPool* pool = nullptr) const;
  // Raw (unprojected) gradient.
  void Gradient(std::span<const double> theta, std::span<double> grad,
                WorkerPool* pool = nullptr) const;
  // LogLikelihood(to) - LogLikelihood(from), computed per term so that small
  // changes are not lost to cancellation.
  double LogLikelihoodChange(std::span<const double> from,
                             std::span<const double> to,
                             WorkerPool* pool = nullptr) const;

  // Removes the per-block skill mean and the per-group log-discriminator mean
  // from a gradient.
  void ProjectGradient(std::span<double> grad) const;
  // Maps parameters to the equivalent point on the constraint set: skills
  // are centered per block and each discriminator group is shifted to mean
  // zero, with the skills it governs rescaled so that every margin
  // (s_i - s_j) / sigma_k, and hence the likelihood, is unchanged.
  void Normalize(std::span<double> theta) const;
  // Ascent direction solving (H + lambda I) d = grad, where H is the negative
  // Hessian, or its Gauss-Newton part when H is not positive definite. With
  // `freeze_discriminators` the log-discriminator entries of d are zero.
  // Returns false when the Gauss-Newton fallback was used.
  bool NewtonDirection(std::span<const double> theta,
                       std::span<const double> grad, std::span<double> dir,
                       bool freeze_discriminators,
                       WorkerPool* pool = nullptr) const;

  double LogLikelihood(const ModelParameters& params) const;
  ModelParameters Gradient(const ModelParameters& params) const;

 private:
  struct Term {
    int first;
    int second;
    int disc;  // -1 in fixed-unit mode
    double p;
  };

  double TermSum(std::size_t block, std::span<const double> theta) const;
  double GroupMean(std::span<const double> theta, int group) const;

  Variant variant_;
  DiscriminatorMode mode_;
  bool fell_back_ = false;
  double clamp_logit_;
  Catalog catalog_;
  std::vector<Block> blocks_;
  std::vector<std::vector<Term>> terms_;  // per block
  std::vector<std::string> disc_keys_;
  std::vector<int> disc_group_;  // normalization group of each key
  std::vector<int> block_group_;  // discriminator group governing each block
  int num_disc_groups_ = 0;
  std::size_t num_skills_ = 0;
};

struct SkillBlock {
  int context = 0;
  int aspect = 0;
  std::vector<double> skills;  // indexed like catalog.items[context]
};

struct FitDiagnostics {
  double log_likelihood = 0.0;
  double gradient_inf_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  // The line search could not find an ascent step before convergence.
  bool stalled = false;
  // Stopped because the discriminators have no finite maximum-likelihood
  // estimate (typically separable binarized outcomes).
  bool diverging = false;
  std::vector<std::string> warnings;
  std::vector<double> trace;
};

struct FittedModel {
  Variant variant = Variant::kSoftBt;
  DiscriminatorMode mode = DiscriminatorMode::kFixedUnit;
  Catalog catalog;
  std::vector<SkillBlock> blocks;  // ascending (context, aspect)
  // Keyed by judge, or "judge@aspect" in the per-aspect mode. Every judge
  // maps to 1 in the fixed-unit mode.
  std::map<std::string, double> sigmas;
  FitDiagnostics diagnostics;

  const SkillBlock* FindBlock(int context, int aspect) const;
  std::optional<double> Skill(std::string_view context,
                              std::string_view aspect,
                              std::string_view item) const;
  // Sigma for a judge on an aspect under the model's discriminator mode.
  std::optional<double> Sigma(std::string_view judge,
                              std::string_view aspect) const;
};

std::string DiscriminatorKey(DiscriminatorMode mode, std::string_view judge,
                             std::string_view aspect);

// Fits `variant` on the debiased (and, for hard variants, binarized) pairs.
// Throws Error when the likelihood becomes non-finite.
FittedModel Fit(const DebiasedPairSet& pairs, Variant variant,
                const FitOptions& options = {});
FittedModel Fit(const Dataset& dataset, Variant variant,
                const FitOptions& options = {});

// JSON: {"variant", "discriminator_mode", "skills": {context: {aspect:
// {item: s}}}, "sigmas": {...}, "diagnostics": {...}}.
std::string ModelToJson(const FittedModel& model, int indent = 2);
FittedModel ModelFromJson(std::string_view text);

}  // namespace jurybt

#endif  // JURYBT_MODELS_H_
