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

#include "jurybt/models.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <set>
#include <utility>

#include <Eigen/Dense>

#include "json.hpp"
#include "jurybt/parallel.h"

namespace jurybt {
namespace {

double Softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Past this log-discriminator spread the fit is following a direction of
// unbounded likelihood increase.
const double kMaxLogSigmaSpread = std::log(1e8);

double LogSigmaSpread(std::span<const double> theta, std::size_t n_skills) {
  if (theta.size() <= n_skills) return 0.0;
  const auto [lo, hi] = std::minmax_element(
      theta.begin() + static_cast<std::ptrdiff_t>(n_skills), theta.end());
  return *hi - *lo;
}

double InfNorm(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename Fn>
void ForBlocks(WorkerPool* pool, std::size_t n, Fn&& fn) {
  if (pool == nullptr) {
    for (std::size_t b = 0; b < n; ++b) fn(b);
  } else {
    pool->ParallelFor(n, fn);
  }
}

void CenterRange(std::span<double> v) {
  if (v.empty()) return;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) /
                      static_cast<double>(v.size());
  for (double& x : v) x -= mean;
}

}  // namespace

std::string VariantName(Variant variant) {
  switch (variant) {
    case Variant::kHardBt:
      return "hard-bt";
    case Variant::kSoftBt:
      return "soft-bt";
    case Variant::kBtSigma:
      return "bt-sigma";
    case Variant::kBtSigmaAsp:
      return "bt-sigma-asp";
    case Variant::kHardBtSigma:
      return "hard-bt-sigma";
  }
  return "unknown";
}

Variant ParseVariant(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (VariantName(v) == name) return v;
  }
  throw Error("unknown variant: " + std::string(name));
}

std::string ModeName(DiscriminatorMode mode) {
  switch (mode) {
    case DiscriminatorMode::kFixedUnit:
      return "fixed-unit";
    case DiscriminatorMode::kSharedPerJudge:
      return "shared-per-judge";
    case DiscriminatorMode::kPerJudgeAspect:
      return "per-judge-per-aspect";
  }
  return "unknown";
}

DiscriminatorMode ParseMode(std::string_view name) {
  for (DiscriminatorMode m :
       {DiscriminatorMode::kFixedUnit, DiscriminatorMode::kSharedPerJudge,
        DiscriminatorMode::kPerJudgeAspect}) {
    if (ModeName(m) == name) return m;
  }
  throw Error("unknown discriminator mode: " + std::string(name));
}

bool IsHardVariant(Variant variant) {
  return variant == Variant::kHardBt || variant == Variant::kHardBtSigma;
}

DiscriminatorMode NominalMode(Variant variant) {
  switch (variant) {
    case Variant::kHardBt:
    case Variant::kSoftBt:
      return DiscriminatorMode::kFixedUnit;
    case Variant::kBtSigma:
    case Variant::kHardBtSigma:
      return DiscriminatorMode::kSharedPerJudge;
    case Variant::kBtSigmaAsp:
      return DiscriminatorMode::kPerJudgeAspect;
  }
  return DiscriminatorMode::kFixedUnit;
}

double Logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double Logit(double p) { return std::log(p) - std::log1p(-p); }

std::string DiscriminatorKey(DiscriminatorMode mode, std::string_view judge,
                             std::string_view aspect) {
  if (mode == DiscriminatorMode::kPerJudgeAspect) {
    return std::string(judge) + "@" + std::string(aspect);
  }
  return std::string(judge);
}

BtObjective::BtObjective(const DebiasedPairSet& input, Variant variant,
                         double epsilon)
    : variant_(variant),
      mode_(NominalMode(variant)),
      clamp_logit_(std::log1p(-epsilon) - std::log(epsilon)),
      catalog_(input.catalog()) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) {
    throw Error("epsilon must lie in (0, 0.5)");
  }
  const DebiasedPairSet pairs =
      IsHardVariant(variant) ? BinarizedPairs(input) : input;

  std::set<int> judges;
  std::set<std::pair<int, int>> block_keys;
  for (const PairGroup& g : pairs.groups()) {
    judges.insert(g.key.judge);
    block_keys.insert({g.key.context, g.key.aspect});
  }
  if (mode_ != DiscriminatorMode::kFixedUnit && judges.size() < 2) {
    mode_ = DiscriminatorMode::kFixedUnit;
    fell_back_ = true;
  }

  std::map<std::pair<int, int>, int> block_index;
  for (const auto& [context, aspect] : block_keys) {
    block_index[{context, aspect}] = static_cast<int>(blocks_.size());
    Block b;
    b.context = context;
    b.aspect = aspect;
    b.n_items = catalog_.ItemCount(context);
    b.offset = num_skills_;
    num_skills_ += b.n_items;
    blocks_.push_back(b);
  }

  std::map<std::string, std::pair<int, int>> keys;  // key -> (judge, aspect)
  if (mode_ != DiscriminatorMode::kFixedUnit) {
    for (const PairGroup& g : pairs.groups()) {
      keys.emplace(DiscriminatorKey(mode_, catalog_.judges[g.key.judge],
                                    catalog_.aspects[g.key.aspect]),
                   std::pair(g.key.judge, g.key.aspect));
    }
  }
  std::map<std::string, int> key_index;
  std::map<int, int> aspect_group;
  for (const auto& [key, judge_aspect] : keys) {
    key_index[key] = static_cast<int>(disc_keys_.size());
    disc_keys_.push_back(key);
    if (mode_ == DiscriminatorMode::kPerJudgeAspect) {
      auto [it, inserted] = aspect_group.emplace(
          judge_aspect.second, static_cast<int>(aspect_group.size()));
      disc_group_.push_back(it->second);
    } else {
      disc_group_.push_back(0);
    }
  }
  num_disc_groups_ =
      disc_keys_.empty()
          ? 0
          : *std::max_element(disc_group_.begin(), disc_group_.end()) + 1;

  for (const Block& b : blocks_) {
    if (mode_ == DiscriminatorMode::kFixedUnit) {
      block_group_.push_back(-1);
    } else if (mode_ == DiscriminatorMode::kPerJudgeAspect) {
      block_group_.push_back(aspect_group.at(b.aspect));
    } else {
      block_group_.push_back(0);
    }
  }

  terms_.resize(blocks_.size());
  for (const PairGroup& g : pairs.groups()) {
    const int b = block_index.at({g.key.context, g.key.aspect});
    int disc = -1;
    if (mode_ != DiscriminatorMode::kFixedUnit) {
      disc = key_index.at(DiscriminatorKey(mode_, catalog_.judges[g.key.judge],
                                           catalog_.aspects[g.key.aspect]));
    }
    for (const DebiasedPair& p : g.pairs) {
      terms_[b].push_back(Term{p.first, p.second, disc, p.prob_first});
    }
  }
}

std::vector<double> BtObjective::Flatten(const ModelParameters& params) const {
  if (params.skills.size() != blocks_.size() ||
      params.log_sigmas.size() != disc_keys_.size()) {
    throw Error("parameter shape does not match the comparison data");
  }
  std::vector<double> theta;
  theta.reserve(num_parameters());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    if (static_cast<int>(params.skills[b].size()) != blocks_[b].n_items) {
      throw Error("skill vector size does not match the context's items");
    }
    theta.insert(theta.end(), params.skills[b].begin(), params.skills[b].end());
  }
  theta.insert(theta.end(), params.log_sigmas.begin(), params.log_sigmas.end());
  return theta;
}

ModelParameters BtObjective::Unflatten(std::span<const double> theta) const {
  if (theta.size() != num_parameters()) {
    throw Error("parameter vector has the wrong length");
  }
  ModelParameters params;
  for (const Block& b : blocks_) {
    auto first = theta.begin() + static_cast<std::ptrdiff_t>(b.offset);
    params.skills.emplace_back(first, first + b.n_items);
  }
  params.log_sigmas.assign(
      theta.begin() + static_cast<std::ptrdiff_t>(num_skills_), theta.end());
  return params;
}

ModelParameters BtObjective::ZeroParameters() const {
  return Unflatten(std::vector<double>(num_parameters(), 0.0));
}

double BtObjective::TermSum(std::size_t block,
                            std::span<const double> theta) const {
  const double* s = theta.data() + blocks_[block].offset;
  const double* rho = theta.data() + num_skills_;
  double sum = 0.0;
  for (const Term& t : terms_[block]) {
    const double inv_sigma = t.disc < 0 ? 1.0 : std::exp(-rho[t.disc]);
    const double x = std::clamp((s[t.first] - s[t.second]) * inv_sigma,
                                -clamp_logit_, clamp_logit_);
    sum += t.p * x - Softplus(x);
  }
  return sum;
}

double BtObjective::LogLikelihood(std::span<const double> theta,
                                  WorkerPool* pool) const {
  std::vector<double> partial(blocks_.size(), 0.0);
  ForBlocks(pool, blocks_.size(),
            [&](std::size_t b) { partial[b] = TermSum(b, theta); });
  return std::accumulate(partial.begin(), partial.end(), 0.0);
}

double BtObjective::LogLikelihoodChange(std::span<const double> from,
                                        std::span<const double> to,
                                        WorkerPool* pool) const {
  // With x' = x + d, each term changes by
  //   p d - (softplus(x') - softplus(x)) = p d - log1p(logistic(x) expm1(d)).
  std::vector<double> partial(blocks_.size(), 0.0);
  ForBlocks(pool, blocks_.size(), [&](std::size_t b) {
    const double* s0 = from.data() + blocks_[b].offset;
    const double* s1 = to.data() + blocks_[b].offset;
    const double* r0 = from.data() + num_skills_;
    const double* r1 = to.data() + num_skills_;
    double sum = 0.0;
    for (const Term& t : terms_[b]) {
      const double k0 = t.disc < 0 ? 1.0 : std::exp(-r0[t.disc]);
      const double k1 = t.disc < 0 ? 1.0 : std::exp(-r1[t.disc]);
      const double x0 = std::clamp((s0[t.first] - s0[t.second]) * k0,
                                   -clamp_logit_, clamp_logit_);
      const double x1 = std::clamp((s1[t.first] - s1[t.second]) * k1,
                                   -clamp_logit_, clamp_logit_);
      const double d = x1 - x0;
      sum += t.p * d - std::log1p(Logistic(x0) * std::expm1(d));
    }
    partial[b] = sum;
  });
  return std::accumulate(partial.begin(), partial.end(), 0.0);
}

void BtObjective::Gradient(std::span<const double> theta,
                           std::span<double> grad, WorkerPool* pool) const {
  if (theta.size() != num_parameters() || grad.size() != num_parameters()) {
    throw Error("parameter vector has the wrong length");
  }
  const std::size_t n_disc = disc_keys_.size();
  std::vector<double> rho_partial(blocks_.size() * n_disc, 0.0);
  ForBlocks(pool, blocks_.size(), [&](std::size_t b) {
    const double* s = theta.data() + blocks_[b].offset;
    const double* rho = theta.data() + num_skills_;
    double* gs = grad.data() + blocks_[b].offset;
    double* gr = rho_partial.data() + b * n_disc;
    std::fill(gs, gs + blocks_[b].n_items, 0.0);
    for (const Term& t : terms_[b]) {
      const double inv_sigma = t.disc < 0 ? 1.0 : std::exp(-rho[t.disc]);
      const double x = (s[t.first] - s[t.second]) * inv_sigma;
      if (std::abs(x) >= clamp_logit_) continue;  // flat beyond the clamp
      const double r = t.p - Logistic(x);
      gs[t.first] += r * inv_sigma;
      gs[t.second] -= r * inv_sigma;
      if (t.disc >= 0) gr[t.disc] -= r * x;
    }
  });
  double* grho = grad.data() + num_skills_;
  std::fill(grho, grho + n_disc, 0.0);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (std::size_t d = 0; d < n_disc; ++d) {
      grho[d] += rho_partial[b * n_disc + d];
    }
  }
}

void BtObjective::ProjectGradient(std::span<double> grad) const {
  for (const Block& b : blocks_) {
    CenterRange(grad.subspan(b.offset, b.n_items));
  }
  for (int group = 0; group < num_disc_groups_; ++group) {
    const double mean = GroupMean(grad, group);
    for (std::size_t d = 0; d < disc_keys_.size(); ++d) {
      if (disc_group_[d] == group) grad[num_skills_ + d] -= mean;
    }
  }
}

double BtObjective::GroupMean(std::span<const double> theta, int group) const {
  double sum = 0.0;
  int count = 0;
  for (std::size_t d = 0; d < disc_keys_.size(); ++d) {
    if (disc_group_[d] != group) continue;
    sum += theta[num_skills_ + d];
    ++count;
  }
  return count == 0 ? 0.0 : sum / count;
}

void BtObjective::Normalize(std::span<double> theta) const {
  std::vector<double> shift(num_disc_groups_);
  for (int group = 0; group < num_disc_groups_; ++group) {
    shift[group] = GroupMean(theta, group);
  }
  for (std::size_t d = 0; d < disc_keys_.size(); ++d) {
    theta[num_skills_ + d] -= shift[disc_group_[d]];
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    std::span<double> s = theta.subspan(blocks_[b].offset, blocks_[b].n_items);
    CenterRange(s);
    if (block_group_[b] >= 0) {
      const double scale = std::exp(-shift[block_group_[b]]);
      for (double& v : s) v *= scale;
    }
  }
}

bool BtObjective::NewtonDirection(std::span<const double> theta,
                                  std::span<const double> grad,
                                  std::span<double> dir,
                                  bool freeze_discriminators,
                                  WorkerPool* pool) const {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  const int k = freeze_discriminators ? 0 : static_cast<int>(disc_keys_.size());
  const double* rho = theta.data() + num_skills_;

  // Per block: A = skill-skill curvature (shared by both matrices), B_gn and
  // B_ex = skill-discriminator coupling of the Gauss-Newton and the exact
  // negative Hessian, C_* = discriminator diagonal contributions.
  struct BlockSystem {
    Eigen::LLT<MatrixXd> llt;
    MatrixXd b_gn, b_ex;
    VectorXd c_gn, c_ex;
    MatrixXd ainv_b_gn, ainv_b_ex;
    VectorXd ainv_g;
  };
  std::vector<BlockSystem> systems(blocks_.size());
  ForBlocks(pool, blocks_.size(), [&](std::size_t bi) {
    const Block& blk = blocks_[bi];
    const double* s = theta.data() + blk.offset;
    const int n = blk.n_items;
    BlockSystem& sys = systems[bi];
    MatrixXd a = MatrixXd::Zero(n, n);
    sys.b_gn = MatrixXd::Zero(n, k);
    sys.b_ex = MatrixXd::Zero(n, k);
    sys.c_gn = VectorXd::Zero(k);
    sys.c_ex = VectorXd::Zero(k);
    for (const Term& t : terms_[bi]) {
      const double e = t.disc < 0 ? 1.0 : std::exp(-rho[t.disc]);
      const double x = (s[t.first] - s[t.second]) * e;
      if (std::abs(x) >= clamp_logit_) continue;
      const double q = Logistic(x);
      const double w = q * (1.0 - q);
      const double r = t.p - q;
      const double we2 = w * e * e;
      a(t.first, t.first) += we2;
      a(t.second, t.second) += we2;
      a(t.first, t.second) -= we2;
      a(t.second, t.first) -= we2;
      if (t.disc >= 0 && k > 0) {
        sys.b_gn(t.first, t.disc) -= w * e * x;
        sys.b_gn(t.second, t.disc) += w * e * x;
        sys.b_ex(t.first, t.disc) += -w * e * x + r * e;
        sys.b_ex(t.second, t.disc) += w * e * x - r * e;
        sys.c_gn(t.disc) += w * x * x;
        sys.c_ex(t.disc) += w * x * x - r * x;
      }
    }
    const double damping = 1e-9 * std::max(1.0, a.diagonal().maxCoeff());
    a.diagonal().array() += damping;
    sys.llt.compute(a);
    const Eigen::Map<const VectorXd> g(grad.data() + blk.offset, n);
    sys.ainv_g = sys.llt.solve(g);
    if (k > 0) {
      sys.ainv_b_gn = sys.llt.solve(sys.b_gn);
      sys.ainv_b_ex = sys.llt.solve(sys.b_ex);
    }
  });

  VectorXd d_rho = VectorXd::Zero(k);
  bool exact = true;
  if (k > 0) {
    const Eigen::Map<const VectorXd> g_rho(grad.data() + num_skills_, k);
    auto solve_schur = [&](bool use_exact, VectorXd* out) {
      MatrixXd schur = MatrixXd::Zero(k, k);
      VectorXd rhs = g_rho;
      for (const BlockSystem& sys : systems) {
        const MatrixXd& b = use_exact ? sys.b_ex : sys.b_gn;
        const MatrixXd& ainv_b = use_exact ? sys.ainv_b_ex : sys.ainv_b_gn;
        schur.diagonal() += use_exact ? sys.c_ex : sys.c_gn;
        schur.noalias() -= b.transpose() * ainv_b;
        rhs.noalias() -= b.transpose() * sys.ainv_g;
      }
      const double damping =
          1e-9 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
      schur.diagonal().array() += damping;
      Eigen::LLT<MatrixXd> llt(schur);
      if (llt.info() != Eigen::Success) return false;
      *out = llt.solve(rhs);
      return out->allFinite();
    };
    if (!solve_schur(true, &d_rho)) {
      exact = false;
      if (!solve_schur(false, &d_rho)) d_rho.setZero();
    }
  }

  std::fill(dir.begin(), dir.end(), 0.0);
  ForBlocks(pool, blocks_.size(), [&](std::size_t bi) {
    const BlockSystem& sys = systems[bi];
    VectorXd d = sys.ainv_g;
    if (k > 0) d.noalias() -= (exact ? sys.ainv_b_ex : sys.ainv_b_gn) * d_rho;
    std::copy(d.data(), d.data() + d.size(), dir.data() + blocks_[bi].offset);
  });
  for (int d = 0; d < k; ++d) dir[num_skills_ + d] = d_rho(d);
  return exact;
}

double BtObjective::LogLikelihood(const ModelParameters& params) const {
  return LogLikelihood(Flatten(params));
}

ModelParameters BtObjective::Gradient(const ModelParameters& params) const {
  std::vector<double> theta = Flatten(params);
  std::vector<double> grad(theta.size());
  Gradient(theta, grad);
  return Unflatten(grad);
}

const SkillBlock* FittedModel::FindBlock(int context, int aspect) const {
  for (const SkillBlock& b : blocks) {
    if (b.context == context && b.aspect == aspect) return &b;
  }
  return nullptr;
}

std::optional<double> FittedModel::Skill(std::string_view context,
                                         std::string_view aspect,
                                         std::string_view item) const {
  auto c = catalog.FindContext(context);
  auto a = catalog.FindAspect(aspect);
  if (!c || !a) return std::nullopt;
  auto i = catalog.FindItem(*c, item);
  const SkillBlock* b = FindBlock(*c, *a);
  if (!i || b == nullptr) return std::nullopt;
  return b->skills[*i];
}

std::optional<double> FittedModel::Sigma(std::string_view judge,
                                         std::string_view aspect) const {
  auto it = sigmas.find(DiscriminatorKey(mode, judge, aspect));
  if (it == sigmas.end()) return std::nullopt;
  return it->second;
}

FittedModel Fit(const DebiasedPairSet& pairs, Variant variant,
                const FitOptions& options) {
  if (pairs.groups().empty()) throw Error("empty dataset");
  if (!(options.tol > 0.0) || options.max_iter < 0) {
    throw Error("invalid fit options");
  }
  const BtObjective objective(pairs, variant, options.epsilon);
  const std::size_t n = objective.num_parameters();
  const std::size_t n_skills = objective.num_skills();

  FittedModel model;
  model.variant = variant;
  model.mode = objective.mode();
  model.catalog = objective.catalog();
  FitDiagnostics& diag = model.diagnostics;
  if (objective.fell_back()) {
    diag.warnings.push_back(
        "fewer than two judges: discriminator absorbed into skills, using "
        "fixed-unit mode");
  }

  std::vector<double> theta(n, 0.0);
  const bool frozen_sigmas = options.fixed_sigmas.has_value() &&
                             objective.mode() != DiscriminatorMode::kFixedUnit;
  if (frozen_sigmas) {
    const auto& keys = objective.discriminator_keys();
    for (std::size_t d = 0; d < keys.size(); ++d) {
      auto it = options.fixed_sigmas->find(keys[d]);
      if (it == options.fixed_sigmas->end() || !(it->second > 0.0)) {
        throw Error("missing or non-positive fixed sigma for " + keys[d]);
      }
      theta[n_skills + d] = std::log(it->second);
    }
  }

  // Frozen discriminators stay exactly as given; only skills are centered.
  auto canonicalize = [&](std::span<double> v) {
    if (!frozen_sigmas) {
      objective.Normalize(v);
      return;
    }
    for (const BtObjective::Block& b : objective.blocks()) {
      CenterRange(v.subspan(b.offset, b.n_items));
    }
  };

  std::unique_ptr<WorkerPool> pool;
  if (options.workers > 1) pool = std::make_unique<WorkerPool>(options.workers);

  constexpr double kArmijo = 1e-4;
  constexpr int kMaxHalvings = 80;
  double ll = objective.LogLikelihood(theta, pool.get());
  if (!std::isfinite(ll)) throw Error("fit diverged: non-finite likelihood");
  if (options.record_trace) diag.trace.push_back(ll);

  std::vector<double> grad(n), projected(n), dir(n), trial(n);
  // Backtracking from a unit step along `d`; accepts on sufficient increase.
  auto line_search = [&](std::span<const double> d, double slope) {
    double step = 1.0;
    for (int h = 0; h < kMaxHalvings; ++h, step *= 0.5) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = theta[i] + step * d[i];
      canonicalize(trial);
      const double change =
          objective.LogLikelihoodChange(theta, trial, pool.get());
      if (std::isfinite(change) && change > 0.0 && change >= kArmijo * step * slope) {
        theta.swap(trial);
        ll += change;
        return true;
      }
    }
    return false;
  };

  int iter = 0;
  for (;; ++iter) {
    objective.Gradient(theta, grad, pool.get());
    if (frozen_sigmas) {
      std::fill(grad.begin() + static_cast<std::ptrdiff_t>(n_skills),
                grad.end(), 0.0);
    }
    projected = grad;
    objective.ProjectGradient(projected);
    diag.gradient_inf_norm = InfNorm(projected);
    if (diag.gradient_inf_norm <= options.tol) {
      diag.converged = true;
      break;
    }
    if (iter >= options.max_iter) break;

    objective.NewtonDirection(theta, grad, dir, frozen_sigmas, pool.get());
    const double newton_slope = Dot(grad, dir);
    bool accepted = std::isfinite(newton_slope) && newton_slope > 0.0 &&
                    line_search(dir, newton_slope);
    if (!accepted) {
      accepted = line_search(projected, Dot(projected, projected));
    }
    if (!accepted) {
      diag.stalled = true;
      break;
    }
    if (options.record_trace) diag.trace.push_back(ll);
    if (!frozen_sigmas && LogSigmaSpread(theta, n_skills) > kMaxLogSigmaSpread) {
      diag.diverging = true;
      ++iter;
      break;
    }
  }
  diag.iterations = iter;
  diag.log_likelihood = objective.LogLikelihood(theta, pool.get());
  if (!std::isfinite(diag.log_likelihood)) {
    throw Error("fit diverged: non-finite likelihood");
  }
  if (diag.diverging) {
    diag.warnings.push_back(
        "stopped early: discriminator spread passed 1e8 and is still growing");
  }
  if (diag.stalled && !diag.converged) {
    diag.warnings.push_back("line search stalled before reaching tolerance");
  }

  for (const BtObjective::Block& b : objective.blocks()) {
    SkillBlock sb;
    sb.context = b.context;
    sb.aspect = b.aspect;
    sb.skills.assign(theta.begin() + static_cast<std::ptrdiff_t>(b.offset),
                     theta.begin() +
                         static_cast<std::ptrdiff_t>(b.offset + b.n_items));
    model.blocks.push_back(std::move(sb));
  }
  if (objective.mode() == DiscriminatorMode::kFixedUnit) {
    std::set<int> judges;
    for (const PairGroup& g : pairs.groups()) judges.insert(g.key.judge);
    for (int j : judges) model.sigmas[model.catalog.judges[j]] = 1.0;
  } else {
    const auto& keys = objective.discriminator_keys();
    for (std::size_t d = 0; d < keys.size(); ++d) {
      model.sigmas[keys[d]] = std::exp(theta[n_skills + d]);
    }
    if (LogSigmaSpread(theta, n_skills) > std::log(1e4)) {
      diag.warnings.push_back(
          "discriminator spread exceeds 1e4: some judge's outcomes are "
          "(nearly) separable and its sigma has no finite estimate");
    }
  }
  return model;
}

FittedModel Fit(const Dataset& dataset, Variant variant,
                const FitOptions& options) {
  return Fit(Symmetrize(dataset), variant, options);
}

std::string ModelToJson(const FittedModel& model, int indent) {
  nlohmann::ordered_json j;
  j["variant"] = VariantName(model.variant);
  j["discriminator_mode"] = ModeName(model.mode);
  nlohmann::ordered_json skills = nlohmann::ordered_json::object();
  for (const SkillBlock& b : model.blocks) {
    const std::string& context = model.catalog.contexts[b.context];
    nlohmann::ordered_json items = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < b.skills.size(); ++i) {
      items[model.catalog.items[b.context][i]] = b.skills[i];
    }
    skills[context][model.catalog.aspects[b.aspect]] = std::move(items);
  }
  j["skills"] = std::move(skills);
  nlohmann::ordered_json sigmas = nlohmann::ordered_json::object();
  for (const auto& [key, sigma] : model.sigmas) sigmas[key] = sigma;
  j["sigmas"] = std::move(sigmas);
  const FitDiagnostics& d = model.diagnostics;
  j["diagnostics"] = {{"log_likelihood", d.log_likelihood},
                      {"gradient_inf_norm", d.gradient_inf_norm},
                      {"iterations", d.iterations},
                      {"converged", d.converged},
                      {"stalled", d.stalled},
                      {"diverging", d.diverging},
                      {"warnings", d.warnings}};
  return j.dump(indent);
}

FittedModel ModelFromJson(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid model JSON");
  }
  try {
    FittedModel model;
    model.variant = ParseVariant(j.at("variant").get<std::string>());
    model.mode =
        j.contains("discriminator_mode")
            ? ParseMode(j.at("discriminator_mode").get<std::string>())
            : NominalMode(model.variant);

    std::map<std::string, std::set<std::string>> items;
    std::set<std::string> aspects, judges;
    for (const auto& [context, by_aspect] : j.at("skills").items()) {
      for (const auto& [aspect, by_item] : by_aspect.items()) {
        aspects.insert(aspect);
        for (const auto& [item, s] : by_item.items()) items[context].insert(item);
      }
    }
    for (const auto& [key, sigma] : j.at("sigmas").items()) {
      model.sigmas[key] = sigma.get<double>();
      if (model.mode == DiscriminatorMode::kPerJudgeAspect) {
        const auto at = key.rfind('@');
        if (at == std::string::npos) throw Error("bad discriminator key " + key);
        judges.insert(key.substr(0, at));
      } else {
        judges.insert(key);
      }
    }
    Catalog& c = model.catalog;
    for (auto& [context, names] : items) {
      c.contexts.push_back(context);
      c.items.emplace_back(names.begin(), names.end());
    }
    c.aspects.assign(aspects.begin(), aspects.end());
    c.judges.assign(judges.begin(), judges.end());
    for (const auto& [context, by_aspect] : j.at("skills").items()) {
      const int ci = *c.FindContext(context);
      for (const auto& [aspect, by_item] : by_aspect.items()) {
        SkillBlock b;
        b.context = ci;
        b.aspect = *c.FindAspect(aspect);
        b.skills.assign(c.items[ci].size(), 0.0);
        for (const auto& [item, s] : by_item.items()) {
          b.skills[*c.FindItem(ci, item)] = s.get<double>();
        }
        model.blocks.push_back(std::move(b));
      }
    }
    std::sort(model.blocks.begin(), model.blocks.end(),
              [](const SkillBlock& a, const SkillBlock& b) {
                return std::pair(a.context, a.aspect) <
                       std::pair(b.context, b.aspect);
              });
    if (j.contains("diagnostics")) {
      const auto& d = j.at("diagnostics");
      model.diagnostics.log_likelihood = d.value("log_likelihood", 0.0);
      model.diagnostics.gradient_inf_norm = d.value("gradient_inf_norm", 0.0);
      model.diagnostics.iterations = d.value("iterations", 0);
      model.diagnostics.converged = d.value("converged", false);
      model.diagnostics.stalled = d.value("stalled", false);
      model.diagnostics.diverging = d.value("diverging", false);
      model.diagnostics.warnings =
          d.value("warnings", std::vector<std::string>{});
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace jurybt
