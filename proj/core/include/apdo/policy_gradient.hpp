/*
 * Copyright 2026 The APDO Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "apdo/cmdp.hpp"
#include "apdo/environment.hpp"
#include "apdo/policy.hpp"

namespace apdo {

struct GaeConfig {
  double gae_lambda = 0.95;
  double gamma = 0.995;

  void validate() const;
};

/// A_t = sum_l (gamma * lambda)^l delta_{t+l} with
/// delta_t = r_t + gamma V(s_{t+1}) - V(s_t). `values[t]` is V(s_t) and
/// `bootstrap` is V(s_T) after the last step (0 for a terminal state).
std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                   double bootstrap, const GaeConfig& cfg);

/// Per-step signal of one channel: 0 is the reward, i + 1 is cost i.
double channel_signal(const Transition& tr, std::size_t channel);

/// GAE for one channel of a trajectory. Terminal trajectories bootstrap with
/// 0; time-limited or budget-cut ones with the baseline at the final state.
std::vector<double> gae_advantages(const Trajectory& traj, const ValueBaseline& baseline,
                                   std::size_t channel, const GaeConfig& cfg);

/// Rolls out `policy` until exactly `batch_size` transitions are collected.
/// Episodes end on terminal states or at env.horizon(); the last episode is
/// cut (EpisodeEnd::kBudget) when the budget runs out mid-episode.
std::vector<Trajectory> sample_batch(Environment& env, const SoftmaxPolicy& policy,
                                     std::size_t batch_size, Rng& rng,
                                     const std::string& policy_id = {});
/// Same, with action draws and environment draws on separate streams.
std::vector<Trajectory> sample_batch(Environment& env, const SoftmaxPolicy& policy,
                                     std::size_t batch_size, Rng& action_rng, Rng& env_rng,
                                     const std::string& policy_id = {});
std::vector<Trajectory> sample_batch(Environment& env, const SoftmaxPolicy& policy,
                                     std::size_t batch_size, std::uint64_t seed);

enum class AdvantageNormalization {
  kNone,
  /// Standardize the combined A^R - sum_i lambda_i A^C_i.
  kCombined,
  /// Standardize A^R and every A^C_i separately, then combine.
  kPerChannel,
};

struct PolicyGradientConfig {
  GaeConfig gae;
  AdvantageNormalization normalization = AdvantageNormalization::kCombined;
  /// Weight of the mean policy entropy added to the objective.
  double entropy_coef = 0.0;
};

struct LagrangianGradient {
  Eigen::VectorXd gradient;
  /// Per channel, flattened over the batch: A_t + V(s_t), the regression
  /// targets for the baselines.
  std::vector<std::vector<double>> value_targets;
  std::vector<const Observation*> states;
  double mean_entropy = 0.0;
};

/// Likelihood-ratio estimate of the gradient of
/// R(pi) - sum_i lambda_i (C_i(pi) - d_i) (+ entropy bonus), averaged over
/// the transitions of the batch. Throws on an empty batch.
LagrangianGradient lagrangian_policy_gradient(std::span<const Trajectory> batch,
                                              const SoftmaxPolicy& policy,
                                              const ValueBaseline& baseline_r,
                                              std::span<const ValueBaseline* const> baseline_c,
                                              std::span<const double> lambda,
                                              const PolicyGradientConfig& cfg);

inline constexpr double kDefaultClipNorm = 10.0;

/// theta <- theta + alpha * g, with g rescaled to norm `clip_norm` if longer.
/// Returns the norm of g before clipping.
double policy_update(SoftmaxPolicy& policy, const Eigen::VectorXd& gradient, double alpha,
                     double clip_norm = kDefaultClipNorm);

/// Exact gradient of the Lagrangian R - sum_i lambda_i (C_i - d_i) with
/// respect to the logits of a tabular softmax policy.
Eigen::VectorXd exact_policy_gradient(const TabularCmdp& cmdp, const TabularSoftmaxPolicy& policy,
                                      std::span<const double> lambda);

struct OnPolicyConfig {
  PolicyGradientConfig pg;
  double alpha = 1.0;
  double clip_norm = kDefaultClipNorm;
};

/// Policy plus one baseline per signal channel.
class OnPolicyLearner {
 public:
  OnPolicyLearner(std::unique_ptr<SoftmaxPolicy> policy, std::unique_ptr<ValueBaseline> reward,
                  std::vector<std::unique_ptr<ValueBaseline>> costs, OnPolicyConfig cfg);

  const SoftmaxPolicy& policy() const { return *policy_; }
  SoftmaxPolicy& mutable_policy() { return *policy_; }
  const ValueBaseline& reward_baseline() const { return *reward_; }
  const ValueBaseline& cost_baseline(std::size_t i) const { return *costs_[i]; }
  const OnPolicyConfig& config() const { return cfg_; }

  /// One primal ascent step at fixed lambda, then a baseline refit.
  /// Returns the gradient norm before clipping.
  double update(std::span<const Trajectory> batch, std::span<const double> lambda, Rng& rng);

 private:
  std::unique_ptr<SoftmaxPolicy> policy_;
  std::unique_ptr<ValueBaseline> reward_;
  std::vector<std::unique_ptr<ValueBaseline>> costs_;
  OnPolicyConfig cfg_;
};

}  // namespace apdo
