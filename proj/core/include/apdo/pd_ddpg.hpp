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

#include <span>
#include <vector>

#include "apdo/cmdp.hpp"
#include "apdo/mlp.hpp"
#include "apdo/random.hpp"

namespace apdo {

/// Bounded FIFO of transitions. Once full, each push evicts the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition tr);
  void push(const Trajectory& traj);

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }

  /// i-th oldest stored transition.
  const Transition& operator[](std::size_t i) const;

  /// `n` draws, uniform with replacement. Throws std::logic_error if empty.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::vector<Transition> items_;
  std::size_t head_ = 0;  // slot of the oldest entry once full
};

struct PdDdpgConfig {
  std::vector<std::size_t> critic_hidden{100, 100};
  std::vector<std::size_t> actor_hidden{64, 32};
  double critic_lr = 1e-3;
  double actor_lr = 1e-3;
  double dual_lr = 1e-2;
  double tau = 1e-3;
  std::size_t minibatch = 64;
  double gamma = 0.995;
  std::vector<double> limits;
  std::size_t iterations = 50000;
  /// Caps the iteration count at ceil(updates_per_sample * buffer size);
  /// 0 disables the cap.
  double updates_per_sample = 1.0;
  /// Std of the Gaussian noise added to actor logits when exploring.
  double explore_sigma = 0.1;
  /// Weight of the policy entropy in the actor objective.
  double actor_entropy = 0.0;

  void validate() const;
};

/// Multipliers after every dual update, in order.
using DualTrace = std::vector<std::vector<double>>;

/// Componentwise mean of the trace. Throws on an empty trace.
std::vector<double> average_dual_trace(const DualTrace& trace);

struct CriticTargets {
  Eigen::RowVectorXd reward;  ///< y_i
  Eigen::MatrixXd costs;      ///< z_i, one row per constraint
};

struct CriticLosses {
  double reward = 0.0;
  std::vector<double> costs;
};

/// Primal-dual DDPG over a discrete action set. Critics output Q(s, .) for
/// every action; the actor outputs softmax logits and Q(s, mu(s)) is read as
/// sum_a pi(a|s) Q(s, a).
class PrimalDualDdpg {
 public:
  PrimalDualDdpg(std::size_t feature_dim, std::size_t num_actions, PdDdpgConfig cfg,
                 Rng& init_rng);

  std::size_t num_constraints() const { return cfg_.limits.size(); }
  const PdDdpgConfig& config() const { return cfg_; }

  /// y = r + gamma sum_a pi'(a|s') Q'_R(s', a), z likewise per cost; the
  /// bootstrap is dropped for terminal transitions.
  CriticTargets critic_targets(std::span<const Transition* const> batch) const;
  /// One Adam step on the mean squared error of every critic at the taken
  /// actions. Returns the losses before the step.
  CriticLosses critic_update(std::span<const Transition* const> batch, const CriticTargets& targets);
  /// Actor ascent on sum_a pi(a|s)(Q_R - lambda . Q_C), then projected dual
  /// ascent on mean sum_a pi(a|s) Q_C - d. Appends to the dual trace.
  void actor_dual_update(std::span<const Transition* const> batch);
  void update_targets();
  /// Targets, critic update, actor/dual update, soft target update.
  void train_step(std::span<const Transition* const> batch);

  /// Samples from softmax(logits + sigma * noise), or from softmax(logits)
  /// when `explore` is false.
  std::size_t act(const Observation& obs, Rng& rng, bool explore) const;
  Eigen::VectorXd action_probabilities(const Observation& obs) const;

  const std::vector<double>& lambda() const { return lambda_; }
  void set_lambda(std::vector<double> lambda);
  const DualTrace& dual_trace() const { return trace_; }

  const Mlp& reward_critic() const { return q_r_; }
  const Mlp& cost_critic(std::size_t i) const { return q_c_[i]; }
  const Mlp& actor() const { return actor_; }
  const Mlp& target_reward_critic() const { return q_r_target_; }
  const Mlp& target_cost_critic(std::size_t i) const { return q_c_target_[i]; }
  const Mlp& target_actor() const { return actor_target_; }
  Mlp& mutable_reward_critic() { return q_r_; }
  Mlp& mutable_cost_critic(std::size_t i) { return q_c_[i]; }
  Mlp& mutable_actor() { return actor_; }

 private:
  Eigen::MatrixXd stack_states(std::span<const Transition* const> batch, bool next) const;

  PdDdpgConfig cfg_;
  Mlp q_r_, q_r_target_;
  std::vector<Mlp> q_c_, q_c_target_;
  Mlp actor_, actor_target_;
  AdamState adam_q_r_;
  std::vector<AdamState> adam_q_c_;
  AdamState adam_actor_;
  std::vector<double> lambda_;
  DualTrace trace_;
};

struct LambdaOffResult {
  std::vector<double> lambda_off;  ///< mean of the dual trace
  std::vector<double> final_lambda;
  std::size_t iterations = 0;
};

/// Trains a fresh primal-dual DDPG agent purely from replayed transitions
/// (multipliers start at 0) and returns the averaged multiplier trace.
/// Throws std::logic_error on an empty buffer.
LambdaOffResult train_lambda_off(const ReplayBuffer& buffer, std::size_t num_actions,
                                 const PdDdpgConfig& cfg, std::uint64_t seed);

}  // namespace apdo
