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

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apdo {

inline constexpr std::size_t kNoIndex = std::numeric_limits<std::size_t>::max();

/// What a learner sees of an environment state. `index` is set when the
/// environment has an enumerable state space (tabular policies need it),
/// `features` always.
struct Observation {
  std::size_t index = kNoIndex;
  Eigen::VectorXd features;

  bool operator==(const Observation& other) const {
    return index == other.index && features.size() == other.features.size() &&
           features == other.features;
  }
};

/// One step of experience (s, a, r, c, s'). Costs are always a vector, one
/// entry per constraint, even when there is a single constraint.
struct Transition {
  Observation state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> costs;
  Observation next_state;
  /// next_state is absorbing: no bootstrapping past it.
  bool terminal = false;
};

/// Why a trajectory stopped.
enum class EpisodeEnd {
  kTerminal,   ///< reached an absorbing state
  kTimeLimit,  ///< hit the evaluation horizon of an infinite-horizon task
  kBudget,     ///< cut short because the sampling budget ran out
};

struct Trajectory {
  std::vector<Transition> transitions;
  std::string policy_id;
  std::uint64_t seed = 0;
  EpisodeEnd end = EpisodeEnd::kTerminal;

  /// Complete trajectories are valid Monte-Carlo samples of R(pi) and C(pi).
  bool complete() const { return end != EpisodeEnd::kBudget; }
  std::size_t size() const { return transitions.size(); }
  bool empty() const { return transitions.empty(); }
};

/// Throws std::invalid_argument when consecutive transitions are not chained
/// or cost vectors have inconsistent length.
void validate_trajectory(const Trajectory& traj, std::size_t num_constraints);

/// Lagrange multipliers together with the sequence of values they took.
/// Every component is non-negative at all times.
class DualState {
 public:
  explicit DualState(std::size_t num_constraints, double initial = 0.0);
  explicit DualState(std::vector<double> initial);

  const std::vector<double>& lambda() const { return lambda_; }
  const std::vector<std::vector<double>>& history() const { return history_; }
  std::size_t size() const { return lambda_.size(); }

  /// Records a completed dual update.
  void push(std::vector<double> next);
  /// Replaces the current multipliers without counting a new update (the
  /// most recent history entry is rewritten).
  void assign(std::vector<double> value);

 private:
  static void check_nonnegative(const std::vector<double>& v);

  std::vector<double> lambda_;
  std::vector<std::vector<double>> history_;
};

/// One possible successor of a state-action pair.
struct Outcome {
  std::size_t next_state = 0;
  double probability = 0.0;
  double reward = 0.0;
  std::vector<double> costs;
};

/// Dense 3-tensor indexed [s][a][s'].
using Tensor3 = std::vector<std::vector<std::vector<double>>>;

/// Finite constrained MDP. Transitions are stored sparsely: only successors
/// with positive probability are kept.
class TabularCmdp {
 public:
  TabularCmdp(std::size_t num_states, std::size_t num_actions,
              std::size_t num_constraints,
              std::vector<std::vector<Outcome>> outcomes,
              std::vector<double> limits, double gamma,
              std::vector<double> initial_dist);

  static TabularCmdp from_dense(const Tensor3& transition, const Tensor3& reward,
                                const std::vector<Tensor3>& costs,
                                std::vector<double> limits, double gamma,
                                std::vector<double> initial_dist);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t num_constraints() const { return limits_.size(); }
  double gamma() const { return gamma_; }
  const std::vector<double>& limits() const { return limits_; }
  const std::vector<double>& initial_dist() const { return initial_dist_; }

  std::span<const Outcome> outcomes(std::size_t s, std::size_t a) const {
    return outcomes_[s * num_actions_ + a];
  }

  double transition(std::size_t s, std::size_t a, std::size_t next) const;
  double reward(std::size_t s, std::size_t a, std::size_t next) const;
  double cost(std::size_t i, std::size_t s, std::size_t a, std::size_t next) const;

  double expected_reward(std::size_t s, std::size_t a) const;
  double expected_cost(std::size_t i, std::size_t s, std::size_t a) const;

  /// Largest |reward| or |cost| over all transitions with positive probability.
  double max_abs_signal() const;

  TabularCmdp with_limits(std::vector<double> limits) const;

  Tensor3 dense_transition() const;
  Tensor3 dense_reward() const;
  Tensor3 dense_cost(std::size_t i) const;

 private:
  const Outcome* find(std::size_t s, std::size_t a, std::size_t next) const;

  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<std::vector<Outcome>> outcomes_;
  std::vector<double> limits_;
  double gamma_;
  std::vector<double> initial_dist_;
};

/// Row-stochastic |S| x |A| matrix of action probabilities.
using TabularPolicy = Eigen::MatrixXd;

TabularPolicy deterministic_policy(std::span<const std::size_t> actions,
                                   std::size_t num_actions);
TabularPolicy uniform_policy(std::size_t num_states, std::size_t num_actions);

struct PolicyValue {
  double reward = 0.0;
  std::vector<double> costs;
};

/// sum_t gamma^t values[t]
double discounted_sum(std::span<const double> values, double gamma);

double trajectory_return(const Trajectory& traj, double gamma);
std::vector<double> trajectory_cost(const Trajectory& traj, double gamma);

/// Smallest H with gamma^H * max_abs <= tolerance.
std::size_t truncation_horizon(double gamma, double max_abs, double tolerance = 1e-3);

/// Per-state value of one signal channel under `policy`. Channel 0 is the
/// reward; channel i + 1 is cost i.
Eigen::VectorXd state_values(const TabularCmdp& cmdp, const TabularPolicy& policy,
                             std::size_t channel);

/// Exact R(pi) and C_i(pi) from a direct solve of (I - gamma P_pi) V = r_pi.
PolicyValue evaluate_policy_exact(const TabularCmdp& cmdp, const TabularPolicy& policy);

/// Discounted state occupancy p0^T (I - gamma P_pi)^{-1}.
Eigen::VectorXd discounted_occupancy(const TabularCmdp& cmdp, const TabularPolicy& policy);

/// R - sum_i lambda_i (C_i - d_i)
double lagrangian_value(double reward, std::span<const double> costs,
                        std::span<const double> limits, std::span<const double> lambda);

TabularCmdp cmdp_from_json(std::string_view text);
std::string cmdp_to_json(const TabularCmdp& cmdp);
TabularCmdp load_cmdp(const std::string& path);
void save_cmdp(const TabularCmdp& cmdp, const std::string& path);

}  // namespace apdo
