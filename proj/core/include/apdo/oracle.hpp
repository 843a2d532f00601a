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

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "apdo/cmdp.hpp"

namespace apdo {

/// No policy satisfies the constraint.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimal deterministic policy of the scalarized MDP with per-step signal
/// R - sum_i lambda_i C_i, together with its exact (R, C, L).
struct LagrangianSolution {
  std::vector<std::size_t> actions;
  double reward = 0.0;
  std::vector<double> costs;
  double lagrangian = 0.0;
  Eigen::VectorXd values;  ///< scalarized state values
  std::size_t sweeps = 0;  ///< value-iteration sweeps used
};

struct LagrangianOptions {
  double residual_tolerance = 1e-10;
  std::size_t max_sweeps = 10'000'000;
};

/// Value iteration to a sup-norm residual below `residual_tolerance`,
/// followed by exact policy-iteration polishing. Ties go to the lowest
/// action index.
LagrangianSolution solve_lagrangian_mdp(const TabularCmdp& cmdp, std::span<const double> lambda,
                                        const LagrangianOptions& options = {});

/// Trajectory-level mixture: follow `high_cost` with probability `weight`,
/// `low_cost` otherwise.
struct PolicyMixture {
  std::vector<std::size_t> high_cost;
  std::vector<std::size_t> low_cost;
  double weight = 1.0;

  /// Stationary stochastic policy with the same discounted occupancy
  /// measure (and hence the same R and C) as the mixture.
  TabularPolicy stationary(const TabularCmdp& cmdp) const;
};

struct BisectionIterate {
  double lambda = 0.0;
  double cost = 0.0;
};

struct DualSolution {
  double lambda_star = 0.0;
  double lambda_low = 0.0;   ///< bracket end where C(pi_lambda) > d
  double lambda_high = 0.0;  ///< bracket end where C(pi_lambda) <= d
  PolicyMixture mixture;
  double reward_star = 0.0;
  double cost_star = 0.0;
  std::vector<BisectionIterate> iterates;
};

struct BisectionOptions {
  double bracket_tolerance = 1e-9;
  double lambda_cap = 1048576.0;  ///< 2^20
  LagrangianOptions inner;
};

/// Exact solution of a single-constraint CMDP: bisection on the subgradient
/// C(pi_lambda) - d of the dual function, then the mixture of the two
/// deterministic policies at the breakpoint that meets the limit exactly.
DualSolution solve_dual_bisection(const TabularCmdp& cmdp, const BisectionOptions& options = {});

struct FrontierPoint {
  double cost = 0.0;
  double reward = 0.0;
};

struct EnumerationResult {
  std::optional<double> best_feasible_value;
  /// Pareto-optimal (cost, reward) points of deterministic policies, by cost.
  std::vector<FrontierPoint> frontier;
  std::size_t num_policies = 0;
  std::vector<std::size_t> decision_states;
};

inline constexpr std::size_t kMaxEnumeratedPolicies = 1'000'000;

/// States reachable from the initial distribution whose action rows are not
/// all identical. Only these affect R(pi) and C(pi).
std::vector<std::size_t> decision_states(const TabularCmdp& cmdp);

/// Evaluates every deterministic stationary policy exactly and returns the
/// best value achievable by mixing two of them under the constraint.
/// Throws std::length_error when there are more than 10^6 policies.
EnumerationResult brute_force_enumerate(const TabularCmdp& cmdp);

}  // namespace apdo
