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

#include "apdo/cmdp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace apdo {

namespace {

constexpr double kProbabilityTolerance = 1e-12;

std::string where(std::size_t s, std::size_t a) {
  return "(s=" + std::to_string(s) + ", a=" + std::to_string(a) + ")";
}

}  // namespace

void validate_trajectory(const Trajectory& traj, std::size_t num_constraints) {
  for (std::size_t t = 0; t < traj.transitions.size(); ++t) {
    const auto& tr = traj.transitions[t];
    if (tr.costs.size() != num_constraints) {
      throw std::invalid_argument("transition " + std::to_string(t) + " has " +
                                  std::to_string(tr.costs.size()) + " costs, expected " +
                                  std::to_string(num_constraints));
    }
    if (t + 1 < traj.transitions.size()) {
      if (tr.terminal) {
        throw std::invalid_argument("terminal transition " + std::to_string(t) +
                                    " is not the last one");
      }
      if (!(tr.next_state == traj.transitions[t + 1].state)) {
        throw std::invalid_argument("transitions " + std::to_string(t) + " and " +
                                    std::to_string(t + 1) + " are not chained");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// DualState

DualState::DualState(std::size_t num_constraints, double initial)
    : lambda_(num_constraints, initial) {
  check_nonnegative(lambda_);
}

DualState::DualState(std::vector<double> initial) : lambda_(std::move(initial)) {
  check_nonnegative(lambda_);
}

void DualState::check_nonnegative(const std::vector<double>& v) {
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument("dual variable must be finite and non-negative, got " +
                                  std::to_string(x));
    }
  }
}

void DualState::push(std::vector<double> next) {
  if (next.size() != lambda_.size()) {
    throw std::invalid_argument("dual update has wrong dimension");
  }
  check_nonnegative(next);
  lambda_ = next;
  history_.push_back(std::move(next));
}

void DualState::assign(std::vector<double> value) {
  if (value.size() != lambda_.size()) {
    throw std::invalid_argument("dual assignment has wrong dimension");
  }
  check_nonnegative(value);
  lambda_ = value;
  if (!history_.empty()) history_.back() = std::move(value);
}

// ---------------------------------------------------------------------------
// TabularCmdp

TabularCmdp::TabularCmdp(std::size_t num_states, std::size_t num_actions,
                         std::size_t num_constraints,
                         std::vector<std::vector<Outcome>> outcomes,
                         std::vector<double> limits, double gamma,
                         std::vector<double> initial_dist)
    : num_states_(num_states),
      num_actions_(num_actions),
      outcomes_(std::move(outcomes)),
      limits_(std::move(limits)),
      gamma_(gamma),
      initial_dist_(std::move(initial_dist)) {
  if (num_states_ == 0 || num_actions_ == 0) {
    throw std::invalid_argument("CMDP needs at least one state and one action");
  }
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1), got " + std::to_string(gamma_));
  }
  if (limits_.size() != num_constraints) {
    throw std::invalid_argument("limits has length " + std::to_string(limits_.size()) +
                                " but there are " + std::to_string(num_constraints) +
                                " cost tensors");
  }
  if (outcomes_.size() != num_states_ * num_actions_) {
    throw std::invalid_argument("outcome table has wrong size");
  }
  if (initial_dist_.size() != num_states_) {
    throw std::invalid_argument("initial_dist has wrong length");
  }
  double p0_total = 0.0;
  for (double p : initial_dist_) {
    if (!(p >= 0.0)) throw std::invalid_argument("initial_dist has a negative entry");
    p0_total += p;
  }
  if (std::abs(p0_total - 1.0) > kProbabilityTolerance) {
    throw std::invalid_argument("initial_dist sums to " + std::to_string(p0_total));
  }
  for (std::size_t s = 0; s < num_states_; ++s) {
    for (std::size_t a = 0; a < num_actions_; ++a) {
      auto& row = outcomes_[s * num_actions_ + a];
      std::sort(row.begin(), row.end(),
                [](const Outcome& x, const Outcome& y) { return x.next_state < y.next_state; });
      double total = 0.0;
      for (std::size_t k = 0; k < row.size(); ++k) {
        const auto& o = row[k];
        if (o.next_state >= num_states_) {
          throw std::invalid_argument("successor out of range at " + where(s, a));
        }
        if (k > 0 && row[k - 1].next_state == o.next_state) {
          throw std::invalid_argument("duplicate successor at " + where(s, a));
        }
        if (!(o.probability >= 0.0)) {
          throw std::invalid_argument("negative probability at " + where(s, a));
        }
        if (o.costs.size() != num_constraints) {
          throw std::invalid_argument("cost vector has wrong length at " + where(s, a));
        }
        total += o.probability;
      }
      if (std::abs(total - 1.0) > kProbabilityTolerance) {
        throw std::invalid_argument("transition row " + where(s, a) + " sums to " +
                                    std::to_string(total));
      }
      std::erase_if(row, [](const Outcome& o) { return o.probability == 0.0; });
    }
  }
}

TabularCmdp TabularCmdp::from_dense(const Tensor3& transition, const Tensor3& reward,
                                    const std::vector<Tensor3>& costs,
                                    std::vector<double> limits, double gamma,
                                    std::vector<double> initial_dist) {
  const std::size_t ns = transition.size();
  const std::size_t na = ns > 0 ? transition[0].size() : 0;
  auto check_shape = [&](const Tensor3& t, const char* name) {
    bool ok = t.size() == ns;
    for (std::size_t s = 0; ok && s < ns; ++s) {
      ok = t[s].size() == na;
      for (std::size_t a = 0; ok && a < na; ++a) ok = t[s][a].size() == ns;
    }
    if (!ok) throw std::invalid_argument(std::string(name) + " tensor has inconsistent shape");
  };
  check_shape(transition, "transition");
  check_shape(reward, "reward");
  for (const auto& c : costs) check_shape(c, "cost");

  std::vector<std::vector<Outcome>> outcomes(ns * na);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      for (std::size_t n = 0; n < ns; ++n) {
        const double p = transition[s][a][n];
        if (p < 0.0) throw std::invalid_argument("negative probability at " + where(s, a));
        if (p == 0.0) continue;
        Outcome o{n, p, reward[s][a][n], {}};
        o.costs.reserve(costs.size());
        for (const auto& c : costs) o.costs.push_back(c[s][a][n]);
        outcomes[s * na + a].push_back(std::move(o));
      }
    }
  }
  return TabularCmdp(ns, na, costs.size(), std::move(outcomes), std::move(limits), gamma,
                     std::move(initial_dist));
}

const Outcome* TabularCmdp::find(std::size_t s, std::size_t a, std::size_t next) const {
  const auto row = outcomes(s, a);
  auto it = std::lower_bound(row.begin(), row.end(), next,
                             [](const Outcome& o, std::size_t n) { return o.next_state < n; });
  if (it == row.end() || it->next_state != next) return nullptr;
  return &*it;
}

double TabularCmdp::transition(std::size_t s, std::size_t a, std::size_t next) const {
  const Outcome* o = find(s, a, next);
  return o ? o->probability : 0.0;
}

double TabularCmdp::reward(std::size_t s, std::size_t a, std::size_t next) const {
  const Outcome* o = find(s, a, next);
  return o ? o->reward : 0.0;
}

double TabularCmdp::cost(std::size_t i, std::size_t s, std::size_t a,
                         std::size_t next) const {
  const Outcome* o = find(s, a, next);
  return o ? o->costs.at(i) : 0.0;
}

double TabularCmdp::expected_reward(std::size_t s, std::size_t a) const {
  double total = 0.0;
  for (const auto& o : outcomes(s, a)) total += o.probability * o.reward;
  return total;
}

double TabularCmdp::expected_cost(std::size_t i, std::size_t s, std::size_t a) const {
  double total = 0.0;
  for (const auto& o : outcomes(s, a)) total += o.probability * o.costs[i];
  return total;
}

double TabularCmdp::max_abs_signal() const {
  double m = 0.0;
  for (const auto& row : outcomes_) {
    for (const auto& o : row) {
      m = std::max(m, std::abs(o.reward));
      for (double c : o.costs) m = std::max(m, std::abs(c));
    }
  }
  return m;
}

TabularCmdp TabularCmdp::with_limits(std::vector<double> limits) const {
  return TabularCmdp(num_states_, num_actions_, limits_.size(), outcomes_, std::move(limits),
                     gamma_, initial_dist_);
}

Tensor3 TabularCmdp::dense_transition() const {
  Tensor3 t(num_states_, std::vector<std::vector<double>>(
                             num_actions_, std::vector<double>(num_states_, 0.0)));
  for (std::size_t s = 0; s < num_states_; ++s)
    for (std::size_t a = 0; a < num_actions_; ++a)
      for (const auto& o : outcomes(s, a)) t[s][a][o.next_state] = o.probability;
  return t;
}

Tensor3 TabularCmdp::dense_reward() const {
  Tensor3 t(num_states_, std::vector<std::vector<double>>(
                             num_actions_, std::vector<double>(num_states_, 0.0)));
  for (std::size_t s = 0; s < num_states_; ++s)
    for (std::size_t a = 0; a < num_actions_; ++a)
      for (const auto& o : outcomes(s, a)) t[s][a][o.next_state] = o.reward;
  return t;
}

Tensor3 TabularCmdp::dense_cost(std::size_t i) const {
  Tensor3 t(num_states_, std::vector<std::vector<double>>(
                             num_actions_, std::vector<double>(num_states_, 0.0)));
  for (std::size_t s = 0; s < num_states_; ++s)
    for (std::size_t a = 0; a < num_actions_; ++a)
      for (const auto& o : outcomes(s, a)) t[s][a][o.next_state] = o.costs.at(i);
  return t;
}

// ---------------------------------------------------------------------------
// Policies and evaluation

TabularPolicy deterministic_policy(std::span<const std::size_t> actions,
                                   std::size_t num_actions) {
  TabularPolicy pi = TabularPolicy::Zero(static_cast<Eigen::Index>(actions.size()),
                                         static_cast<Eigen::Index>(num_actions));
  for (std::size_t s = 0; s < actions.size(); ++s) {
    if (actions[s] >= num_actions) throw std::invalid_argument("action out of range");
    pi(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(actions[s])) = 1.0;
  }
  return pi;
}

TabularPolicy uniform_policy(std::size_t num_states, std::size_t num_actions) {
  return TabularPolicy::Constant(static_cast<Eigen::Index>(num_states),
                                 static_cast<Eigen::Index>(num_actions),
                                 1.0 / static_cast<double>(num_actions));
}

double discounted_sum(std::span<const double> values, double gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (double v : values) {
    total += weight * v;
    weight *= gamma;
  }
  return total;
}

double trajectory_return(const Trajectory& traj, double gamma) {
  double total = 0.0;
  double weight = 1.0;
  for (const auto& tr : traj.transitions) {
    total += weight * tr.reward;
    weight *= gamma;
  }
  return total;
}

std::vector<double> trajectory_cost(const Trajectory& traj, double gamma) {
  std::vector<double> total;
  double weight = 1.0;
  for (const auto& tr : traj.transitions) {
    if (total.empty()) total.assign(tr.costs.size(), 0.0);
    for (std::size_t i = 0; i < tr.costs.size(); ++i) total[i] += weight * tr.costs[i];
    weight *= gamma;
  }
  return total;
}

std::size_t truncation_horizon(double gamma, double max_abs, double tolerance) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (max_abs <= tolerance) return 1;
  if (gamma == 0.0) return 1;
  auto h = static_cast<std::size_t>(std::ceil(std::log(tolerance / max_abs) / std::log(gamma)));
  // guard against rounding right at the boundary
  while (h > 0 && std::pow(gamma, static_cast<double>(h - 1)) * max_abs <= tolerance) --h;
  while (std::pow(gamma, static_cast<double>(h)) * max_abs > tolerance) ++h;
  return std::max<std::size_t>(h, 1);
}

namespace {

void check_policy(const TabularCmdp& cmdp, const TabularPolicy& policy) {
  if (policy.rows() != static_cast<Eigen::Index>(cmdp.num_states()) ||
      policy.cols() != static_cast<Eigen::Index>(cmdp.num_actions())) {
    throw std::invalid_argument("policy shape does not match the CMDP");
  }
  for (Eigen::Index s = 0; s < policy.rows(); ++s) {
    if ((policy.row(s).array() < 0.0).any() || std::abs(policy.row(s).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("policy row " + std::to_string(s) +
                                  " is not a distribution");
    }
  }
}

// I - gamma * P_pi, factored once and reused for every channel.
class EvaluationSystem {
 public:
  EvaluationSystem(const TabularCmdp& cmdp, const TabularPolicy& policy) {
    check_policy(cmdp, policy);
    const auto n = static_cast<Eigen::Index>(cmdp.num_states());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(cmdp.num_states() * 4);
    for (std::size_t s = 0; s < cmdp.num_states(); ++s) {
      triplets.emplace_back(s, s, 1.0);
      for (std::size_t a = 0; a < cmdp.num_actions(); ++a) {
        const double pa = policy(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
        if (pa == 0.0) continue;
        for (const auto& o : cmdp.outcomes(s, a)) {
          triplets.emplace_back(s, o.next_state, -cmdp.gamma() * pa * o.probability);
        }
      }
    }
    matrix_.resize(n, n);
    matrix_.setFromTriplets(triplets.begin(), triplets.end());
    matrix_.makeCompressed();
    solver_.analyzePattern(matrix_);
    solver_.factorize(matrix_);
    if (solver_.info() != Eigen::Success) {
      throw std::runtime_error("policy evaluation system is singular");
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) { return solver_.solve(rhs); }
  Eigen::VectorXd solve_transposed(const Eigen::VectorXd& rhs) {
    Eigen::SparseMatrix<double> t = matrix_.transpose();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(t);
    return solver.solve(rhs);
  }

 private:
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver_;
};

Eigen::VectorXd channel_rewards(const TabularCmdp& cmdp, const TabularPolicy& policy,
                                std::size_t channel) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(cmdp.num_states()));
  for (std::size_t s = 0; s < cmdp.num_states(); ++s) {
    double total = 0.0;
    for (std::size_t a = 0; a < cmdp.num_actions(); ++a) {
      const double pa = policy(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a));
      if (pa == 0.0) continue;
      total += pa * (channel == 0 ? cmdp.expected_reward(s, a)
                                  : cmdp.expected_cost(channel - 1, s, a));
    }
    r(static_cast<Eigen::Index>(s)) = total;
  }
  return r;
}

Eigen::VectorXd initial_vector(const TabularCmdp& cmdp) {
  return Eigen::Map<const Eigen::VectorXd>(cmdp.initial_dist().data(),
                                           static_cast<Eigen::Index>(cmdp.num_states()));
}

}  // namespace

Eigen::VectorXd state_values(const TabularCmdp& cmdp, const TabularPolicy& policy,
                             std::size_t channel) {
  if (channel > cmdp.num_constraints()) throw std::invalid_argument("channel out of range");
  EvaluationSystem system(cmdp, policy);
  return system.solve(channel_rewards(cmdp, policy, channel));
}

PolicyValue evaluate_policy_exact(const TabularCmdp& cmdp, const TabularPolicy& policy) {
  EvaluationSystem system(cmdp, policy);
  const Eigen::VectorXd p0 = initial_vector(cmdp);
  PolicyValue out;
  out.reward = p0.dot(system.solve(channel_rewards(cmdp, policy, 0)));
  out.costs.reserve(cmdp.num_constraints());
  for (std::size_t i = 0; i < cmdp.num_constraints(); ++i) {
    out.costs.push_back(p0.dot(system.solve(channel_rewards(cmdp, policy, i + 1))));
  }
  return out;
}

Eigen::VectorXd discounted_occupancy(const TabularCmdp& cmdp, const TabularPolicy& policy) {
  EvaluationSystem system(cmdp, policy);
  return system.solve_transposed(initial_vector(cmdp));
}

double lagrangian_value(double reward, std::span<const double> costs,
                        std::span<const double> limits, std::span<const double> lambda) {
  if (costs.size() != limits.size() || costs.size() != lambda.size()) {
    throw std::invalid_argument("lagrangian_value: costs, limits and lambda differ in length");
  }
  double value = reward;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (lambda[i] < 0.0) throw std::invalid_argument("lagrangian_value: negative multiplier");
    value -= lambda[i] * (costs[i] - limits[i]);
  }
  return value;
}

}  // namespace apdo
