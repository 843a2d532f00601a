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

#include "apdo/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace apdo {

namespace {

std::vector<double> scalarized_rewards(const TabularCmdp& cmdp, std::span<const double> lambda) {
  const std::size_t ns = cmdp.num_states();
  const std::size_t na = cmdp.num_actions();
  std::vector<double> r(ns * na);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      double value = 0.0;
      for (const auto& o : cmdp.outcomes(s, a)) {
        double signal = o.reward;
        for (std::size_t i = 0; i < lambda.size(); ++i) signal -= lambda[i] * o.costs[i];
        value += o.probability * signal;
      }
      r[s * na + a] = value;
    }
  }
  return r;
}

double q_value(const TabularCmdp& cmdp, const std::vector<double>& r, const Eigen::VectorXd& v,
               std::size_t s, std::size_t a) {
  double q = r[s * cmdp.num_actions() + a];
  for (const auto& o : cmdp.outcomes(s, a)) {
    q += cmdp.gamma() * o.probability * v(static_cast<Eigen::Index>(o.next_state));
  }
  return q;
}

bool tied(double x, double best) {
  return x >= best - 1e-10 * std::max(1.0, std::abs(best));
}

// Lowest action whose Q value ties the best one.
std::size_t greedy_action(const TabularCmdp& cmdp, const std::vector<double>& r,
                          const Eigen::VectorXd& v, std::size_t s) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < cmdp.num_actions(); ++a) best = std::max(best, q_value(cmdp, r, v, s, a));
  for (std::size_t a = 0; a < cmdp.num_actions(); ++a) {
    if (tied(q_value(cmdp, r, v, s, a), best)) return a;
  }
  return 0;
}

Eigen::VectorXd scalarized_values(const TabularCmdp& cmdp, const std::vector<std::size_t>& actions,
                                  std::span<const double> lambda) {
  const TabularPolicy pi = deterministic_policy(actions, cmdp.num_actions());
  Eigen::VectorXd v = state_values(cmdp, pi, 0);
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (lambda[i] != 0.0) v -= lambda[i] * state_values(cmdp, pi, i + 1);
  }
  return v;
}

void require_single_constraint(const TabularCmdp& cmdp, const char* who) {
  if (cmdp.num_constraints() != 1) {
    throw std::invalid_argument(std::string(who) + " supports exactly one constraint, got " +
                                std::to_string(cmdp.num_constraints()));
  }
}

}  // namespace

LagrangianSolution solve_lagrangian_mdp(const TabularCmdp& cmdp, std::span<const double> lambda,
                                        const LagrangianOptions& options) {
  if (lambda.size() != cmdp.num_constraints()) {
    throw std::invalid_argument("lambda has wrong dimension");
  }
  for (double l : lambda) {
    if (!(l >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  }
  const std::size_t ns = cmdp.num_states();
  const std::size_t na = cmdp.num_actions();
  const std::vector<double> r = scalarized_rewards(cmdp, lambda);

  LagrangianSolution sol;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ns));
  Eigen::VectorXd next(v.size());
  for (sol.sweeps = 0; sol.sweeps < options.max_sweeps;) {
    double residual = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < na; ++a) best = std::max(best, q_value(cmdp, r, v, s, a));
      next(static_cast<Eigen::Index>(s)) = best;
      residual = std::max(residual, std::abs(best - v(static_cast<Eigen::Index>(s))));
    }
    v.swap(next);
    ++sol.sweeps;
    if (residual <= options.residual_tolerance) break;
  }

  // Polish: exact evaluation + greedy improvement until the policy is stable.
  std::vector<std::size_t> actions(ns);
  for (std::size_t s = 0; s < ns; ++s) actions[s] = greedy_action(cmdp, r, v, s);
  for (int round = 0; round < 100; ++round) {
    v = scalarized_values(cmdp, actions, lambda);
    bool changed = false;
    for (std::size_t s = 0; s < ns; ++s) {
      const double current = q_value(cmdp, r, v, s, actions[s]);
      const std::size_t candidate = greedy_action(cmdp, r, v, s);
      if (candidate == actions[s]) continue;
      const double improved = q_value(cmdp, r, v, s, candidate);
      // switch on strict improvement, or on a tie toward a lower index
      if (!tied(current, improved) || candidate < actions[s]) {
        actions[s] = candidate;
        changed = true;
      }
    }
    if (!changed) break;
  }

  const PolicyValue pv = evaluate_policy_exact(cmdp, deterministic_policy(actions, na));
  sol.actions = std::move(actions);
  sol.reward = pv.reward;
  sol.costs = pv.costs;
  sol.lagrangian = lagrangian_value(pv.reward, pv.costs, cmdp.limits(), lambda);
  sol.values = std::move(v);
  return sol;
}

TabularPolicy PolicyMixture::stationary(const TabularCmdp& cmdp) const {
  const std::size_t na = cmdp.num_actions();
  const TabularPolicy hi = deterministic_policy(high_cost, na);
  const TabularPolicy lo = deterministic_policy(low_cost, na);
  const Eigen::VectorXd occ_hi = discounted_occupancy(cmdp, hi);
  const Eigen::VectorXd occ_lo = discounted_occupancy(cmdp, lo);
  TabularPolicy pi = TabularPolicy::Zero(hi.rows(), hi.cols());
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    const double w_hi = weight * occ_hi(s);
    const double w_lo = (1.0 - weight) * occ_lo(s);
    if (w_hi + w_lo <= 0.0) {
      pi.row(s) = weight >= 0.5 ? hi.row(s) : lo.row(s);
      continue;
    }
    pi.row(s) = (w_hi * hi.row(s) + w_lo * lo.row(s)) / (w_hi + w_lo);
  }
  return pi;
}

namespace {

// Exact costs carry solver round-off; a policy sitting on the limit counts as feasible.
bool within_limit(double cost, double d) {
  return cost <= d + 1e-9 * std::max(1.0, std::abs(d));
}

}  // namespace

DualSolution solve_dual_bisection(const TabularCmdp& cmdp, const BisectionOptions& options) {
  require_single_constraint(cmdp, "solve_dual_bisection");
  const double d = cmdp.limits()[0];
  auto solve_at = [&](double lambda) {
    const double l[1] = {lambda};
    return solve_lagrangian_mdp(cmdp, l, options.inner);
  };

  DualSolution out;
  LagrangianSolution at_zero = solve_at(0.0);
  out.iterates.push_back({0.0, at_zero.costs[0]});
  if (within_limit(at_zero.costs[0], d)) {
    out.mixture = PolicyMixture{at_zero.actions, at_zero.actions, 1.0};
    out.reward_star = at_zero.reward;
    out.cost_star = at_zero.costs[0];
    return out;
  }

  double lo = 0.0;
  LagrangianSolution sol_lo = std::move(at_zero);
  double hi = 1.0;
  LagrangianSolution sol_hi = solve_at(hi);
  out.iterates.push_back({hi, sol_hi.costs[0]});
  while (!within_limit(sol_hi.costs[0], d)) {
    lo = hi;
    sol_lo = std::move(sol_hi);
    hi *= 2.0;
    if (hi > options.lambda_cap) {
      throw InfeasibleError("no policy meets the cost limit " + std::to_string(d) +
                            " for any multiplier up to " + std::to_string(options.lambda_cap));
    }
    sol_hi = solve_at(hi);
    out.iterates.push_back({hi, sol_hi.costs[0]});
  }

  while (hi - lo > options.bracket_tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // floating-point resolution reached
    LagrangianSolution sol = solve_at(mid);
    out.iterates.push_back({mid, sol.costs[0]});
    if (!within_limit(sol.costs[0], d)) {
      lo = mid;
      sol_lo = std::move(sol);
    } else {
      hi = mid;
      sol_hi = std::move(sol);
    }
  }

  const double c_lo = sol_lo.costs[0];
  const double c_hi = sol_hi.costs[0];
  const double q = (d - c_hi) / (c_lo - c_hi);
  out.lambda_star = 0.5 * (lo + hi);
  out.lambda_low = lo;
  out.lambda_high = hi;
  out.mixture = PolicyMixture{sol_lo.actions, sol_hi.actions, q};
  out.reward_star = q * sol_lo.reward + (1.0 - q) * sol_hi.reward;
  out.cost_star = q * c_lo + (1.0 - q) * c_hi;
  return out;
}

std::vector<std::size_t> decision_states(const TabularCmdp& cmdp) {
  const std::size_t ns = cmdp.num_states();
  const std::size_t na = cmdp.num_actions();
  std::vector<bool> reached(ns, false);
  std::deque<std::size_t> frontier;
  for (std::size_t s = 0; s < ns; ++s) {
    if (cmdp.initial_dist()[s] > 0.0) {
      reached[s] = true;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    const std::size_t s = frontier.front();
    frontier.pop_front();
    for (std::size_t a = 0; a < na; ++a) {
      for (const auto& o : cmdp.outcomes(s, a)) {
        if (!reached[o.next_state]) {
          reached[o.next_state] = true;
          frontier.push_back(o.next_state);
        }
      }
    }
  }
  auto same_row = [&](std::size_t s, std::size_t a, std::size_t b) {
    const auto x = cmdp.outcomes(s, a);
    const auto y = cmdp.outcomes(s, b);
    if (x.size() != y.size()) return false;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (x[k].next_state != y[k].next_state || x[k].probability != y[k].probability ||
          x[k].reward != y[k].reward || x[k].costs != y[k].costs) {
        return false;
      }
    }
    return true;
  };
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < ns; ++s) {
    if (!reached[s]) continue;
    bool differs = false;
    for (std::size_t a = 1; a < na && !differs; ++a) differs = !same_row(s, 0, a);
    if (differs) out.push_back(s);
  }
  return out;
}

EnumerationResult brute_force_enumerate(const TabularCmdp& cmdp) {
  require_single_constraint(cmdp, "brute_force_enumerate");
  EnumerationResult result;
  result.decision_states = decision_states(cmdp);
  const std::size_t na = cmdp.num_actions();
  std::size_t count = 1;
  for (std::size_t k = 0; k < result.decision_states.size(); ++k) {
    if (count > kMaxEnumeratedPolicies / na) {
      throw std::length_error("brute_force_enumerate: more than 10^6 deterministic policies (" +
                              std::to_string(result.decision_states.size()) +
                              " decision states)");
    }
    count *= na;
  }
  if (count > kMaxEnumeratedPolicies) {
    throw std::length_error("brute_force_enumerate: more than 10^6 deterministic policies");
  }
  result.num_policies = count;

  std::vector<FrontierPoint> points;
  points.reserve(count);
  std::vector<std::size_t> actions(cmdp.num_states(), 0);
  std::vector<std::size_t> digits(result.decision_states.size(), 0);
  for (std::size_t p = 0; p < count; ++p) {
    for (std::size_t k = 0; k < digits.size(); ++k) actions[result.decision_states[k]] = digits[k];
    const PolicyValue pv = evaluate_policy_exact(cmdp, deterministic_policy(actions, na));
    points.push_back({pv.costs[0], pv.reward});
    for (std::size_t k = 0; k < digits.size(); ++k) {  // odometer increment
      if (++digits[k] < na) break;
      digits[k] = 0;
    }
  }

  // Pareto frontier: sort by cost, keep points whose reward beats everything cheaper.
  std::sort(points.begin(), points.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
    return a.cost < b.cost || (a.cost == b.cost && a.reward > b.reward);
  });
  double best_reward = -std::numeric_limits<double>::infinity();
  for (const auto& pt : points) {
    if (pt.reward > best_reward) {
      result.frontier.push_back(pt);
      best_reward = pt.reward;
    }
  }

  const double d = cmdp.limits()[0];
  std::optional<double> best;
  for (const auto& f : result.frontier) {
    if (within_limit(f.cost, d)) best = std::max(best.value_or(f.reward), f.reward);
  }
  if (best) {
    for (const auto& lo : result.frontier) {
      if (!within_limit(lo.cost, d)) continue;
      for (const auto& hi : result.frontier) {
        if (within_limit(hi.cost, d)) continue;
        const double q = (d - lo.cost) / (hi.cost - lo.cost);
        best = std::max(*best, lo.reward + q * (hi.reward - lo.reward));
      }
    }
  }
  result.best_feasible_value = best;
  return result;
}

}  // namespace apdo
