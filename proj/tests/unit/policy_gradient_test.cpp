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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "apdo/environment.hpp"
#include "apdo/grid_gather.hpp"
#include "apdo/policy_gradient.hpp"

namespace apdo {
namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * (2.0 * uniform01(rng) - 1.0);
  return v;
}

TEST(Gae, LambdaZeroIsTdResidual) {
  Rng rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + uniform_index(30, rng);
    const auto r = random_vector(n, rng, 5.0);
    const auto v = random_vector(n, rng, 5.0);
    const double boot = 5.0 * uniform01(rng);
    const GaeConfig cfg{0.0, 0.9 + 0.099 * uniform01(rng)};
    const auto adv = gae_advantages(r, v, boot, cfg);
    for (std::size_t t = 0; t < n; ++t) {
      const double next = t + 1 < n ? v[t + 1] : boot;
      EXPECT_EQ(adv[t], r[t] + cfg.gamma * next - v[t]);
    }
  }
}

TEST(Gae, LambdaOneIsMonteCarlo) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + uniform_index(30, rng);
    const auto r = random_vector(n, rng, 5.0);
    const auto v = random_vector(n, rng, 5.0);
    const double boot = 5.0 * uniform01(rng);
    const GaeConfig cfg{1.0, 0.9 + 0.099 * uniform01(rng)};
    const auto adv = gae_advantages(r, v, boot, cfg);
    for (std::size_t t = 0; t < n; ++t) {
      double g = 0.0;
      double disc = 1.0;
      for (std::size_t k = t; k < n; ++k, disc *= cfg.gamma) g += disc * r[k];
      g += disc * boot;
      EXPECT_NEAR(adv[t], g - v[t], 1e-10);
    }
  }
}

TEST(Gae, TwoTermExpansion) {
  // rewards chosen so that delta = [1, 2] with zero values
  const std::vector<double> r{1.0, 2.0};
  const std::vector<double> v{0.0, 0.0};
  const auto adv = gae_advantages(r, v, 0.0, GaeConfig{0.5, 0.5});
  EXPECT_DOUBLE_EQ(adv[0], 1.5);
  EXPECT_DOUBLE_EQ(adv[1], 2.0);
}

TEST(Gae, RejectsBadConfig) {
  EXPECT_THROW((GaeConfig{1.5, 0.9}.validate()), std::invalid_argument);
  EXPECT_THROW((GaeConfig{0.5, 1.0}.validate()), std::invalid_argument);
}

TEST(Gae, TrajectoryBootstrap) {
  TabularBaseline baseline(2, 1.0);
  Eigen::VectorXd table(2);
  table << 0.0, 4.0;
  baseline.set_table(table);
  Trajectory traj;
  Transition tr;
  tr.state.index = 0;
  tr.state.features = Eigen::Vector2d(1, 0);
  tr.next_state.index = 1;
  tr.next_state.features = Eigen::Vector2d(0, 1);
  tr.reward = 1.0;
  tr.costs = {0.5};
  traj.transitions.push_back(tr);
  const GaeConfig cfg{0.95, 0.5};

  traj.end = EpisodeEnd::kTimeLimit;
  EXPECT_DOUBLE_EQ(gae_advantages(traj, baseline, 0, cfg)[0], 1.0 + 0.5 * 4.0);
  EXPECT_DOUBLE_EQ(gae_advantages(traj, baseline, 1, cfg)[0], 0.5 + 0.5 * 4.0);
  traj.end = EpisodeEnd::kTerminal;
  traj.transitions[0].terminal = true;
  EXPECT_DOUBLE_EQ(gae_advantages(traj, baseline, 0, cfg)[0], 1.0);
}

TEST(SampleBatch, ExactBudgetAndCutEpisode) {
  TabularEnv env(make_risky_chain(0.9, 2.0));
  TabularSoftmaxPolicy pi(1, 2);
  const auto batch = sample_batch(env, pi, 200, 3);
  std::size_t total = 0;
  for (const auto& t : batch) total += t.size();
  EXPECT_EQ(total, 200u);
  ASSERT_EQ(batch.size(), 3u);  // horizon 88: 88 + 88 + 24
  EXPECT_EQ(batch[0].end, EpisodeEnd::kTimeLimit);
  EXPECT_EQ(batch[0].size(), env.horizon());
  EXPECT_EQ(batch.back().end, EpisodeEnd::kBudget);
  EXPECT_FALSE(batch.back().complete());
}

TEST(SampleBatch, OneFullEpisode) {
  GridGatherSpec spec;
  spec.grid_size = 3;
  spec.num_apples = 0;
  spec.num_bombs = 0;
  spec.layout = GridLayout{};
  GridGatherEnv env(spec);
  TabularSoftmaxPolicy pi(env.num_states(), 4);
  const auto batch = sample_batch(env, pi, 15, 0);
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_EQ(batch[0].size(), 15u);
  EXPECT_TRUE(batch[0].complete());
}

TEST(SampleBatch, SameSeedSameBatch) {
  TabularEnv env(make_risky_chain(0.9, 2.0));
  TabularSoftmaxPolicy pi(1, 2);
  const auto a = sample_batch(env, pi, 500, 17);
  const auto b = sample_batch(env, pi, 500, 17);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    for (std::size_t t = 0; t < a[i].size(); ++t) {
      EXPECT_EQ(a[i].transitions[t].action, b[i].transitions[t].action);
    }
  }
}

TEST(ExactGradient, RiskyChainIndifferentAtNine) {
  const TabularCmdp chain = make_risky_chain(0.9, 2.0);
  TabularSoftmaxPolicy pi(1, 2);
  const std::vector<double> nine{9.0};
  for (double p : {0.05, 0.2, 0.5, 0.9}) {
    Eigen::VectorXd theta(2);
    theta << 0.0, std::log(p / (1.0 - p));
    pi.set_parameters(theta);
    EXPECT_NEAR(exact_policy_gradient(chain, pi, nine).norm(), 0.0, 1e-9) << p;
  }
  const std::vector<double> zero{0.0};
  const Eigen::VectorXd g = exact_policy_gradient(chain, pi, zero);
  EXPECT_GT(g(kRiskyChainRisky), 0.0);
  EXPECT_LT(g(kRiskyChainSafe), 0.0);
}

TEST(ExactGradient, MatchesFiniteDifferencesOfLagrangian) {
  const TabularCmdp chain = make_risky_chain(0.9, 2.0);
  TabularSoftmaxPolicy pi(1, 2);
  Eigen::VectorXd theta(2);
  theta << 0.3, -0.4;
  pi.set_parameters(theta);
  const std::vector<double> lam{4.0};
  auto lagrangian = [&](const Eigen::VectorXd& t) {
    TabularSoftmaxPolicy q(1, 2);
    q.set_parameters(t);
    const PolicyValue v = evaluate_policy_exact(chain, q.table());
    return lagrangian_value(v.reward, v.costs, chain.limits(), lam);
  };
  const Eigen::VectorXd g = exact_policy_gradient(chain, pi, lam);
  for (Eigen::Index k = 0; k < 2; ++k) {
    Eigen::VectorXd up = theta;
    Eigen::VectorXd down = theta;
    up(k) += 1e-6;
    down(k) -= 1e-6;
    EXPECT_NEAR(g(k), (lagrangian(up) - lagrangian(down)) / 2e-6, 1e-5);
  }
}

TEST(SampledGradient, ZeroMultiplierIgnoresCosts) {
  TabularEnv env(make_risky_chain(0.9, 2.0));
  TabularSoftmaxPolicy pi(1, 2);
  auto batch = sample_batch(env, pi, 400, 5);
  TabularBaseline br(1, 1.0);
  TabularBaseline bc(1, 1.0);
  const std::vector<const ValueBaseline*> costs{&bc};
  const std::vector<double> zero{0.0};
  PolicyGradientConfig cfg;
  cfg.normalization = AdvantageNormalization::kNone;
  const Eigen::VectorXd g1 = lagrangian_policy_gradient(batch, pi, br, costs, zero, cfg).gradient;
  Rng noise(7);
  for (auto& t : batch) {
    for (auto& tr : t.transitions) tr.costs[0] = 100.0 * uniform01(noise);
  }
  const Eigen::VectorXd g2 = lagrangian_policy_gradient(batch, pi, br, costs, zero, cfg).gradient;
  EXPECT_EQ(g1, g2);
}

TEST(SampledGradient, SignAgreesWithExactGradient) {
  const TabularCmdp chain = make_risky_chain(0.9, 2.0);
  TabularEnv env(chain);
  TabularSoftmaxPolicy pi(1, 2);
  TabularBaseline br(1, 1.0);
  TabularBaseline bc(1, 1.0);
  const std::vector<const ValueBaseline*> costs{&bc};
  PolicyGradientConfig cfg;
  cfg.gae = GaeConfig{0.95, 0.9};
  cfg.normalization = AdvantageNormalization::kNone;
  const auto batch = sample_batch(env, pi, 6000, 8);
  for (double l : {0.0, 20.0}) {
    const std::vector<double> lam{l};
    const Eigen::VectorXd sampled =
        lagrangian_policy_gradient(batch, pi, br, costs, lam, cfg).gradient;
    const Eigen::VectorXd exact = exact_policy_gradient(chain, pi, lam);
    EXPECT_GT(sampled.dot(exact), 0.0) << l;
    EXPECT_GT(sampled.normalized().dot(exact.normalized()), 0.9) << l;
  }
}

TEST(SampledGradient, EntropyTermMatchesFiniteDifferences) {
  // Zero signals and baselines make every advantage zero; only the entropy
  // bonus contributes.
  const Tensor3 p{{{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}, {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}}};
  const Tensor3 zero{{{0, 0}, {0, 0}, {0, 0}}, {{0, 0}, {0, 0}, {0, 0}}};
  TabularEnv env(TabularCmdp::from_dense(p, zero, {zero}, {0.0}, 0.9, {0.5, 0.5}));
  TabularSoftmaxPolicy pi(2, 3);
  Eigen::VectorXd theta(6);
  theta << 0.2, -0.5, 1.0, 0.0, 0.7, -0.3;
  pi.set_parameters(theta);
  const auto batch = sample_batch(env, pi, 300, 2);
  TabularBaseline br(2, 1.0);
  TabularBaseline bc(2, 1.0);
  const std::vector<const ValueBaseline*> costs{&bc};
  const std::vector<double> lam{1.0};
  PolicyGradientConfig cfg;
  cfg.normalization = AdvantageNormalization::kNone;
  cfg.entropy_coef = 0.3;
  const LagrangianGradient lg = lagrangian_policy_gradient(batch, pi, br, costs, lam, cfg);

  auto mean_entropy = [&](const Eigen::VectorXd& t) {
    TabularSoftmaxPolicy q(2, 3);
    q.set_parameters(t);
    double h = 0.0;
    std::size_t n = 0;
    for (const auto& traj : batch) {
      for (const auto& tr : traj.transitions) {
        const Eigen::VectorXd pr = q.probabilities(tr.state);
        h -= (pr.array() * pr.array().log()).sum();
        ++n;
      }
    }
    return h / static_cast<double>(n);
  };
  EXPECT_NEAR(lg.mean_entropy, mean_entropy(theta), 1e-12);
  for (Eigen::Index k = 0; k < 6; ++k) {
    Eigen::VectorXd up = theta;
    Eigen::VectorXd down = theta;
    up(k) += 1e-6;
    down(k) -= 1e-6;
    const double fd = 0.3 * (mean_entropy(up) - mean_entropy(down)) / 2e-6;
    EXPECT_NEAR(lg.gradient(k), fd, 1e-8) << k;
  }
}

TEST(SampledGradient, RejectsNegativeMultiplier) {
  TabularEnv env(make_risky_chain(0.9, 2.0));
  TabularSoftmaxPolicy pi(1, 2);
  const auto batch = sample_batch(env, pi, 50, 1);
  TabularBaseline br(1, 1.0);
  TabularBaseline bc(1, 1.0);
  const std::vector<const ValueBaseline*> costs{&bc};
  const std::vector<double> lam{-1.0};
  EXPECT_THROW(lagrangian_policy_gradient(batch, pi, br, costs, lam, {}), std::invalid_argument);
}

TEST(PolicyUpdate, ZeroGradientIsNoOp) {
  TabularSoftmaxPolicy pi(2, 2);
  const Eigen::VectorXd before = pi.parameters();
  EXPECT_EQ(policy_update(pi, Eigen::VectorXd::Zero(4), 1.0), 0.0);
  EXPECT_EQ(pi.parameters(), before);
}

TEST(PolicyUpdate, ClipsLongGradients) {
  TabularSoftmaxPolicy pi(2, 2);
  Eigen::VectorXd g(4);
  g << 60.0, 80.0, 0.0, 0.0;  // norm 100
  EXPECT_DOUBLE_EQ(policy_update(pi, g, 1.0), 100.0);
  EXPECT_NEAR(pi.parameters().norm(), 10.0, 1e-12);
  EXPECT_NEAR(pi.parameters()(0), 6.0, 1e-12);

  Eigen::VectorXd bad = Eigen::VectorXd::Zero(4);
  bad(1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(policy_update(pi, bad, 1.0), NonFiniteError);
}

TEST(PolicyUpdate, ExactAscentReachesUnconstrainedOptimum) {
  const TabularCmdp chain = make_risky_chain(0.9, 2.0);
  TabularSoftmaxPolicy pi(1, 2);
  const std::vector<double> zero{0.0};
  for (int it = 0; it < 200; ++it) policy_update(pi, exact_policy_gradient(chain, pi, zero), 0.1);
  EXPECT_GE(pi.table()(0, kRiskyChainRisky), 0.99);
}

TEST(OnPolicyLearner, SampledUpdatesImproveReturn) {
  const TabularCmdp chain = make_risky_chain(0.9, 2.0);
  TabularEnv env(chain);
  std::vector<std::unique_ptr<ValueBaseline>> cost_baselines;
  cost_baselines.push_back(std::make_unique<TabularBaseline>(1, 1.0));
  OnPolicyConfig cfg;
  cfg.pg.gae = GaeConfig{0.95, 0.9};
  OnPolicyLearner learner(std::make_unique<TabularSoftmaxPolicy>(1, 2),
                          std::make_unique<TabularBaseline>(1, 1.0), std::move(cost_baselines),
                          cfg);
  Rng rng(3);
  const std::vector<double> zero{0.0};
  for (int it = 0; it < 30; ++it) learner.update(sample_batch(env, learner.policy(), 500, rng), zero, rng);
  const auto& tab = dynamic_cast<const TabularSoftmaxPolicy&>(learner.policy());
  EXPECT_GT(tab.table()(0, kRiskyChainRisky), 0.95);
  EXPECT_GT(learner.reward_baseline().value(env.observe(0)), 50.0);
}

}  // namespace
}  // namespace apdo
