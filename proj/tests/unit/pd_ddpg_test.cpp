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

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "apdo/environment.hpp"
#include "apdo/pd_ddpg.hpp"
#include "apdo/policy.hpp"
#include "apdo/policy_gradient.hpp"

namespace apdo {
namespace {

Transition make_transition(double reward, std::size_t action = 0, double cost = 0.0) {
  Transition tr;
  tr.state.index = 0;
  tr.state.features = Eigen::VectorXd::Constant(1, 1.0);
  tr.next_state.index = 0;
  tr.next_state.features = Eigen::VectorXd::Constant(1, 1.0);
  tr.action = action;
  tr.reward = reward;
  tr.costs = {cost};
  return tr;
}

PdDdpgConfig linear_config() {
  PdDdpgConfig cfg;
  cfg.critic_hidden = {};
  cfg.actor_hidden = {};
  cfg.gamma = 0.99;
  cfg.limits = {2.0};
  cfg.tau = 1.0;
  return cfg;
}

// Linear 1 -> 2 net with zero weights: the output is the bias.
void set_constant_output(Mlp& net, double b0, double b1) {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.num_parameters()));
  p(2) = b0;
  p(3) = b1;
  net.set_parameters(p);
}

TEST(ReplayBuffer, EvictsOldestFirst) {
  ReplayBuffer buf(3);
  for (int i = 1; i <= 4; ++i) buf.push(make_transition(i));
  ASSERT_EQ(buf.size(), 3u);
  EXPECT_EQ(buf[0].reward, 2.0);
  EXPECT_EQ(buf[1].reward, 3.0);
  EXPECT_EQ(buf[2].reward, 4.0);
  EXPECT_THROW(buf[3], std::out_of_range);
  EXPECT_THROW(ReplayBuffer(0), std::invalid_argument);
}

TEST(ReplayBuffer, MatchesDequeModel) {
  Rng rng(9);
  for (std::size_t cap : {1u, 2u, 7u, 64u}) {
    ReplayBuffer buf(cap);
    std::deque<double> model;
    for (int i = 0; i < 500; ++i) {
      const double tag = uniform01(rng);
      buf.push(make_transition(tag));
      model.push_back(tag);
      if (model.size() > cap) model.pop_front();
      ASSERT_EQ(buf.size(), model.size());
      const std::size_t k = uniform_index(model.size(), rng);
      ASSERT_EQ(buf[k].reward, model[k]);
    }
  }
}

TEST(ReplayBuffer, SamplingIsReproducibleAndNeedsData) {
  ReplayBuffer buf(10);
  Rng rng(1);
  EXPECT_THROW(buf.sample(4, rng), std::logic_error);
  for (int i = 0; i < 10; ++i) buf.push(make_transition(i));
  Rng a(5);
  Rng b(5);
  const auto sa = buf.sample(32, a);
  const auto sb = buf.sample(32, b);
  EXPECT_EQ(sa, sb);
}

TEST(CriticTargets, BootstrapFromTargetNetworks) {
  Rng rng(0);
  PrimalDualDdpg agent(1, 2, linear_config(), rng);
  set_constant_output(agent.mutable_reward_critic(), 2.0, 2.0);
  set_constant_output(agent.mutable_cost_critic(0), 3.0, 3.0);
  agent.update_targets();  // tau = 1 copies

  const Transition live = make_transition(1.0, 1, 0.5);
  Transition terminal = live;
  terminal.terminal = true;
  const std::vector<const Transition*> batch{&live, &terminal};
  const CriticTargets t = agent.critic_targets(batch);
  EXPECT_NEAR(t.reward(0), 2.98, 1e-12);
  EXPECT_NEAR(t.costs(0, 0), 0.5 + 0.99 * 3.0, 1e-12);
  EXPECT_EQ(t.reward(1), 1.0);
  EXPECT_EQ(t.costs(0, 1), 0.5);

  PdDdpgConfig myopic = linear_config();
  myopic.gamma = 0.0;
  Rng rng2(0);
  PrimalDualDdpg short_sighted(1, 2, myopic, rng2);
  const CriticTargets t0 = short_sighted.critic_targets(std::vector<const Transition*>{&live});
  EXPECT_EQ(t0.reward(0), 1.0);
  EXPECT_EQ(t0.costs(0, 0), 0.5);
}

TEST(CriticUpdate, ReportsMseAndIsStillAtItsTargets) {
  Rng rng(2);
  PrimalDualDdpg agent(1, 2, linear_config(), rng);
  set_constant_output(agent.mutable_reward_critic(), 1.0, 4.0);
  set_constant_output(agent.mutable_cost_critic(0), 0.0, 0.0);
  const Transition a0 = make_transition(0, 0);
  const Transition a1 = make_transition(0, 1);
  const std::vector<const Transition*> batch{&a0, &a1};

  CriticTargets targets;
  targets.reward = Eigen::RowVector2d(1.0, 4.0);
  targets.costs = Eigen::MatrixXd::Zero(1, 2);
  const Eigen::VectorXd before = agent.reward_critic().parameters();
  const CriticLosses exact = agent.critic_update(batch, targets);
  EXPECT_EQ(exact.reward, 0.0);
  EXPECT_EQ(exact.costs[0], 0.0);
  EXPECT_EQ(agent.reward_critic().parameters(), before);

  targets.reward = Eigen::RowVector2d(2.0, 1.0);  // errors -1 and 3
  const CriticLosses off = agent.critic_update(batch, targets);
  EXPECT_DOUBLE_EQ(off.reward, (1.0 + 9.0) / 2.0);
}

TEST(CriticUpdate, RepeatedTransitionConvergesToTarget) {
  PdDdpgConfig cfg = linear_config();
  cfg.critic_lr = 1e-2;
  Rng rng(3);
  PrimalDualDdpg agent(1, 2, cfg, rng);
  const Transition tr = make_transition(0, 1);
  const std::vector<const Transition*> batch{&tr};
  CriticTargets targets;
  targets.reward = Eigen::RowVectorXd::Constant(1, 5.0);
  targets.costs = Eigen::MatrixXd::Constant(1, 1, -2.0);
  for (int it = 0; it < 5000; ++it) agent.critic_update(batch, targets);
  EXPECT_NEAR(agent.reward_critic().predict_one(tr.state.features)(1), 5.0, 1e-3);
  EXPECT_NEAR(agent.cost_critic(0).predict_one(tr.state.features)(1), -2.0, 1e-3);
}

TEST(ActorDualUpdate, ZeroMultiplierIgnoresCostCritic) {
  PdDdpgConfig cfg = linear_config();
  cfg.dual_lr = 0.0;
  Rng r1(4);
  Rng r2(4);
  PrimalDualDdpg a(1, 2, cfg, r1);
  PrimalDualDdpg b(1, 2, cfg, r2);
  set_constant_output(b.mutable_cost_critic(0), 50.0, -7.0);
  const Transition tr = make_transition(0);
  const std::vector<const Transition*> batch{&tr};
  for (int it = 0; it < 10; ++it) {
    a.actor_dual_update(batch);
    b.actor_dual_update(batch);
  }
  EXPECT_EQ(a.actor().parameters(), b.actor().parameters());
}

TEST(ActorDualUpdate, DualStepFollowsExpectedCost) {
  PdDdpgConfig cfg = linear_config();
  cfg.dual_lr = 0.01;
  Rng rng(5);
  PrimalDualDdpg agent(1, 2, cfg, rng);
  set_constant_output(agent.mutable_cost_critic(0), 3.0, 1.0);
  const Transition tr = make_transition(0);
  const std::vector<const Transition*> batch{&tr};

  // pi = (1/4, 3/4): expected cost 1.5 < 2, projected back to 0.
  set_constant_output(agent.mutable_actor(), 0.0, std::log(3.0));
  agent.actor_dual_update(batch);
  EXPECT_EQ(agent.lambda()[0], 0.0);

  // Q_C equal to the limit leaves any multiplier unchanged.
  set_constant_output(agent.mutable_cost_critic(0), 2.0, 2.0);
  agent.set_lambda({3.0});
  agent.actor_dual_update(batch);
  EXPECT_DOUBLE_EQ(agent.lambda()[0], 3.0);
  ASSERT_EQ(agent.dual_trace().size(), 2u);
  EXPECT_EQ(agent.dual_trace()[1][0], 3.0);
}

TEST(ActorDualUpdate, ProjectionFuzz) {
  PdDdpgConfig cfg = linear_config();
  cfg.dual_lr = 0.5;
  Rng rng(6);
  PrimalDualDdpg agent(1, 2, cfg, rng);
  const Transition tr = make_transition(0);
  const std::vector<const Transition*> batch{&tr};
  for (int trial = 0; trial < 200; ++trial) {
    const double c0 = 10.0 * uniform01(rng) - 5.0;
    const double c1 = 10.0 * uniform01(rng) - 5.0;
    set_constant_output(agent.mutable_cost_critic(0), c0, c1);
    const double lam = 3.0 * uniform01(rng);
    agent.set_lambda({lam});
    const Eigen::VectorXd pi = agent.action_probabilities(tr.state);
    agent.actor_dual_update(batch);
    const double expected = std::max(0.0, lam + 0.5 * (pi(0) * c0 + pi(1) * c1 - 2.0));
    EXPECT_NEAR(agent.lambda()[0], expected, 1e-12);
    EXPECT_GE(agent.lambda()[0], 0.0);
  }
}

TEST(ActorDualUpdate, EntropyPullsTowardUniform) {
  PdDdpgConfig cfg = linear_config();
  cfg.actor_entropy = 1.0;
  cfg.actor_lr = 1e-2;
  cfg.dual_lr = 0.0;
  Rng rng(7);
  PrimalDualDdpg agent(1, 2, cfg, rng);
  set_constant_output(agent.mutable_reward_critic(), 0.0, 0.0);
  set_constant_output(agent.mutable_cost_critic(0), 0.0, 0.0);
  set_constant_output(agent.mutable_actor(), 3.0, -3.0);
  const Transition tr = make_transition(0);
  const std::vector<const Transition*> batch{&tr};
  for (int it = 0; it < 2000; ++it) agent.actor_dual_update(batch);
  EXPECT_NEAR(agent.action_probabilities(tr.state)(0), 0.5, 0.02);
}

TEST(ActorDualUpdate, MovesTowardHigherLagrangianAction) {
  PdDdpgConfig cfg = linear_config();
  cfg.actor_lr = 1e-2;
  cfg.dual_lr = 0.0;
  Rng rng(8);
  PrimalDualDdpg agent(1, 2, cfg, rng);
  set_constant_output(agent.mutable_reward_critic(), 10.0, 100.0);
  set_constant_output(agent.mutable_cost_critic(0), 0.0, 10.0);
  const Transition tr = make_transition(0);
  const std::vector<const Transition*> batch{&tr};
  agent.set_lambda({20.0});  // 100 - 200 < 10
  for (int it = 0; it < 300; ++it) agent.actor_dual_update(batch);
  EXPECT_GT(agent.action_probabilities(tr.state)(0), 0.95);
}

TEST(DualTrace, Average) {
  EXPECT_EQ(average_dual_trace({{0.0}, {1.0}, {2.0}}), (std::vector<double>{1.0}));
  EXPECT_EQ(average_dual_trace({{1.0, 4.0}, {3.0, 0.0}}), (std::vector<double>{2.0, 2.0}));
  EXPECT_THROW(average_dual_trace({}), std::invalid_argument);
}

TEST(PdDdpgConfig, Validation) {
  PdDdpgConfig cfg = linear_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.tau = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = linear_config();
  cfg.limits.clear();
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = linear_config();
  cfg.gamma = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = linear_config();
  cfg.actor_entropy = -0.1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(TrainLambdaOff, EdgeCases) {
  ReplayBuffer empty(4);
  EXPECT_THROW(train_lambda_off(empty, 2, linear_config(), 0), std::logic_error);

  ReplayBuffer buf(100);
  for (int i = 0; i < 10; ++i) buf.push(make_transition(1.0, i % 2));
  PdDdpgConfig cfg = linear_config();
  cfg.updates_per_sample = 0.5;
  cfg.iterations = 1000;
  const LambdaOffResult capped = train_lambda_off(buf, 2, cfg, 1);
  EXPECT_EQ(capped.iterations, 5u);
  cfg.iterations = 0;
  const LambdaOffResult none = train_lambda_off(buf, 2, cfg, 1);
  EXPECT_EQ(none.lambda_off, (std::vector<double>{0.0}));

  cfg.limits = {1.0, 1.0};
  EXPECT_THROW(train_lambda_off(buf, 2, cfg, 1), std::invalid_argument);
}

TEST(TrainLambdaOff, SameSeedSameResult) {
  ReplayBuffer buf(200);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const std::size_t a = uniform_index(2, rng);
    buf.push(make_transition(a == 0 ? 1.0 : 10.0, a, a == 0 ? 0.0 : 1.0));
  }
  PdDdpgConfig cfg = linear_config();
  cfg.critic_hidden = {8};
  cfg.iterations = 200;
  const auto a = train_lambda_off(buf, 2, cfg, 3);
  const auto b = train_lambda_off(buf, 2, cfg, 3);
  EXPECT_EQ(a.lambda_off, b.lambda_off);
  EXPECT_EQ(a.final_lambda, b.final_lambda);
}

TEST(TrainLambdaOff, UniformRiskyChainDataGivesPlausibleMultiplier) {
  TabularEnv env(make_risky_chain(0.9, 2.0));
  TabularSoftmaxPolicy uniform(1, 2);
  ReplayBuffer buf(20000);
  for (const Trajectory& t : sample_batch(env, uniform, 20000, 11)) buf.push(t);
  PdDdpgConfig cfg;
  cfg.critic_hidden = {32, 32};
  cfg.actor_hidden = {16};
  cfg.tau = 0.01;
  cfg.dual_lr = 1e-3;
  cfg.actor_entropy = 0.2;
  cfg.gamma = 0.9;
  cfg.limits = {2.0};
  cfg.iterations = 20000;
  cfg.updates_per_sample = 0.0;
  const LambdaOffResult res = train_lambda_off(buf, 2, cfg, 0);
  EXPECT_GE(res.lambda_off[0], 6.0);
  EXPECT_LE(res.lambda_off[0], 12.0);
}

}  // namespace
}  // namespace apdo
