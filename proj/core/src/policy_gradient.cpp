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

#include "apdo/policy_gradient.hpp"

#include <cmath>
#include <stdexcept>

namespace apdo {

using Eigen::Index;

void GaeConfig::validate() const {
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw std::invalid_argument("gae_lambda must be in [0, 1]");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
}

std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                   double bootstrap, const GaeConfig& cfg) {
  if (rewards.size() != values.size()) {
    throw std::invalid_argument("gae_advantages: rewards and values differ in length");
  }
  const std::size_t n = rewards.size();
  std::vector<double> adv(n);
  double acc = 0.0;
  double next_value = bootstrap;
  for (std::size_t t = n; t-- > 0;) {
    const double delta = rewards[t] + cfg.gamma * next_value - values[t];
    acc = delta + cfg.gamma * cfg.gae_lambda * acc;
    adv[t] = acc;
    next_value = values[t];
  }
  return adv;
}

double channel_signal(const Transition& tr, std::size_t channel) {
  return channel == 0 ? tr.reward : tr.costs.at(channel - 1);
}

namespace {

struct ChannelGae {
  std::vector<double> advantages;
  std::vector<double> values;
};

ChannelGae channel_gae(const Trajectory& traj, const ValueBaseline& baseline, std::size_t channel,
                       const GaeConfig& cfg) {
  ChannelGae out;
  std::vector<double> signal(traj.size());
  out.values.resize(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) {
    signal[t] = channel_signal(traj.transitions[t], channel);
    out.values[t] = baseline.value(traj.transitions[t].state);
  }
  double bootstrap = 0.0;
  if (!traj.empty() && !traj.transitions.back().terminal) {
    bootstrap = baseline.value(traj.transitions.back().next_state);
  }
  out.advantages = gae_advantages(signal, out.values, bootstrap, cfg);
  return out;
}

void standardize(std::vector<double>& x) {
  if (x.empty()) return;
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(x.size()));
  for (double& v : x) v = (v - mean) / (sd + 1e-8);
}

}  // namespace

std::vector<double> gae_advantages(const Trajectory& traj, const ValueBaseline& baseline,
                                   std::size_t channel, const GaeConfig& cfg) {
  return channel_gae(traj, baseline, channel, cfg).advantages;
}

std::vector<Trajectory> sample_batch(Environment& env, const SoftmaxPolicy& policy,
                                     std::size_t batch_size, Rng& rng, const std::string& policy_id) {
  return sample_batch(env, policy, batch_size, rng, rng, policy_id);
}

std::vector<Trajectory> sample_batch(Environment& env, const SoftmaxPolicy& policy,
                                     std::size_t batch_size, Rng& action_rng, Rng& env_rng,
                                     const std::string& policy_id) {
  if (batch_size == 0) throw std::invalid_argument("sample_batch: batch size must be positive");
  std::vector<Trajectory> batch;
  std::size_t total = 0;
  const std::size_t horizon = env.horizon();
  while (total < batch_size) {
    Trajectory traj;
    traj.policy_id = policy_id;
    Observation obs = env.reset(env_rng);
    for (;;) {
      const std::size_t action = policy.sample(obs, action_rng);
      StepOutcome out = env.step(action, env_rng);
      Transition tr{std::move(obs), action, out.reward, std::move(out.costs), out.observation,
                    out.terminal};
      traj.transitions.push_back(std::move(tr));
      ++total;
      if (out.terminal) {
        traj.end = EpisodeEnd::kTerminal;
        break;
      }
      if (traj.size() >= horizon) {
        traj.end = EpisodeEnd::kTimeLimit;
        break;
      }
      if (total == batch_size) {
        traj.end = EpisodeEnd::kBudget;
        break;
      }
      obs = std::move(out.observation);
    }
    batch.push_back(std::move(traj));
  }
  return batch;
}

std::vector<Trajectory> sample_batch(Environment& env, const SoftmaxPolicy& policy,
                                     std::size_t batch_size, std::uint64_t seed) {
  Rng rng(seed);
  auto batch = sample_batch(env, policy, batch_size, rng);
  for (auto& traj : batch) traj.seed = seed;
  return batch;
}

LagrangianGradient lagrangian_policy_gradient(std::span<const Trajectory> batch,
                                              const SoftmaxPolicy& policy,
                                              const ValueBaseline& baseline_r,
                                              std::span<const ValueBaseline* const> baseline_c,
                                              std::span<const double> lambda,
                                              const PolicyGradientConfig& cfg) {
  cfg.gae.validate();
  if (lambda.size() != baseline_c.size()) {
    throw std::invalid_argument("need one cost baseline per multiplier");
  }
  for (double l : lambda) {
    if (!(l >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  }
  const std::size_t m = lambda.size();

  LagrangianGradient out;
  out.value_targets.resize(m + 1);
  std::vector<std::vector<double>> adv(m + 1);
  std::vector<std::size_t> actions;
  for (const Trajectory& traj : batch) {
    for (std::size_t ch = 0; ch <= m; ++ch) {
      const ValueBaseline& b = ch == 0 ? baseline_r : *baseline_c[ch - 1];
      ChannelGae g = channel_gae(traj, b, ch, cfg.gae);
      for (std::size_t t = 0; t < g.advantages.size(); ++t) {
        out.value_targets[ch].push_back(g.advantages[t] + g.values[t]);
      }
      adv[ch].insert(adv[ch].end(), g.advantages.begin(), g.advantages.end());
    }
    for (const Transition& tr : traj.transitions) {
      out.states.push_back(&tr.state);
      actions.push_back(tr.action);
    }
  }
  const std::size_t n = out.states.size();
  if (n == 0) throw std::invalid_argument("lagrangian_policy_gradient: empty batch");

  if (cfg.normalization == AdvantageNormalization::kPerChannel) {
    for (auto& a : adv) standardize(a);
  }
  std::vector<double> combined(adv[0]);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < n; ++t) combined[t] -= lambda[i] * adv[i + 1][t];
  }
  if (cfg.normalization == AdvantageNormalization::kCombined) standardize(combined);

  const Eigen::MatrixXd logits = policy.batch_logits(out.states);
  const Index na = logits.rows();
  Eigen::MatrixXd logit_grads(na, static_cast<Index>(n));
  const double inv_n = 1.0 / static_cast<double>(n);
  double entropy_sum = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const Eigen::VectorXd p = softmax(logits.col(static_cast<Index>(t)));
    const Eigen::ArrayXd logp = p.array().max(1e-300).log();
    const double entropy = -(p.array() * logp).sum();
    entropy_sum += entropy;
    // d log pi(a) / dz = e_a - pi;  dH / dz = -pi * (log pi + H)
    Eigen::VectorXd g = -combined[t] * p;
    g(static_cast<Index>(actions[t])) += combined[t];
    if (cfg.entropy_coef != 0.0) {
      g -= cfg.entropy_coef * (p.array() * (logp + entropy)).matrix();
    }
    logit_grads.col(static_cast<Index>(t)) = g * inv_n;
  }
  out.gradient = Eigen::VectorXd::Zero(static_cast<Index>(policy.num_parameters()));
  policy.accumulate_logit_gradient(out.states, logit_grads, out.gradient);
  out.mean_entropy = entropy_sum * inv_n;
  return out;
}

double policy_update(SoftmaxPolicy& policy, const Eigen::VectorXd& gradient, double alpha,
                     double clip_norm) {
  if (gradient.size() != policy.parameters().size()) {
    throw std::invalid_argument("policy_update: gradient has wrong size");
  }
  if (!gradient.allFinite()) throw NonFiniteError("policy_update: non-finite gradient");
  const double norm = gradient.norm();
  const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
  Eigen::VectorXd next = policy.parameters() + (alpha * scale) * gradient;
  if (!next.allFinite()) throw NonFiniteError("policy_update: parameters became non-finite");
  policy.set_parameters(next);
  return norm;
}

Eigen::VectorXd exact_policy_gradient(const TabularCmdp& cmdp, const TabularSoftmaxPolicy& policy,
                                      std::span<const double> lambda) {
  if (policy.num_states() != cmdp.num_states() || policy.num_actions() != cmdp.num_actions()) {
    throw std::invalid_argument("exact_policy_gradient: policy does not match the CMDP");
  }
  const TabularPolicy pi = policy.table();
  Eigen::VectorXd v = state_values(cmdp, pi, 0);
  for (std::size_t i = 0; i < lambda.size(); ++i) v -= lambda[i] * state_values(cmdp, pi, i + 1);
  const Eigen::VectorXd occ = discounted_occupancy(cmdp, pi);
  const std::size_t na = cmdp.num_actions();
  Eigen::VectorXd grad(static_cast<Index>(cmdp.num_states() * na));
  for (std::size_t s = 0; s < cmdp.num_states(); ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      double q = 0.0;
      for (const auto& o : cmdp.outcomes(s, a)) {
        double signal = o.reward;
        for (std::size_t i = 0; i < lambda.size(); ++i) signal -= lambda[i] * o.costs[i];
        q += o.probability * (signal + cmdp.gamma() * v(static_cast<Index>(o.next_state)));
      }
      const auto si = static_cast<Index>(s);
      grad(static_cast<Index>(s * na + a)) =
          occ(si) * pi(si, static_cast<Index>(a)) * (q - v(si));
    }
  }
  return grad;
}

OnPolicyLearner::OnPolicyLearner(std::unique_ptr<SoftmaxPolicy> policy,
                                 std::unique_ptr<ValueBaseline> reward,
                                 std::vector<std::unique_ptr<ValueBaseline>> costs,
                                 OnPolicyConfig cfg)
    : policy_(std::move(policy)),
      reward_(std::move(reward)),
      costs_(std::move(costs)),
      cfg_(cfg) {
  cfg_.pg.gae.validate();
  if (!(cfg_.alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(cfg_.clip_norm > 0.0)) throw std::invalid_argument("clip norm must be positive");
  if (!(cfg_.pg.entropy_coef >= 0.0)) throw std::invalid_argument("entropy_coef must be >= 0");
}

double OnPolicyLearner::update(std::span<const Trajectory> batch, std::span<const double> lambda,
                               Rng& rng) {
  std::vector<const ValueBaseline*> cost_ptrs;
  for (const auto& c : costs_) cost_ptrs.push_back(c.get());
  LagrangianGradient g =
      lagrangian_policy_gradient(batch, *policy_, *reward_, cost_ptrs, lambda, cfg_.pg);
  const double norm = policy_update(*policy_, g.gradient, cfg_.alpha, cfg_.clip_norm);
  reward_->fit(g.states, g.value_targets[0], rng);
  for (std::size_t i = 0; i < costs_.size(); ++i) costs_[i]->fit(g.states, g.value_targets[i + 1], rng);
  return norm;
}

}  // namespace apdo
