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

#include "apdo/driver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace apdo {

void PdoConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  // beta = 0 is allowed: it freezes the multipliers at lambda_init
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  GaeConfig{gae_lambda, gamma}.validate();
  if (!(entropy_coef >= 0.0)) throw std::invalid_argument("entropy_coef must be non-negative");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("clip_norm must be positive");
  if (!(lambda_init >= 0.0)) throw std::invalid_argument("lambda_init must be non-negative");
  for (double d : limits) {
    if (!std::isfinite(d)) throw std::invalid_argument("limits must be finite");
  }
  if (baseline_lr && !(*baseline_lr > 0.0)) throw std::invalid_argument("baseline_lr must be positive");
}

void ApdoConfig::validate() const {
  PdoConfig::validate();
  if (buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be positive");
}

namespace {

std::vector<double> mean_complete_costs(std::span<const Trajectory> batch, double gamma,
                                        std::size_t m) {
  std::vector<double> sum(m, 0.0);
  std::size_t count = 0;
  for (const Trajectory& traj : batch) {
    if (!traj.complete()) continue;
    const std::vector<double> c = trajectory_cost(traj, gamma);
    if (c.size() != m) throw std::invalid_argument("trajectory cost dimension does not match limits");
    for (std::size_t i = 0; i < m; ++i) sum[i] += c[i];
    ++count;
  }
  if (count == 0) {
    throw std::invalid_argument("batch has no complete trajectory; increase the batch size");
  }
  for (double& s : sum) s /= static_cast<double>(count);
  return sum;
}

void require_finite(double v, const char* what, std::size_t epoch) {
  if (!std::isfinite(v)) {
    throw NonFiniteError(std::string(what) + " is not finite at epoch " + std::to_string(epoch));
  }
}

void check_record(const RunRecord& r) {
  require_finite(r.avg_return, "avg_return", r.epoch);
  for (double c : r.avg_cost) require_finite(c, "avg_cost", r.epoch);
  for (double l : r.lambda) require_finite(l, "lambda", r.epoch);
}

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

std::vector<double> resolve_limits(const Environment& env, const std::vector<double>& limits) {
  if (limits.empty()) return env.limits();
  if (limits.size() != env.num_constraints()) {
    throw std::invalid_argument("config has " + std::to_string(limits.size()) +
                                " limits but the environment has " +
                                std::to_string(env.num_constraints()) + " constraints");
  }
  return limits;
}

OnPolicyLearner make_learner(const Environment& env, const PdoConfig& cfg, std::uint64_t seed) {
  PolicyKind kind = cfg.policy;
  if (kind == PolicyKind::kAuto) kind = env.num_states() > 0 ? PolicyKind::kTabular : PolicyKind::kMlp;
  if (kind == PolicyKind::kTabular && env.num_states() == 0) {
    throw std::invalid_argument("tabular policy requested for an environment without state indices");
  }
  const std::size_t m = env.num_constraints();
  std::unique_ptr<SoftmaxPolicy> policy;
  std::unique_ptr<ValueBaseline> reward;
  std::vector<std::unique_ptr<ValueBaseline>> costs;
  Rng init = make_rng(seed, "policy_init");
  Rng baseline_init = make_rng(seed, "baseline_init");
  if (kind == PolicyKind::kTabular) {
    const double lr = cfg.baseline_lr.value_or(1.0);
    policy = std::make_unique<TabularSoftmaxPolicy>(env.num_states(), env.num_actions());
    reward = std::make_unique<TabularBaseline>(env.num_states(), lr);
    for (std::size_t i = 0; i < m; ++i) costs.push_back(std::make_unique<TabularBaseline>(env.num_states(), lr));
  } else {
    const double lr = cfg.baseline_lr.value_or(1e-3);
    policy = std::make_unique<MlpSoftmaxPolicy>(env.feature_dim(), cfg.policy_hidden,
                                                env.num_actions(), init);
    auto make_baseline = [&] {
      return std::make_unique<MlpBaseline>(env.feature_dim(), cfg.baseline_hidden, lr,
                                           cfg.baseline_epochs, cfg.baseline_minibatch,
                                           baseline_init);
    };
    reward = make_baseline();
    for (std::size_t i = 0; i < m; ++i) costs.push_back(make_baseline());
  }
  OnPolicyConfig ocfg;
  ocfg.alpha = cfg.alpha;
  ocfg.clip_norm = cfg.clip_norm;
  ocfg.pg.gae = GaeConfig{cfg.gae_lambda, cfg.gamma};
  ocfg.pg.normalization = cfg.normalization;
  ocfg.pg.entropy_coef = cfg.entropy_coef;
  return OnPolicyLearner(std::move(policy), std::move(reward), std::move(costs), ocfg);
}

// Shared loop of PDO and APDO; `apdo` is null for plain PDO.
std::vector<RunRecord> primal_dual_loop(const Environment& env_proto, const PdoConfig& cfg,
                                        const ApdoConfig* apdo, std::uint64_t seed) {
  cfg.validate();
  std::vector<RunRecord> records;
  if (cfg.epochs == 0) return records;

  const std::vector<double> limits = resolve_limits(env_proto, cfg.limits);
  std::unique_ptr<Environment> env = env_proto.clone();
  OnPolicyLearner learner = make_learner(*env, cfg, seed);
  Rng action_rng = make_rng(seed, "sampling");
  Rng env_rng = make_rng(seed, "env");
  Rng baseline_rng = make_rng(seed, "baseline_fit");
  DualState dual(limits.size(), cfg.lambda_init);

  std::optional<ReplayBuffer> buffer;
  PdDdpgConfig off_cfg;
  if (apdo != nullptr) {
    buffer.emplace(apdo->buffer_capacity);
    off_cfg = apdo->offpolicy;
    off_cfg.gamma = cfg.gamma;
    off_cfg.limits = limits;
    off_cfg.validate();
  }

  const Stopwatch clock(cfg.record_wall_clock);
  std::size_t samples = 0;
  for (std::size_t k = 0; k < cfg.epochs; ++k) {
    const std::vector<Trajectory> batch =
        sample_batch(*env, learner.policy(), cfg.batch_size, action_rng, env_rng);
    for (const Trajectory& traj : batch) samples += traj.size();
    if (buffer) {
      for (const Trajectory& traj : batch) buffer->push(traj);
    }

    RunRecord rec;
    rec.epoch = k;
    rec.avg_return = estimate_return(batch, cfg.gamma);
    rec.lambda = dual.lambda();
    const std::vector<double> gap = estimate_constraint_gap(batch, cfg.gamma, limits);
    for (std::size_t i = 0; i < gap.size(); ++i) rec.avg_cost.push_back(gap[i] + limits[i]);

    learner.update(batch, dual.lambda(), baseline_rng);
    dual = dual_ascent_step(dual, gap, cfg.beta);

    if (apdo != nullptr && k == apdo->k_adj) {
      const LambdaOffResult off =
          train_lambda_off(*buffer, env->num_actions(), off_cfg, derive_seed(seed, "offpolicy"));
      dual.assign(off.lambda_off);
      rec.adjusted = true;
      rec.lambda_off = off.lambda_off;
    }
    rec.samples = samples;
    rec.wall_s = clock.seconds();
    check_record(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace

std::vector<double> estimate_constraint_gap(std::span<const Trajectory> batch, double gamma,
                                            std::span<const double> limits) {
  if (batch.empty()) throw std::invalid_argument("estimate_constraint_gap: empty batch");
  std::vector<double> gap = mean_complete_costs(batch, gamma, limits.size());
  for (std::size_t i = 0; i < gap.size(); ++i) gap[i] -= limits[i];
  return gap;
}

double estimate_return(std::span<const Trajectory> batch, double gamma) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const Trajectory& traj : batch) {
    if (!traj.complete()) continue;
    sum += trajectory_return(traj, gamma);
    ++count;
  }
  if (count == 0) {
    throw std::invalid_argument("batch has no complete trajectory; increase the batch size");
  }
  return sum / static_cast<double>(count);
}

DualState dual_ascent_step(const DualState& dual, std::span<const double> gap, double beta) {
  if (gap.size() != dual.size()) throw std::invalid_argument("dual_ascent_step: gap has wrong size");
  if (!(beta >= 0.0)) throw std::invalid_argument("dual_ascent_step: beta must be non-negative");
  std::vector<double> next(dual.size());
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (!std::isfinite(gap[i])) throw NonFiniteError("dual_ascent_step: non-finite gap");
    next[i] = std::max(0.0, dual.lambda()[i] + beta * gap[i]);
  }
  DualState out = dual;
  out.push(std::move(next));
  return out;
}

std::vector<RunRecord> run_pdo(const Environment& env, const PdoConfig& cfg, std::uint64_t seed) {
  return primal_dual_loop(env, cfg, nullptr, seed);
}

std::vector<RunRecord> run_apdo(const Environment& env, const ApdoConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return primal_dual_loop(env, cfg, &cfg, seed);
}

std::vector<RunRecord> run_primal_dual_ddpg(const Environment& env_proto, const DdpgRunConfig& cfg,
                                            std::uint64_t seed) {
  std::vector<RunRecord> records;
  if (cfg.epochs == 0) return records;
  if (cfg.steps_per_epoch == 0) throw std::invalid_argument("steps_per_epoch must be positive");

  PdDdpgConfig agent_cfg = cfg.agent;
  agent_cfg.limits = resolve_limits(env_proto, agent_cfg.limits);
  std::unique_ptr<Environment> env = env_proto.clone();
  Rng init_rng = make_rng(seed, "offpolicy_init");
  Rng action_rng = make_rng(seed, "sampling");
  Rng env_rng = make_rng(seed, "env");
  Rng replay_rng = make_rng(seed, "buffer_sampling");
  PrimalDualDdpg agent(env->feature_dim(), env->num_actions(), agent_cfg, init_rng);
  ReplayBuffer buffer(cfg.buffer_capacity);
  const std::size_t horizon = env->horizon();
  const Stopwatch clock(cfg.record_wall_clock);

  std::size_t samples = 0;
  for (std::size_t k = 0; k < cfg.epochs; ++k) {
    RunRecord rec;
    rec.epoch = k;
    rec.lambda = agent.lambda();
    std::vector<Trajectory> episodes;
    std::size_t steps = 0;
    while (steps < cfg.steps_per_epoch) {
      Trajectory traj;
      Observation obs = env->reset(env_rng);
      for (;;) {
        const std::size_t action = agent.act(obs, action_rng, true);
        StepOutcome out = env->step(action, env_rng);
        Transition tr{std::move(obs), action, out.reward, std::move(out.costs), out.observation,
                      out.terminal};
        buffer.push(tr);
        traj.transitions.push_back(std::move(tr));
        ++steps;
        if (buffer.size() >= agent_cfg.minibatch) {
          agent.train_step(buffer.sample(agent_cfg.minibatch, replay_rng));
        }
        if (out.terminal) {
          traj.end = EpisodeEnd::kTerminal;
          break;
        }
        if (traj.size() >= horizon) {
          traj.end = EpisodeEnd::kTimeLimit;
          break;
        }
        if (steps == cfg.steps_per_epoch) {
          traj.end = EpisodeEnd::kBudget;
          break;
        }
        obs = std::move(out.observation);
      }
      episodes.push_back(std::move(traj));
    }
    samples += steps;
    rec.avg_return = estimate_return(episodes, agent_cfg.gamma);
    rec.avg_cost = mean_complete_costs(episodes, agent_cfg.gamma, agent_cfg.limits.size());
    rec.samples = samples;
    rec.wall_s = clock.seconds();
    check_record(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace apdo
