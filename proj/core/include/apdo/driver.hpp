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
#include <vector>

#include "apdo/cmdp.hpp"
#include "apdo/environment.hpp"
#include "apdo/pd_ddpg.hpp"
#include "apdo/policy_gradient.hpp"

namespace apdo {

enum class PolicyKind {
  kAuto,  ///< tabular when the environment enumerates its states, else Mlp
  kTabular,
  kMlp,
};

struct PdoConfig {
  double alpha = 1.0;  ///< primal step size
  double beta = 0.1;   ///< dual step size
  std::size_t epochs = 100;
  std::size_t batch_size = 3000;
  double gamma = 0.995;
  /// Constraint limits; empty means the environment's own.
  std::vector<double> limits;
  double gae_lambda = 0.95;
  AdvantageNormalization normalization = AdvantageNormalization::kCombined;
  double entropy_coef = 0.0;
  double clip_norm = kDefaultClipNorm;
  double lambda_init = 0.0;

  PolicyKind policy = PolicyKind::kAuto;
  std::vector<std::size_t> policy_hidden{64, 32};
  std::vector<std::size_t> baseline_hidden{64, 32};
  /// Defaults to 1 for tabular baselines and 1e-3 (Adam) for Mlp ones.
  std::optional<double> baseline_lr;
  std::size_t baseline_epochs = 5;
  std::size_t baseline_minibatch = 64;

  /// Fill RunRecord::wall_s; off by default so outputs are reproducible.
  bool record_wall_clock = false;

  void validate() const;
};

struct ApdoConfig : PdoConfig {
  std::size_t k_adj = 5;
  std::size_t buffer_capacity = 100000;
  /// gamma and limits are taken from the on-policy settings.
  PdDdpgConfig offpolicy;

  void validate() const;
};

/// Standalone primal-dual DDPG agent interacting with the environment.
struct DdpgRunConfig {
  std::size_t epochs = 100;
  std::size_t steps_per_epoch = 3000;
  std::size_t buffer_capacity = 100000;
  PdDdpgConfig agent;
  bool record_wall_clock = false;
};

struct RunRecord {
  std::size_t epoch = 0;
  double avg_return = 0.0;
  std::vector<double> avg_cost;
  /// Multipliers in effect while this epoch's batch was collected.
  std::vector<double> lambda;
  /// Environment steps consumed up to and including this epoch.
  std::size_t samples = 0;
  double wall_s = 0.0;
  bool adjusted = false;
  /// Set on the adjusted record: the value the multipliers were reset to.
  std::optional<std::vector<double>> lambda_off;
};

/// Mean discounted cost of the complete trajectories minus d, per
/// constraint. Throws when the batch has no complete trajectory.
std::vector<double> estimate_constraint_gap(std::span<const Trajectory> batch, double gamma,
                                            std::span<const double> limits);

/// Mean discounted return of the complete trajectories.
double estimate_return(std::span<const Trajectory> batch, double gamma);

/// lambda_i <- max(0, lambda_i + beta * gap_i); the result is pushed to the
/// history of the returned state.
DualState dual_ascent_step(const DualState& dual, std::span<const double> gap, double beta);

std::vector<RunRecord> run_pdo(const Environment& env, const PdoConfig& cfg, std::uint64_t seed);
std::vector<RunRecord> run_apdo(const Environment& env, const ApdoConfig& cfg, std::uint64_t seed);
std::vector<RunRecord> run_primal_dual_ddpg(const Environment& env, const DdpgRunConfig& cfg,
                                            std::uint64_t seed);

}  // namespace apdo
