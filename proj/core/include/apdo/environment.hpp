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

#include <memory>
#include <string>
#include <vector>

#include "apdo/cmdp.hpp"
#include "apdo/random.hpp"

namespace apdo {

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  std::vector<double> costs;
  bool terminal = false;
};

/// Episodic simulator interface used by the samplers. An instance owns one
/// episode at a time and is confined to a single run.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t num_constraints() const = 0;
  virtual std::vector<double> limits() const = 0;
  virtual std::size_t feature_dim() const = 0;
  /// Number of enumerable states, or 0 when observations carry no index.
  virtual std::size_t num_states() const = 0;
  /// Episodes that have not terminated by this many steps are cut off.
  virtual std::size_t horizon() const = 0;

  virtual Observation reset(Rng& rng) = 0;
  virtual StepOutcome step(std::size_t action, Rng& rng) = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;
};

/// Simulates a TabularCmdp. Transitions into absorbing zero-signal states
/// are reported as terminal; otherwise episodes run to the truncation
/// horizon implied by gamma.
class TabularEnv final : public Environment {
 public:
  explicit TabularEnv(TabularCmdp cmdp, std::string name = "tabular");

  std::string name() const override { return name_; }
  std::size_t num_actions() const override { return cmdp_.num_actions(); }
  std::size_t num_constraints() const override { return cmdp_.num_constraints(); }
  std::vector<double> limits() const override { return cmdp_.limits(); }
  std::size_t feature_dim() const override { return cmdp_.num_states(); }
  std::size_t num_states() const override { return cmdp_.num_states(); }
  std::size_t horizon() const override { return horizon_; }

  Observation reset(Rng& rng) override;
  StepOutcome step(std::size_t action, Rng& rng) override;
  std::unique_ptr<Environment> clone() const override;

  const TabularCmdp& cmdp() const { return cmdp_; }
  bool absorbing(std::size_t s) const { return absorbing_[s]; }
  Observation observe(std::size_t s) const;

 private:
  TabularCmdp cmdp_;
  std::string name_;
  std::size_t horizon_;
  std::vector<bool> absorbing_;
  std::size_t state_ = kNoIndex;
};

/// Single state, two actions: 0 is safe (reward 1, cost 0), 1 is risky
/// (reward 10, cost 1). With p = P(risky), R(p) = (1 + 9p)/(1 - gamma) and
/// C(p) = p/(1 - gamma); the constrained optimum is p* = min(1, d(1 - gamma))
/// with multiplier 9 whenever the constraint binds.
TabularCmdp make_risky_chain(double gamma, double limit);

inline constexpr std::size_t kRiskyChainSafe = 0;
inline constexpr std::size_t kRiskyChainRisky = 1;

}  // namespace apdo
