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

#include "apdo/environment.hpp"

#include <stdexcept>

namespace apdo {

TabularEnv::TabularEnv(TabularCmdp cmdp, std::string name)
    : cmdp_(std::move(cmdp)),
      name_(std::move(name)),
      horizon_(truncation_horizon(cmdp_.gamma(), cmdp_.max_abs_signal())),
      absorbing_(cmdp_.num_states(), false) {
  for (std::size_t s = 0; s < cmdp_.num_states(); ++s) {
    bool absorbing = true;
    for (std::size_t a = 0; a < cmdp_.num_actions() && absorbing; ++a) {
      const auto row = cmdp_.outcomes(s, a);
      absorbing = row.size() == 1 && row[0].next_state == s && row[0].reward == 0.0;
      if (absorbing) {
        for (double c : row[0].costs) absorbing = absorbing && c == 0.0;
      }
    }
    absorbing_[s] = absorbing;
  }
}

Observation TabularEnv::observe(std::size_t s) const {
  Observation obs;
  obs.index = s;
  obs.features = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cmdp_.num_states()));
  obs.features(static_cast<Eigen::Index>(s)) = 1.0;
  return obs;
}

Observation TabularEnv::reset(Rng& rng) {
  const Eigen::Map<const Eigen::VectorXd> p0(cmdp_.initial_dist().data(),
                                             static_cast<Eigen::Index>(cmdp_.num_states()));
  state_ = sample_categorical(p0, rng);
  return observe(state_);
}

StepOutcome TabularEnv::step(std::size_t action, Rng& rng) {
  if (state_ == kNoIndex) throw std::logic_error("TabularEnv::step called before reset");
  if (action >= cmdp_.num_actions()) throw std::invalid_argument("action out of range");
  const auto row = cmdp_.outcomes(state_, action);
  const double u = uniform01(rng);
  double acc = 0.0;
  const Outcome* chosen = &row.back();
  for (const auto& o : row) {
    acc += o.probability;
    if (u < acc) {
      chosen = &o;
      break;
    }
  }
  StepOutcome out;
  out.reward = chosen->reward;
  out.costs = chosen->costs;
  out.observation = observe(chosen->next_state);
  out.terminal = absorbing_[chosen->next_state];
  state_ = chosen->next_state;
  return out;
}

std::unique_ptr<Environment> TabularEnv::clone() const {
  return std::make_unique<TabularEnv>(*this);
}

TabularCmdp make_risky_chain(double gamma, double limit) {
  if (!(limit >= 0.0)) throw std::invalid_argument("risky chain limit must be non-negative");
  std::vector<std::vector<Outcome>> outcomes(2);
  outcomes[kRiskyChainSafe] = {Outcome{0, 1.0, 1.0, {0.0}}};
  outcomes[kRiskyChainRisky] = {Outcome{0, 1.0, 10.0, {1.0}}};
  return TabularCmdp(1, 2, 1, std::move(outcomes), {limit}, gamma, {1.0});
}

}  // namespace apdo
