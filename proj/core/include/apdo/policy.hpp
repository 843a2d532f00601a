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
#include <span>
#include <vector>

#include "apdo/cmdp.hpp"
#include "apdo/mlp.hpp"
#include "apdo/random.hpp"

namespace apdo {

/// Numerically stable softmax.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// Softmax policy over a discrete action set.
class SoftmaxPolicy {
 public:
  virtual ~SoftmaxPolicy() = default;

  virtual std::size_t num_actions() const = 0;
  virtual const Eigen::VectorXd& parameters() const = 0;
  virtual void set_parameters(const Eigen::VectorXd& params) = 0;
  virtual Eigen::VectorXd logits(const Observation& obs) const = 0;
  /// Logits for many states, one column each.
  virtual Eigen::MatrixXd batch_logits(std::span<const Observation* const> states) const;
  virtual std::unique_ptr<SoftmaxPolicy> clone() const = 0;

  std::size_t num_parameters() const { return static_cast<std::size_t>(parameters().size()); }
  Eigen::VectorXd probabilities(const Observation& obs) const { return softmax(logits(obs)); }
  std::size_t sample(const Observation& obs, Rng& rng) const;

  /// Adds sum_k logit_grads.col(k) . d logits(states[k]) / d theta into `grad`.
  virtual void accumulate_logit_gradient(std::span<const Observation* const> states,
                                         const Eigen::MatrixXd& logit_grads,
                                         Eigen::VectorXd& grad) const = 0;
};

/// One logit per (state, action); parameters are stored state-major.
/// Requires observations with an index.
class TabularSoftmaxPolicy final : public SoftmaxPolicy {
 public:
  TabularSoftmaxPolicy(std::size_t num_states, std::size_t num_actions);

  std::size_t num_actions() const override { return num_actions_; }
  std::size_t num_states() const { return num_states_; }
  const Eigen::VectorXd& parameters() const override { return theta_; }
  void set_parameters(const Eigen::VectorXd& params) override;
  Eigen::VectorXd logits(const Observation& obs) const override;
  std::unique_ptr<SoftmaxPolicy> clone() const override;
  void accumulate_logit_gradient(std::span<const Observation* const> states,
                                 const Eigen::MatrixXd& logit_grads,
                                 Eigen::VectorXd& grad) const override;

  /// |S| x |A| action probabilities.
  TabularPolicy table() const;

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  Eigen::VectorXd theta_;
};

/// Mlp from observation features to action logits.
class MlpSoftmaxPolicy final : public SoftmaxPolicy {
 public:
  MlpSoftmaxPolicy(std::size_t feature_dim, const std::vector<std::size_t>& hidden,
                   std::size_t num_actions, Rng& init_rng);

  std::size_t num_actions() const override { return net_.output_dim(); }
  const Eigen::VectorXd& parameters() const override { return net_.parameters(); }
  void set_parameters(const Eigen::VectorXd& params) override { net_.set_parameters(params); }
  Eigen::VectorXd logits(const Observation& obs) const override;
  Eigen::MatrixXd batch_logits(std::span<const Observation* const> states) const override;
  std::unique_ptr<SoftmaxPolicy> clone() const override;
  void accumulate_logit_gradient(std::span<const Observation* const> states,
                                 const Eigen::MatrixXd& logit_grads,
                                 Eigen::VectorXd& grad) const override;

  const Mlp& net() const { return net_; }

 private:
  mutable Mlp net_;  // forward cache is scratch space for gradient passes
};

/// State-value estimate used as a GAE baseline for one signal channel.
class ValueBaseline {
 public:
  virtual ~ValueBaseline() = default;
  virtual double value(const Observation& obs) const = 0;
  /// Moves the estimate toward `targets` at the given states.
  virtual void fit(std::span<const Observation* const> states, std::span<const double> targets,
                   Rng& rng) = 0;
  virtual std::unique_ptr<ValueBaseline> clone() const = 0;
};

/// V(s) <- V(s) + lr * (mean target at s - V(s)) for every visited s.
class TabularBaseline final : public ValueBaseline {
 public:
  TabularBaseline(std::size_t num_states, double lr);

  double value(const Observation& obs) const override;
  void fit(std::span<const Observation* const> states, std::span<const double> targets,
           Rng& rng) override;
  std::unique_ptr<ValueBaseline> clone() const override;

  const Eigen::VectorXd& table() const { return values_; }
  void set_table(const Eigen::VectorXd& values);

 private:
  Eigen::VectorXd values_;
  double lr_;
};

/// Mlp regression on features; a few Adam epochs over shuffled minibatches
/// per fit.
class MlpBaseline final : public ValueBaseline {
 public:
  MlpBaseline(std::size_t feature_dim, const std::vector<std::size_t>& hidden, double lr,
              std::size_t epochs, std::size_t minibatch, Rng& init_rng);

  double value(const Observation& obs) const override;
  void fit(std::span<const Observation* const> states, std::span<const double> targets,
           Rng& rng) override;
  std::unique_ptr<ValueBaseline> clone() const override;

 private:
  Mlp net_;
  AdamState adam_;
  std::size_t epochs_;
  std::size_t minibatch_;
};

}  // namespace apdo
