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

#include "apdo/policy.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace apdo {

using Eigen::Index;

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp().matrix();
  return p / p.sum();
}

Eigen::MatrixXd SoftmaxPolicy::batch_logits(std::span<const Observation* const> states) const {
  Eigen::MatrixXd out(static_cast<Index>(num_actions()), static_cast<Index>(states.size()));
  for (std::size_t k = 0; k < states.size(); ++k) out.col(static_cast<Index>(k)) = logits(*states[k]);
  return out;
}

std::size_t SoftmaxPolicy::sample(const Observation& obs, Rng& rng) const {
  return sample_categorical(probabilities(obs), rng);
}

TabularSoftmaxPolicy::TabularSoftmaxPolicy(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states),
      num_actions_(num_actions),
      theta_(Eigen::VectorXd::Zero(static_cast<Index>(num_states * num_actions))) {
  if (num_states == 0 || num_actions == 0) {
    throw std::invalid_argument("tabular policy needs at least one state and action");
  }
}

void TabularSoftmaxPolicy::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != theta_.size()) throw std::invalid_argument("parameter vector has wrong size");
  theta_ = params;
}

Eigen::VectorXd TabularSoftmaxPolicy::logits(const Observation& obs) const {
  if (obs.index >= num_states_) {
    throw std::invalid_argument("tabular policy needs an observation index below " +
                                std::to_string(num_states_));
  }
  return theta_.segment(static_cast<Index>(obs.index * num_actions_),
                        static_cast<Index>(num_actions_));
}

std::unique_ptr<SoftmaxPolicy> TabularSoftmaxPolicy::clone() const {
  return std::make_unique<TabularSoftmaxPolicy>(*this);
}

void TabularSoftmaxPolicy::accumulate_logit_gradient(std::span<const Observation* const> states,
                                                     const Eigen::MatrixXd& logit_grads,
                                                     Eigen::VectorXd& grad) const {
  if (grad.size() != theta_.size()) grad = Eigen::VectorXd::Zero(theta_.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const std::size_t s = states[k]->index;
    if (s >= num_states_) throw std::invalid_argument("observation index out of range");
    grad.segment(static_cast<Index>(s * num_actions_), static_cast<Index>(num_actions_)) +=
        logit_grads.col(static_cast<Index>(k));
  }
}

TabularPolicy TabularSoftmaxPolicy::table() const {
  TabularPolicy pi(static_cast<Index>(num_states_), static_cast<Index>(num_actions_));
  for (std::size_t s = 0; s < num_states_; ++s) {
    pi.row(static_cast<Index>(s)) =
        softmax(theta_.segment(static_cast<Index>(s * num_actions_), static_cast<Index>(num_actions_)))
            .transpose();
  }
  return pi;
}

MlpSoftmaxPolicy::MlpSoftmaxPolicy(std::size_t feature_dim, const std::vector<std::size_t>& hidden,
                                   std::size_t num_actions, Rng& init_rng) {
  std::vector<std::size_t> sizes{feature_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(num_actions);
  net_ = Mlp(sizes);
  net_.initialize(init_rng);
}

Eigen::VectorXd MlpSoftmaxPolicy::logits(const Observation& obs) const {
  return net_.predict_one(obs.features);
}

namespace {

Eigen::MatrixXd stack_features(std::span<const Observation* const> states, std::size_t dim) {
  Eigen::MatrixXd x(static_cast<Index>(dim), static_cast<Index>(states.size()));
  for (std::size_t k = 0; k < states.size(); ++k) x.col(static_cast<Index>(k)) = states[k]->features;
  return x;
}

}  // namespace

Eigen::MatrixXd MlpSoftmaxPolicy::batch_logits(std::span<const Observation* const> states) const {
  return net_.predict(stack_features(states, net_.input_dim()));
}

std::unique_ptr<SoftmaxPolicy> MlpSoftmaxPolicy::clone() const {
  return std::make_unique<MlpSoftmaxPolicy>(*this);
}

void MlpSoftmaxPolicy::accumulate_logit_gradient(std::span<const Observation* const> states,
                                                 const Eigen::MatrixXd& logit_grads,
                                                 Eigen::VectorXd& grad) const {
  if (states.empty()) return;
  net_.forward(stack_features(states, net_.input_dim()));
  net_.backward(logit_grads, grad);
}

TabularBaseline::TabularBaseline(std::size_t num_states, double lr)
    : values_(Eigen::VectorXd::Zero(static_cast<Index>(num_states))), lr_(lr) {
  if (!(lr > 0.0 && lr <= 1.0)) throw std::invalid_argument("tabular baseline lr must be in (0, 1]");
}

double TabularBaseline::value(const Observation& obs) const {
  if (obs.index >= static_cast<std::size_t>(values_.size())) {
    throw std::invalid_argument("tabular baseline needs an observation index");
  }
  return values_(static_cast<Index>(obs.index));
}

void TabularBaseline::fit(std::span<const Observation* const> states,
                          std::span<const double> targets, Rng&) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(values_.size());
  Eigen::VectorXd count = Eigen::VectorXd::Zero(values_.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto s = static_cast<Index>(states[k]->index);
    sum(s) += targets[k];
    count(s) += 1.0;
  }
  for (Index s = 0; s < values_.size(); ++s) {
    if (count(s) > 0.0) values_(s) += lr_ * (sum(s) / count(s) - values_(s));
  }
}

std::unique_ptr<ValueBaseline> TabularBaseline::clone() const {
  return std::make_unique<TabularBaseline>(*this);
}

void TabularBaseline::set_table(const Eigen::VectorXd& values) {
  if (values.size() != values_.size()) throw std::invalid_argument("baseline table has wrong size");
  values_ = values;
}

MlpBaseline::MlpBaseline(std::size_t feature_dim, const std::vector<std::size_t>& hidden, double lr,
                         std::size_t epochs, std::size_t minibatch, Rng& init_rng)
    : epochs_(epochs), minibatch_(std::max<std::size_t>(1, minibatch)) {
  std::vector<std::size_t> sizes{feature_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  net_ = Mlp(sizes);
  net_.initialize(init_rng);
  adam_ = AdamState(net_.num_parameters(), lr);
}

double MlpBaseline::value(const Observation& obs) const { return net_.predict_one(obs.features)(0); }

void MlpBaseline::fit(std::span<const Observation* const> states, std::span<const double> targets,
                      Rng& rng) {
  const std::size_t n = states.size();
  if (n == 0) return;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd grad(static_cast<Index>(net_.num_parameters()));
  for (std::size_t epoch = 0; epoch < epochs_; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(i, rng)]);
    for (std::size_t begin = 0; begin < n; begin += minibatch_) {
      const std::size_t end = std::min(n, begin + minibatch_);
      const auto b = static_cast<Index>(end - begin);
      Eigen::MatrixXd x(static_cast<Index>(net_.input_dim()), b);
      Eigen::RowVectorXd y(b);
      for (std::size_t k = begin; k < end; ++k) {
        x.col(static_cast<Index>(k - begin)) = states[order[k]]->features;
        y(static_cast<Index>(k - begin)) = targets[order[k]];
      }
      const Eigen::MatrixXd& out = net_.forward(x);
      const Eigen::MatrixXd upstream = (2.0 / static_cast<double>(b)) * (out - y);
      grad.setZero();
      net_.backward(upstream, grad);
      adam_step(net_, grad, adam_);
    }
  }
}

std::unique_ptr<ValueBaseline> MlpBaseline::clone() const {
  return std::make_unique<MlpBaseline>(*this);
}

}  // namespace apdo
