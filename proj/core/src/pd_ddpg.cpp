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

#include "apdo/pd_ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "apdo/policy.hpp"

namespace apdo {

using Eigen::Index;

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition tr) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(tr));
    return;
  }
  items_[head_] = std::move(tr);
  head_ = (head_ + 1) % capacity_;
}

void ReplayBuffer::push(const Trajectory& traj) {
  for (const Transition& tr : traj.transitions) push(tr);
}

const Transition& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay buffer index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &items_[uniform_index(items_.size(), rng)];
  return out;
}

void PdDdpgConfig::validate() const {
  if (!(critic_lr > 0.0 && actor_lr > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (!(dual_lr >= 0.0)) throw std::invalid_argument("dual_lr_off must be non-negative");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in (0, 1]");
  if (minibatch == 0) throw std::invalid_argument("minibatch must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in [0, 1)");
  if (!(updates_per_sample >= 0.0)) throw std::invalid_argument("updates_per_sample must be >= 0");
  if (!(explore_sigma >= 0.0)) throw std::invalid_argument("explore_sigma must be >= 0");
  if (!(actor_entropy >= 0.0)) throw std::invalid_argument("actor_entropy must be >= 0");
  if (limits.empty()) throw std::invalid_argument("at least one constraint limit is required");
}

std::vector<double> average_dual_trace(const DualTrace& trace) {
  if (trace.empty()) throw std::invalid_argument("empty dual trace");
  std::vector<double> mean(trace.front().size(), 0.0);
  for (const auto& l : trace) {
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += l[i];
  }
  for (double& v : mean) v /= static_cast<double>(trace.size());
  return mean;
}

namespace {

Mlp make_net(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out, Rng& rng) {
  std::vector<std::size_t> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  Mlp net(sizes);
  net.initialize(rng);
  return net;
}

// Column-wise softmax.
Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p = logits.rowwise() - logits.colwise().maxCoeff();
  p = p.array().exp().matrix();
  return p.array().rowwise() / p.colwise().sum().array();
}

void check_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw NonFiniteError(std::string(what) + " is not finite");
}

}  // namespace

PrimalDualDdpg::PrimalDualDdpg(std::size_t feature_dim, std::size_t num_actions, PdDdpgConfig cfg,
                               Rng& init_rng)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  const std::size_t m = cfg_.limits.size();
  q_r_ = make_net(feature_dim, cfg_.critic_hidden, num_actions, init_rng);
  for (std::size_t i = 0; i < m; ++i) {
    q_c_.push_back(make_net(feature_dim, cfg_.critic_hidden, num_actions, init_rng));
  }
  actor_ = make_net(feature_dim, cfg_.actor_hidden, num_actions, init_rng);
  q_r_target_ = q_r_;
  q_c_target_ = q_c_;
  actor_target_ = actor_;
  adam_q_r_ = AdamState(q_r_.num_parameters(), cfg_.critic_lr);
  for (std::size_t i = 0; i < m; ++i) adam_q_c_.emplace_back(q_c_[i].num_parameters(), cfg_.critic_lr);
  adam_actor_ = AdamState(actor_.num_parameters(), cfg_.actor_lr);
  lambda_.assign(m, 0.0);
}

Eigen::MatrixXd PrimalDualDdpg::stack_states(std::span<const Transition* const> batch,
                                             bool next) const {
  Eigen::MatrixXd x(static_cast<Index>(actor_.input_dim()), static_cast<Index>(batch.size()));
  for (std::size_t k = 0; k < batch.size(); ++k) {
    x.col(static_cast<Index>(k)) = next ? batch[k]->next_state.features : batch[k]->state.features;
  }
  return x;
}

CriticTargets PrimalDualDdpg::critic_targets(std::span<const Transition* const> batch) const {
  const Index n = static_cast<Index>(batch.size());
  const std::size_t m = num_constraints();
  const Eigen::MatrixXd next = stack_states(batch, true);
  const Eigen::MatrixXd pi = softmax_cols(actor_target_.predict(next));
  const Eigen::RowVectorXd v_r = pi.cwiseProduct(q_r_target_.predict(next)).colwise().sum();
  CriticTargets out;
  out.reward.resize(n);
  out.costs.resize(static_cast<Index>(m), n);
  std::vector<Eigen::RowVectorXd> v_c(m);
  for (std::size_t i = 0; i < m; ++i) {
    v_c[i] = pi.cwiseProduct(q_c_target_[i].predict(next)).colwise().sum();
  }
  for (Index k = 0; k < n; ++k) {
    const Transition& tr = *batch[static_cast<std::size_t>(k)];
    const double carry = tr.terminal ? 0.0 : cfg_.gamma;
    out.reward(k) = tr.reward + carry * v_r(k);
    for (std::size_t i = 0; i < m; ++i) {
      out.costs(static_cast<Index>(i), k) = tr.costs[i] + carry * v_c[i](k);
    }
  }
  return out;
}

namespace {

double regress_step(Mlp& net, AdamState& adam, const Eigen::MatrixXd& x,
                    std::span<const Transition* const> batch, const Eigen::RowVectorXd& y) {
  const Index n = x.cols();
  const Eigen::MatrixXd& q = net.forward(x);
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(q.rows(), n);
  double loss = 0.0;
  for (Index k = 0; k < n; ++k) {
    const auto a = static_cast<Index>(batch[static_cast<std::size_t>(k)]->action);
    const double err = q(a, k) - y(k);
    loss += err * err;
    upstream(a, k) = 2.0 * err / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  check_finite(loss, "critic loss");
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Index>(net.num_parameters()));
  net.backward(upstream, grad);
  adam_step(net, grad, adam);
  return loss;
}

}  // namespace

CriticLosses PrimalDualDdpg::critic_update(std::span<const Transition* const> batch,
                                           const CriticTargets& targets) {
  const Eigen::MatrixXd x = stack_states(batch, false);
  CriticLosses losses;
  losses.reward = regress_step(q_r_, adam_q_r_, x, batch, targets.reward);
  for (std::size_t i = 0; i < num_constraints(); ++i) {
    losses.costs.push_back(
        regress_step(q_c_[i], adam_q_c_[i], x, batch, targets.costs.row(static_cast<Index>(i))));
  }
  return losses;
}

void PrimalDualDdpg::actor_dual_update(std::span<const Transition* const> batch) {
  const std::size_t m = num_constraints();
  const double n = static_cast<double>(batch.size());
  const Eigen::MatrixXd x = stack_states(batch, false);
  Eigen::MatrixXd q_l = q_r_.predict(x);
  std::vector<Eigen::MatrixXd> q_c(m);
  for (std::size_t i = 0; i < m; ++i) {
    q_c[i] = q_c_[i].predict(x);
    q_l -= lambda_[i] * q_c[i];
  }
  const Eigen::MatrixXd pi = softmax_cols(actor_.forward(x));

  // d/dz_a sum_b pi_b q_b = pi_a (q_a - sum_b pi_b q_b); Adam descends, so negate.
  const Eigen::RowVectorXd mean_q = pi.cwiseProduct(q_l).colwise().sum();
  Eigen::MatrixXd dz = -(pi.array() * (q_l.rowwise() - mean_q).array()).matrix() / n;
  if (cfg_.actor_entropy > 0.0) {
    // dH/dz_a = -pi_a (log pi_a + H)
    const Eigen::ArrayXXd log_pi = pi.array().max(1e-300).log();
    const Eigen::RowVectorXd entropy = -(pi.array() * log_pi).colwise().sum().matrix();
    dz.array() += cfg_.actor_entropy / n * pi.array() * (log_pi.rowwise() + entropy.array());
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Index>(actor_.num_parameters()));
  actor_.backward(dz, grad);
  adam_step(actor_, grad, adam_actor_);

  for (std::size_t i = 0; i < m; ++i) {
    const double expected_cost = pi.cwiseProduct(q_c[i]).colwise().sum().mean();
    const double dual_grad = expected_cost - cfg_.limits[i];
    check_finite(dual_grad, "dual gradient");
    lambda_[i] = std::max(0.0, lambda_[i] + cfg_.dual_lr * dual_grad);
  }
  trace_.push_back(lambda_);
}

void PrimalDualDdpg::update_targets() {
  soft_update(q_r_target_, q_r_, cfg_.tau);
  for (std::size_t i = 0; i < num_constraints(); ++i) soft_update(q_c_target_[i], q_c_[i], cfg_.tau);
  soft_update(actor_target_, actor_, cfg_.tau);
}

void PrimalDualDdpg::train_step(std::span<const Transition* const> batch) {
  const CriticTargets targets = critic_targets(batch);
  critic_update(batch, targets);
  actor_dual_update(batch);
  update_targets();
}

Eigen::VectorXd PrimalDualDdpg::action_probabilities(const Observation& obs) const {
  return softmax(actor_.predict_one(obs.features));
}

std::size_t PrimalDualDdpg::act(const Observation& obs, Rng& rng, bool explore) const {
  Eigen::VectorXd logits = actor_.predict_one(obs.features);
  if (explore && cfg_.explore_sigma > 0.0) {
    for (Index a = 0; a < logits.size(); ++a) logits(a) += cfg_.explore_sigma * standard_normal(rng);
  }
  return sample_categorical(softmax(logits), rng);
}

void PrimalDualDdpg::set_lambda(std::vector<double> lambda) {
  if (lambda.size() != num_constraints()) throw std::invalid_argument("lambda has wrong dimension");
  for (double l : lambda) {
    if (!(l >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  }
  lambda_ = std::move(lambda);
}

LambdaOffResult train_lambda_off(const ReplayBuffer& buffer, std::size_t num_actions,
                                 const PdDdpgConfig& cfg, std::uint64_t seed) {
  if (buffer.empty()) throw std::logic_error("train_lambda_off: replay buffer is empty");
  if (buffer[0].costs.size() != cfg.limits.size()) {
    throw std::invalid_argument("train_lambda_off: buffer cost dimension does not match limits");
  }
  std::size_t iterations = cfg.iterations;
  if (cfg.updates_per_sample > 0.0) {
    const double cap = std::ceil(cfg.updates_per_sample * static_cast<double>(buffer.size()));
    iterations = std::min(iterations, static_cast<std::size_t>(cap));
  }
  Rng init_rng = make_rng(seed, "offpolicy_init");
  Rng sample_rng = make_rng(seed, "buffer_sampling");
  PrimalDualDdpg agent(static_cast<std::size_t>(buffer[0].state.features.size()), num_actions, cfg,
                       init_rng);
  for (std::size_t it = 0; it < iterations; ++it) {
    agent.train_step(buffer.sample(cfg.minibatch, sample_rng));
  }
  LambdaOffResult out;
  out.iterations = iterations;
  out.final_lambda = agent.lambda();
  out.lambda_off = iterations > 0 ? average_dual_trace(agent.dual_trace()) : agent.lambda();
  return out;
}

}  // namespace apdo
