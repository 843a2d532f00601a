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

#include "apdo/mlp.hpp"

#include <cmath>

#include "json.hpp"

namespace apdo {

namespace {

using Eigen::Index;

// tanh(x) = 1 - 2 / (exp(2x) + 1); Eigen vectorizes exp for doubles but not tanh.
void activate(Eigen::MatrixXd& z, Activation act) {
  if (act == Activation::kTanh) z = (1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0)).matrix();
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Activation hidden)
    : sizes_(std::move(layer_sizes)), hidden_(hidden) {
  if (sizes_.size() < 2) throw std::invalid_argument("Mlp needs at least an input and output size");
  for (std::size_t s : sizes_) {
    if (s == 0) throw std::invalid_argument("Mlp layer sizes must be positive");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Index>(total));
}

void Mlp::initialize(Rng& rng) {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    const std::size_t begin = offsets_[l];
    const std::size_t end = bias_offset(l) + sizes_[l + 1];
    for (std::size_t k = begin; k < end; ++k) {
      params_(static_cast<Index>(k)) = (2.0 * uniform01(rng) - 1.0) * bound;
    }
  }
  ++version_;
}

void Mlp::set_parameters(const Eigen::VectorXd& params) {
  if (params.size() != params_.size()) throw std::invalid_argument("parameter vector has wrong size");
  params_ = params;
  ++version_;
}

Eigen::VectorXd& Mlp::mutable_parameters() {
  ++version_;
  return params_;
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t layer) const {
  return {params_.data() + weight_offset(layer), static_cast<Index>(sizes_[layer + 1]),
          static_cast<Index>(sizes_[layer])};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
  return {params_.data() + bias_offset(layer), static_cast<Index>(sizes_[layer + 1])};
}

const Eigen::MatrixXd& Mlp::forward(const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
    throw std::invalid_argument("Mlp input has " + std::to_string(inputs.rows()) +
                                " rows, expected " + std::to_string(input_dim()));
  }
  cache_.resize(sizes_.size());
  cache_[0] = inputs;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    cache_[l + 1].noalias() = weight(l) * cache_[l];
    cache_[l + 1].colwise() += bias(l);
    if (l + 1 < num_layers()) activate(cache_[l + 1], hidden_);
  }
  cache_version_ = version_;
  return cache_.back();
}

Eigen::MatrixXd Mlp::predict(const Eigen::MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_dim()) {
    throw std::invalid_argument("Mlp input has " + std::to_string(inputs.rows()) +
                                " rows, expected " + std::to_string(input_dim()));
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * a;
    z.colwise() += bias(l);
    if (l + 1 < num_layers()) activate(z, hidden_);
    a.swap(z);
  }
  return a;
}

Eigen::VectorXd Mlp::predict_one(const Eigen::VectorXd& input) const {
  return predict(input).col(0);
}

Eigen::MatrixXd Mlp::backward(const Eigen::MatrixXd& upstream, Eigen::VectorXd& param_grad) const {
  if (cache_version_ != version_ || cache_.empty()) {
    throw std::logic_error("Mlp::backward: no forward pass for the current parameters");
  }
  if (static_cast<std::size_t>(upstream.rows()) != output_dim() ||
      upstream.cols() != cache_.back().cols()) {
    throw std::invalid_argument("Mlp::backward: upstream shape does not match the cached batch");
  }
  if (param_grad.size() != params_.size()) param_grad = Eigen::VectorXd::Zero(params_.size());

  Eigen::MatrixXd delta = upstream;
  for (std::size_t l = num_layers(); l-- > 0;) {
    Eigen::Map<Eigen::MatrixXd> gw(param_grad.data() + weight_offset(l),
                                   static_cast<Index>(sizes_[l + 1]), static_cast<Index>(sizes_[l]));
    Eigen::Map<Eigen::VectorXd> gb(param_grad.data() + bias_offset(l),
                                   static_cast<Index>(sizes_[l + 1]));
    gw.noalias() += delta * cache_[l].transpose();
    gb += delta.rowwise().sum();
    Eigen::MatrixXd below = weight(l).transpose() * delta;
    if (l > 0 && hidden_ == Activation::kTanh) {
      below.array() *= 1.0 - cache_[l].array().square();
    }
    delta.swap(below);
  }
  return delta;
}

std::string Mlp::describe_parameter(std::size_t index) const {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const std::size_t rows = sizes_[l + 1];
    if (index < bias_offset(l)) {
      const std::size_t k = index - weight_offset(l);
      return "layer " + std::to_string(l) + " weight (" + std::to_string(k % rows) + ", " +
             std::to_string(k / rows) + ")";
    }
    if (index < bias_offset(l) + rows) {
      return "layer " + std::to_string(l) + " bias (" + std::to_string(index - bias_offset(l)) + ")";
    }
  }
  return "parameter " + std::to_string(index) + " (out of range)";
}

std::string Mlp::to_json() const {
  nlohmann::json j;
  j["layer_sizes"] = sizes_;
  j["hidden_activation"] = hidden_ == Activation::kTanh ? "tanh" : "identity";
  j["parameters"] = std::vector<double>(params_.data(), params_.data() + params_.size());
  return j.dump();
}

Mlp Mlp::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("Mlp checkpoint: ") + e.what());
  }
  const std::string act = j.at("hidden_activation").get<std::string>();
  if (act != "tanh" && act != "identity") {
    throw std::invalid_argument("Mlp checkpoint: unknown activation '" + act + "'");
  }
  Mlp net(j.at("layer_sizes").get<std::vector<std::size_t>>(),
          act == "tanh" ? Activation::kTanh : Activation::kIdentity);
  const auto p = j.at("parameters").get<std::vector<double>>();
  if (p.size() != net.num_parameters()) {
    throw std::invalid_argument("Mlp checkpoint: parameter count does not match layer sizes");
  }
  net.set_parameters(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Index>(p.size())));
  return net;
}

AdamState::AdamState(std::size_t n, double lr_, double beta1_, double beta2_, double eps_)
    : m(Eigen::VectorXd::Zero(static_cast<Index>(n))),
      v(Eigen::VectorXd::Zero(static_cast<Index>(n))),
      lr(lr_),
      beta1(beta1_),
      beta2(beta2_),
      eps(eps_) {}

namespace {

Index first_non_finite(const Eigen::VectorXd& g) {
  for (Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g(i))) return i;
  }
  return -1;
}

void adam_apply(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& s) {
  if (grads.size() != params.size() || s.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  params.array() -= s.lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

}  // namespace

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state) {
  if (const Index bad = first_non_finite(grads); bad >= 0) {
    throw NonFiniteError("non-finite gradient at parameter index " + std::to_string(bad));
  }
  adam_apply(params, grads, state);
}

void adam_step(Mlp& net, const Eigen::VectorXd& grads, AdamState& state) {
  if (const Index bad = first_non_finite(grads); bad >= 0) {
    throw NonFiniteError("non-finite gradient at " +
                         net.describe_parameter(static_cast<std::size_t>(bad)));
  }
  adam_apply(net.mutable_parameters(), grads, state);
}

void soft_update(Mlp& target, const Mlp& source, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("soft_update: tau must be in [0, 1]");
  if (target.layer_sizes() != source.layer_sizes()) {
    throw std::invalid_argument("soft_update: network shapes differ");
  }
  Eigen::VectorXd& p = target.mutable_parameters();
  p = tau * source.parameters() + (1.0 - tau) * p;
}

}  // namespace apdo
