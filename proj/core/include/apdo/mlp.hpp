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

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "apdo/random.hpp"

namespace apdo {

enum class Activation { kTanh, kIdentity };

/// Raised when a gradient or parameter stops being finite.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fully connected network with `hidden` activations between layers and an
/// identity output. Batches are column-major: one sample per column.
///
/// Parameters live in one flat vector, layer by layer, each layer stored as
/// its weight matrix (out x in, column-major) followed by its bias.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<std::size_t> layer_sizes, Activation hidden = Activation::kTanh);

  /// Weights and biases uniform in +-1/sqrt(fan_in).
  void initialize(Rng& rng);

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  std::size_t num_layers() const { return sizes_.size() - 1; }
  std::size_t num_parameters() const { return static_cast<std::size_t>(params_.size()); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  Activation hidden_activation() const { return hidden_; }

  const Eigen::VectorXd& parameters() const { return params_; }
  void set_parameters(const Eigen::VectorXd& params);
  /// Mutable access; any cached forward pass becomes stale.
  Eigen::VectorXd& mutable_parameters();

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  /// Forward pass that keeps the activations for backward().
  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& inputs);
  /// Forward pass without touching the cache.
  Eigen::MatrixXd predict(const Eigen::MatrixXd& inputs) const;
  Eigen::VectorXd predict_one(const Eigen::VectorXd& input) const;

  /// Backpropagates `upstream` (dLoss/dOutput for the cached batch). Adds the
  /// parameter gradient into `param_grad` and returns dLoss/dInput.
  /// Throws std::logic_error if parameters changed since forward().
  Eigen::MatrixXd backward(const Eigen::MatrixXd& upstream, Eigen::VectorXd& param_grad) const;

  /// Human-readable location of a flat parameter index, e.g. "layer 1 weight (3, 0)".
  std::string describe_parameter(std::size_t index) const;

  std::string to_json() const;
  static Mlp from_json(const std::string& text);

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + sizes_[layer + 1] * sizes_[layer];
  }

  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  Activation hidden_ = Activation::kTanh;
  Eigen::VectorXd params_;

  std::vector<Eigen::MatrixXd> cache_;  // activations a_0 .. a_L
  std::uint64_t version_ = 0;
  std::uint64_t cache_version_ = ~std::uint64_t{0};
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(std::size_t n, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                     double eps = 1e-8);

  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam descent step. Throws NonFiniteError naming the
/// offending index when a gradient entry is NaN or infinite; `params` is left
/// untouched in that case.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state);
/// Same, with the error naming the layer and entry of `net`.
void adam_step(Mlp& net, const Eigen::VectorXd& grads, AdamState& state);

/// target <- tau * source + (1 - tau) * target
void soft_update(Mlp& target, const Mlp& source, double tau);

}  // namespace apdo
