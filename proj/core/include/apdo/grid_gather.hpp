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

#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

#include "apdo/cmdp.hpp"
#include "apdo/environment.hpp"

namespace apdo {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

struct GridLayout {
  std::vector<Cell> apples;
  std::vector<Cell> bombs;
};

/// Discrete gather task: a point agent on an n x n grid collects apples
/// (reward) and must avoid bombs (cost).
struct GridGatherSpec {
  int grid_size = 5;
  int num_apples = 2;
  int num_bombs = 8;
  double apple_reward = 10.0;
  double bomb_cost = 1.0;
  double cost_limit = 0.2;
  int episode_length = 15;
  /// Items are placed once from this seed and stay fixed across episodes.
  /// When unset (and no explicit layout is given) every episode draws a
  /// fresh layout.
  std::optional<std::uint64_t> layout_seed;
  /// Explicit fixed layout; takes precedence over layout_seed.
  std::optional<GridLayout> layout;

  void validate() const;
  bool fixed_layout() const { return layout.has_value() || layout_seed.has_value(); }
  int num_cells() const { return grid_size * grid_size; }
};

/// Items still on the board are kept sorted.
struct EnvState {
  Cell agent;
  std::vector<Cell> apples;
  std::vector<Cell> bombs;
  int step = 0;

  bool operator==(const EnvState&) const = default;
};

enum class Move : std::size_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr std::size_t kNumMoves = 4;

struct GridStep {
  EnvState state;
  double reward = 0.0;
  double cost = 0.0;
  bool done = false;
};

/// The fixed layout of a spec (explicit, or drawn from layout_seed).
/// Throws when the spec randomizes layouts per episode.
GridLayout resolve_layout(const GridGatherSpec& spec);

EnvState env_reset(const GridGatherSpec& spec, std::uint64_t seed);
bool episode_done(const GridGatherSpec& spec, const EnvState& state);
/// Pure: the same (spec, state, move) always gives the same result.
GridStep env_step(const GridGatherSpec& spec, const EnvState& state, Move move);

Eigen::VectorXd grid_features(const GridGatherSpec& spec, const EnvState& state);
std::size_t grid_feature_dim(const GridGatherSpec& spec);

/// Enumeration of a fixed-layout instance: cell x apple mask x bomb mask x
/// step counter (0..episode_length).
class GridStateIndexer {
 public:
  explicit GridStateIndexer(const GridGatherSpec& spec);

  std::size_t num_states() const { return num_states_; }
  std::size_t index(const EnvState& state) const;
  EnvState state(std::size_t index) const;
  const GridLayout& layout() const { return layout_; }

 private:
  GridGatherSpec spec_;
  GridLayout layout_;
  std::size_t num_states_ = 0;
};

inline constexpr std::size_t kMaxTabularGridStates = 20000;

/// Exact CMDP of a fixed-layout instance. Done states are absorbing with
/// zero reward and cost.
TabularCmdp grid_to_tabular(const GridGatherSpec& spec, double gamma);

class GridGatherEnv final : public Environment {
 public:
  explicit GridGatherEnv(GridGatherSpec spec);

  std::string name() const override { return "grid_gather"; }
  std::size_t num_actions() const override { return kNumMoves; }
  std::size_t num_constraints() const override { return 1; }
  std::vector<double> limits() const override { return {spec_.cost_limit}; }
  std::size_t feature_dim() const override;
  std::size_t num_states() const override;
  std::size_t horizon() const override { return static_cast<std::size_t>(spec_.episode_length); }

  Observation reset(Rng& rng) override;
  StepOutcome step(std::size_t action, Rng& rng) override;
  std::unique_ptr<Environment> clone() const override;

  const GridGatherSpec& spec() const { return spec_; }
  const EnvState& state() const { return state_; }
  Observation observe(const EnvState& state) const;

 private:
  GridGatherSpec spec_;
  std::optional<GridStateIndexer> indexer_;
  EnvState state_;
  bool done_ = true;
};

}  // namespace apdo
