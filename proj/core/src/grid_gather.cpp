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

#include "apdo/grid_gather.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

namespace apdo {

namespace {

bool in_grid(const GridGatherSpec& spec, Cell c) {
  return c.row >= 0 && c.col >= 0 && c.row < spec.grid_size && c.col < spec.grid_size;
}

int cell_id(const GridGatherSpec& spec, Cell c) { return c.row * spec.grid_size + c.col; }

Cell cell_at(const GridGatherSpec& spec, int id) {
  return Cell{id / spec.grid_size, id % spec.grid_size};
}

// Random layout: a shuffled prefix of all cells, apples first.
GridLayout draw_layout(const GridGatherSpec& spec, Rng& rng) {
  std::vector<int> cells(static_cast<std::size_t>(spec.num_cells()));
  std::iota(cells.begin(), cells.end(), 0);
  const std::size_t needed = static_cast<std::size_t>(spec.num_apples + spec.num_bombs);
  for (std::size_t i = 0; i < needed; ++i) {
    const std::size_t j = i + uniform_index(cells.size() - i, rng);
    std::swap(cells[i], cells[j]);
  }
  GridLayout layout;
  for (int k = 0; k < spec.num_apples; ++k) layout.apples.push_back(cell_at(spec, cells[k]));
  for (int k = 0; k < spec.num_bombs; ++k)
    layout.bombs.push_back(cell_at(spec, cells[spec.num_apples + k]));
  std::sort(layout.apples.begin(), layout.apples.end());
  std::sort(layout.bombs.begin(), layout.bombs.end());
  return layout;
}

bool contains(const std::vector<Cell>& cells, Cell c) {
  return std::binary_search(cells.begin(), cells.end(), c);
}

}  // namespace

void GridGatherSpec::validate() const {
  if (grid_size < 1) throw std::invalid_argument("grid_size must be at least 1");
  if (num_apples < 0 || num_bombs < 0) throw std::invalid_argument("item counts must be >= 0");
  if (num_apples + num_bombs > num_cells() - 1) {
    throw std::invalid_argument("cannot place " + std::to_string(num_apples + num_bombs) +
                                " items on a " + std::to_string(grid_size) + "x" +
                                std::to_string(grid_size) + " grid and leave a free cell");
  }
  if (episode_length < 1) throw std::invalid_argument("episode_length must be at least 1");
  if (layout) {
    if (static_cast<int>(layout->apples.size()) != num_apples ||
        static_cast<int>(layout->bombs.size()) != num_bombs) {
      throw std::invalid_argument("explicit layout does not match num_apples/num_bombs");
    }
    std::set<Cell> seen;
    for (const auto& group : {layout->apples, layout->bombs}) {
      for (Cell c : group) {
        if (!in_grid(*this, c)) throw std::invalid_argument("layout cell outside the grid");
        if (!seen.insert(c).second) throw std::invalid_argument("layout cells overlap");
      }
    }
  }
}

GridLayout resolve_layout(const GridGatherSpec& spec) {
  spec.validate();
  if (spec.layout) {
    GridLayout layout = *spec.layout;
    std::sort(layout.apples.begin(), layout.apples.end());
    std::sort(layout.bombs.begin(), layout.bombs.end());
    return layout;
  }
  if (!spec.layout_seed) throw std::invalid_argument("spec randomizes the layout per episode");
  Rng rng(*spec.layout_seed);
  return draw_layout(spec, rng);
}

EnvState env_reset(const GridGatherSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  GridLayout layout = spec.fixed_layout() ? resolve_layout(spec) : draw_layout(spec, rng);
  std::vector<Cell> empty;
  for (int id = 0; id < spec.num_cells(); ++id) {
    const Cell c = cell_at(spec, id);
    if (!contains(layout.apples, c) && !contains(layout.bombs, c)) empty.push_back(c);
  }
  EnvState state;
  state.agent = empty[uniform_index(empty.size(), rng)];
  state.apples = std::move(layout.apples);
  state.bombs = std::move(layout.bombs);
  state.step = 0;
  return state;
}

bool episode_done(const GridGatherSpec& spec, const EnvState& state) {
  if (state.step >= spec.episode_length) return true;
  return spec.num_apples > 0 && state.apples.empty();
}

GridStep env_step(const GridGatherSpec& spec, const EnvState& state, Move move) {
  if (episode_done(spec, state)) throw std::logic_error("env_step on a finished episode");
  GridStep out;
  out.state = state;
  Cell next = state.agent;
  switch (move) {
    case Move::kUp: next.row -= 1; break;
    case Move::kDown: next.row += 1; break;
    case Move::kLeft: next.col -= 1; break;
    case Move::kRight: next.col += 1; break;
    default: throw std::invalid_argument("unknown move");
  }
  if (!in_grid(spec, next)) next = state.agent;  // walls clamp
  if (next != state.agent) {
    auto& apples = out.state.apples;
    auto& bombs = out.state.bombs;
    if (auto it = std::lower_bound(apples.begin(), apples.end(), next);
        it != apples.end() && *it == next) {
      apples.erase(it);
      out.reward = spec.apple_reward;
    }
    if (auto it = std::lower_bound(bombs.begin(), bombs.end(), next);
        it != bombs.end() && *it == next) {
      bombs.erase(it);
      out.cost = spec.bomb_cost;
    }
  }
  out.state.agent = next;
  out.state.step = state.step + 1;
  out.done = episode_done(spec, out.state);
  return out;
}

std::size_t grid_feature_dim(const GridGatherSpec& spec) {
  return static_cast<std::size_t>(spec.num_cells() + 3 * (spec.num_apples + spec.num_bombs) + 1);
}

Eigen::VectorXd grid_features(const GridGatherSpec& spec, const EnvState& state) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid_feature_dim(spec)));
  f(cell_id(spec, state.agent)) = 1.0;
  const double scale = 1.0 / spec.grid_size;
  Eigen::Index offset = spec.num_cells();
  auto write_items = [&](const std::vector<Cell>& items, int slots) {
    for (int k = 0; k < slots; ++k, offset += 3) {
      if (k >= static_cast<int>(items.size())) continue;
      f(offset) = 1.0;
      f(offset + 1) = (items[k].row - state.agent.row) * scale;
      f(offset + 2) = (items[k].col - state.agent.col) * scale;
    }
  };
  write_items(state.apples, spec.num_apples);
  write_items(state.bombs, spec.num_bombs);
  f(offset) = static_cast<double>(state.step) / spec.episode_length;
  return f;
}

// ---------------------------------------------------------------------------

GridStateIndexer::GridStateIndexer(const GridGatherSpec& spec)
    : spec_(spec), layout_(resolve_layout(spec)) {
  const double count = static_cast<double>(spec.num_cells()) * std::pow(2.0, spec.num_apples) *
                       std::pow(2.0, spec.num_bombs) * (spec.episode_length + 1);
  if (count > static_cast<double>(kMaxTabularGridStates)) {
    throw std::invalid_argument("grid state space has " + std::to_string(count) +
                                " states, above the tabular limit of " +
                                std::to_string(kMaxTabularGridStates));
  }
  num_states_ = static_cast<std::size_t>(count);
}

std::size_t GridStateIndexer::index(const EnvState& state) const {
  std::size_t apple_mask = 0;
  for (std::size_t k = 0; k < layout_.apples.size(); ++k)
    if (contains(state.apples, layout_.apples[k])) apple_mask |= std::size_t{1} << k;
  std::size_t bomb_mask = 0;
  for (std::size_t k = 0; k < layout_.bombs.size(); ++k)
    if (contains(state.bombs, layout_.bombs[k])) bomb_mask |= std::size_t{1} << k;
  const std::size_t apple_states = std::size_t{1} << layout_.apples.size();
  const std::size_t bomb_states = std::size_t{1} << layout_.bombs.size();
  const std::size_t steps = static_cast<std::size_t>(spec_.episode_length) + 1;
  const auto cell = static_cast<std::size_t>(cell_id(spec_, state.agent));
  return ((cell * apple_states + apple_mask) * bomb_states + bomb_mask) * steps +
         static_cast<std::size_t>(state.step);
}

EnvState GridStateIndexer::state(std::size_t index) const {
  if (index >= num_states_) throw std::out_of_range("grid state index out of range");
  const std::size_t apple_states = std::size_t{1} << layout_.apples.size();
  const std::size_t bomb_states = std::size_t{1} << layout_.bombs.size();
  const std::size_t steps = static_cast<std::size_t>(spec_.episode_length) + 1;
  EnvState s;
  s.step = static_cast<int>(index % steps);
  index /= steps;
  const std::size_t bomb_mask = index % bomb_states;
  index /= bomb_states;
  const std::size_t apple_mask = index % apple_states;
  index /= apple_states;
  s.agent = cell_at(spec_, static_cast<int>(index));
  for (std::size_t k = 0; k < layout_.apples.size(); ++k)
    if (apple_mask & (std::size_t{1} << k)) s.apples.push_back(layout_.apples[k]);
  for (std::size_t k = 0; k < layout_.bombs.size(); ++k)
    if (bomb_mask & (std::size_t{1} << k)) s.bombs.push_back(layout_.bombs[k]);
  return s;
}

TabularCmdp grid_to_tabular(const GridGatherSpec& spec, double gamma) {
  const GridStateIndexer indexer(spec);
  const std::size_t n = indexer.num_states();
  std::vector<std::vector<Outcome>> outcomes(n * kNumMoves);
  for (std::size_t s = 0; s < n; ++s) {
    const EnvState state = indexer.state(s);
    const bool done = episode_done(spec, state);
    for (std::size_t a = 0; a < kNumMoves; ++a) {
      if (done) {
        outcomes[s * kNumMoves + a] = {Outcome{s, 1.0, 0.0, {0.0}}};
        continue;
      }
      const GridStep step = env_step(spec, state, static_cast<Move>(a));
      outcomes[s * kNumMoves + a] = {
          Outcome{indexer.index(step.state), 1.0, step.reward, {step.cost}}};
    }
  }
  std::vector<double> p0(n, 0.0);
  const GridLayout& layout = indexer.layout();
  std::vector<Cell> empty;
  for (int id = 0; id < spec.num_cells(); ++id) {
    const Cell c = cell_at(spec, id);
    if (!contains(layout.apples, c) && !contains(layout.bombs, c)) empty.push_back(c);
  }
  for (Cell c : empty) {
    EnvState start{c, layout.apples, layout.bombs, 0};
    p0[indexer.index(start)] = 1.0 / static_cast<double>(empty.size());
  }
  return TabularCmdp(n, kNumMoves, 1, std::move(outcomes), {spec.cost_limit}, gamma,
                     std::move(p0));
}

// ---------------------------------------------------------------------------

GridGatherEnv::GridGatherEnv(GridGatherSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.fixed_layout()) {
    // indexing is optional: large fixed layouts are still simulable
    try {
      indexer_.emplace(spec_);
    } catch (const std::invalid_argument&) {
      indexer_.reset();
    }
  }
}

std::size_t GridGatherEnv::feature_dim() const { return grid_feature_dim(spec_); }

std::size_t GridGatherEnv::num_states() const {
  return indexer_ ? indexer_->num_states() : 0;
}

Observation GridGatherEnv::observe(const EnvState& state) const {
  Observation obs;
  obs.index = indexer_ ? indexer_->index(state) : kNoIndex;
  obs.features = grid_features(spec_, state);
  return obs;
}

Observation GridGatherEnv::reset(Rng& rng) {
  state_ = env_reset(spec_, rng());
  done_ = episode_done(spec_, state_);
  return observe(state_);
}

StepOutcome GridGatherEnv::step(std::size_t action, Rng& /*rng*/) {
  if (action >= kNumMoves) throw std::invalid_argument("action out of range");
  if (done_) throw std::logic_error("GridGatherEnv::step on a finished episode");
  GridStep s = env_step(spec_, state_, static_cast<Move>(action));
  state_ = std::move(s.state);
  done_ = s.done;
  StepOutcome out;
  out.observation = observe(state_);
  out.reward = s.reward;
  out.costs = {s.cost};
  out.terminal = s.done;
  return out;
}

std::unique_ptr<Environment> GridGatherEnv::clone() const {
  return std::make_unique<GridGatherEnv>(*this);
}

}  // namespace apdo
