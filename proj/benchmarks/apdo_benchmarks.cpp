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

#include <benchmark/benchmark.h>

#include <vector>

#include "apdo/environment.hpp"
#include "apdo/grid_gather.hpp"
#include "apdo/mlp.hpp"
#include "apdo/oracle.hpp"
#include "apdo/pd_ddpg.hpp"
#include "apdo/policy_gradient.hpp"

namespace apdo {
namespace {

GridGatherSpec small_grid() {
  GridGatherSpec spec;
  spec.grid_size = 3;
  spec.num_apples = 1;
  spec.num_bombs = 2;
  spec.layout = GridLayout{{{0, 0}}, {{0, 1}, {1, 0}}};
  return spec;
}

void BM_MlpForwardBackward(benchmark::State& state) {
  const auto batch = static_cast<Eigen::Index>(state.range(0));
  Mlp net({16, 100, 100, 4});
  Rng rng(0);
  net.initialize(rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(16, batch);
  const Eigen::MatrixXd up = Eigen::MatrixXd::Random(4, batch);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.num_parameters()));
  for (auto _ : state) {
    net.forward(x);
    grad.setZero();
    benchmark::DoNotOptimize(net.backward(up, grad));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(1)->Arg(64)->Arg(1024);

void BM_OracleGridGather(benchmark::State& state) {
  const TabularCmdp cmdp = grid_to_tabular(small_grid(), 0.995).with_limits({0.2});
  for (auto _ : state) benchmark::DoNotOptimize(solve_dual_bisection(cmdp));
}
BENCHMARK(BM_OracleGridGather)->Unit(benchmark::kMillisecond);

void BM_SampleBatchGridGather(benchmark::State& state) {
  GridGatherEnv env(small_grid());
  TabularSoftmaxPolicy pi(env.num_states(), 4);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_batch(env, pi, 3000, seed++));
  state.SetItemsProcessed(state.iterations() * 3000);
}
BENCHMARK(BM_SampleBatchGridGather)->Unit(benchmark::kMillisecond);

void BM_PdDdpgTrainStep(benchmark::State& state) {
  GridGatherEnv env(small_grid());
  TabularSoftmaxPolicy pi(env.num_states(), 4);
  ReplayBuffer buffer(10000);
  for (const Trajectory& t : sample_batch(env, pi, 10000, 1)) buffer.push(t);
  PdDdpgConfig cfg;
  cfg.limits = {0.2};
  Rng init(2);
  PrimalDualDdpg agent(env.feature_dim(), 4, cfg, init);
  Rng rng(3);
  for (auto _ : state) agent.train_step(buffer.sample(cfg.minibatch, rng));
}
BENCHMARK(BM_PdDdpgTrainStep)->Unit(benchmark::kMicrosecond);

}  // namespace
}  // namespace apdo

BENCHMARK_MAIN();
