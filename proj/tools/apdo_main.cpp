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

// apdo: run experiments, K^adj sweeps and exact CMDP solves from the shell.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "apdo/cmdp.hpp"
#include "apdo/experiment.hpp"
#include "apdo/grid_gather.hpp"
#include "apdo/oracle.hpp"
#include "json.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;

int cmd_run(const std::string& config_path) {
  const apdo::ExperimentConfig cfg = apdo::load_config(config_path);
  const apdo::ExperimentResult result = apdo::run_experiment(cfg);
  for (const auto& run : result.runs) std::cout << run.file.string() << "\n";
  for (const auto& path : result.summaries) std::cout << path.string() << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::size_t>& values) {
  const apdo::ExperimentConfig cfg = apdo::load_config(config_path);
  const apdo::SweepResult sweep = apdo::sweep_kadj(cfg, values);
  for (const auto& set : sweep.sets) {
    for (const auto& path : set.summaries) std::cout << path.string() << "\n";
  }
  std::cout << sweep.comparison.string() << "\n";
  return 0;
}

int cmd_oracle(const std::string& cmdp_path) {
  const apdo::TabularCmdp cmdp = apdo::load_cmdp(cmdp_path);
  const apdo::DualSolution sol = apdo::solve_dual_bisection(cmdp);
  nlohmann::json out;
  out["lambda_star"] = sol.lambda_star;
  out["R_star"] = sol.reward_star;
  out["C_star"] = sol.cost_star;
  out["mixture"] = {{"high_cost_weight", sol.mixture.weight},
                    {"high_cost_policy", sol.mixture.high_cost},
                    {"low_cost_policy", sol.mixture.low_cost}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_make_cmdp(const std::string& config_path, const std::string& out_path) {
  const apdo::ExperimentConfig cfg = apdo::load_config(config_path);
  apdo::TabularCmdp cmdp = [&] {
    switch (cfg.env.kind) {
      case apdo::EnvKind::kRiskyChain:
        return apdo::make_risky_chain(cfg.env.chain_gamma, cfg.env.chain_limit);
      case apdo::EnvKind::kTabular: return *cfg.env.cmdp;
      case apdo::EnvKind::kGridGather: break;
    }
    return apdo::grid_to_tabular(cfg.env.grid, cfg.apdo.gamma);
  }();
  if (!cfg.apdo.limits.empty()) cmdp = cmdp.with_limits(cfg.apdo.limits);
  if (out_path.empty() || out_path == "-") {
    std::cout << apdo::cmdp_to_json(cmdp) << "\n";
  } else {
    apdo::save_cmdp(cmdp, out_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primal-dual policy optimization for constrained MDPs"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run every (algorithm, seed) pair of a config and write CSVs");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();

  std::vector<std::size_t> values;
  auto* sweep = app.add_subcommand("sweep-kadj", "Run APDO once per adjustment epoch value");
  sweep->add_option("config", config_path, "Experiment config (JSON)")->required();
  sweep->add_option("--values", values, "Comma-separated adjustment epochs, e.g. 1,5,10")
      ->required()
      ->delimiter(',');

  std::string cmdp_path;
  auto* oracle = app.add_subcommand("oracle", "Solve a single-constraint CMDP exactly");
  oracle->add_option("cmdp", cmdp_path, "CMDP file (JSON)")->required();

  std::string out_path;
  auto* make = app.add_subcommand("make-cmdp", "Write the exact CMDP of a config's environment");
  make->add_option("config", config_path, "Experiment config (JSON)")->required();
  make->add_option("-o,--output", out_path, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(config_path);
    if (sweep->parsed()) {
      if (values.empty()) {
        std::cerr << "error: --values needs at least one adjustment epoch\n";
        return kExitUsage;
      }
      return cmd_sweep(config_path, values);
    }
    if (oracle->parsed()) return cmd_oracle(cmdp_path);
    if (make->parsed()) return cmd_make_cmdp(config_path, out_path);
  } catch (const apdo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const apdo::InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
