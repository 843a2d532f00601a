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

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "apdo/driver.hpp"
#include "apdo/environment.hpp"
#include "apdo/grid_gather.hpp"

namespace apdo {

/// Invalid experiment configuration. The message starts with the key path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Algorithm { kPdo, kApdo, kPdDdpg };

std::string algorithm_name(Algorithm algo);
Algorithm parse_algorithm(std::string_view name);

enum class EnvKind { kGridGather, kRiskyChain, kTabular };

struct EnvConfig {
  EnvKind kind = EnvKind::kGridGather;
  GridGatherSpec grid;
  double chain_gamma = 0.9;
  double chain_limit = 2.0;
  /// Tabular CMDP, inline or loaded from a file.
  std::optional<TabularCmdp> cmdp;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& cfg);

struct ExperimentConfig {
  std::vector<Algorithm> algorithms{Algorithm::kApdo};
  EnvConfig env;
  /// PDO runs use the PdoConfig part; pd-ddpg runs use epochs, batch_size
  /// (as steps per epoch), buffer_capacity and the off-policy settings.
  ApdoConfig apdo;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::filesystem::path output = "results";
  std::size_t parallelism = 1;
};

/// Strict parse: unknown keys and invalid values raise ConfigError naming
/// the key path. Relative CMDP paths resolve against `base_dir`.
ExperimentConfig parse_config(std::string_view json_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// The run of one (algorithm, seed) pair.
std::vector<RunRecord> run_single(const ExperimentConfig& cfg, Algorithm algo, std::uint64_t seed);

/// epoch,avg_return,avg_cost_1..m,lambda_1..m,samples,wall_s,adjusted
std::string records_csv(const std::vector<RunRecord>& records, std::size_t num_constraints);
/// Per-epoch cross-run median and quartiles of every numeric column.
std::string summary_csv(const std::vector<std::vector<RunRecord>>& runs, std::size_t num_constraints);

struct RunOutput {
  Algorithm algorithm = Algorithm::kApdo;
  std::uint64_t seed = 0;
  std::vector<RunRecord> records;
  std::filesystem::path file;
};

struct ExperimentResult {
  std::vector<RunOutput> runs;  ///< ordered by algorithm, then seed
  std::vector<std::filesystem::path> summaries;
};

/// Executes every (algorithm, seed) run, up to cfg.parallelism at a time,
/// and writes <output>/<algo>_seed<seed>.csv plus <output>/<algo>_summary.csv.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepResult {
  std::vector<std::size_t> values;
  std::vector<ExperimentResult> sets;  ///< one per value
  std::filesystem::path comparison;
};

/// One APDO run set per K^adj value under <output>/kadj_<K>/, with the same
/// seeds, plus <output>/kadj_comparison.csv.
SweepResult sweep_kadj(const ExperimentConfig& cfg, const std::vector<std::size_t>& values);

}  // namespace apdo
