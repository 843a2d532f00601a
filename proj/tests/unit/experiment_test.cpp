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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "apdo/experiment.hpp"

namespace apdo {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("apdo_experiment_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string small_config(const std::string& algorithms, const std::string& seeds) const {
    return R"({"algorithm": )" + algorithms + R"(, "seeds": )" + seeds +
           R"(, "env": {"type": "risky_chain", "gamma": 0.9, "limit": 2},
              "epochs": 4, "batch_size": 200, "k_adj": 1, "alpha": 0.2,
              "advantage_normalization": "none", "critic_hidden": [8], "actor_hidden": [],
              "off_iterations": 50, "output": ")" +
           dir_.generic_string() + R"("})";
  }

  fs::path dir_;
};

TEST(ParseConfig, Defaults) {
  const ExperimentConfig cfg = parse_config(R"({"algorithm": "pdo"})");
  ASSERT_EQ(cfg.algorithms.size(), 1u);
  EXPECT_EQ(cfg.algorithms[0], Algorithm::kPdo);
  EXPECT_EQ(cfg.apdo.gamma, 0.995);
  EXPECT_EQ(cfg.apdo.beta, 0.1);
  EXPECT_EQ(cfg.apdo.gae_lambda, 0.95);
  EXPECT_EQ(cfg.apdo.k_adj, 5u);
  EXPECT_EQ(cfg.env.kind, EnvKind::kGridGather);
  EXPECT_EQ(cfg.seeds.size(), 5u);

  const ExperimentConfig empty = parse_config("{}");
  EXPECT_EQ(empty.algorithms, (std::vector<Algorithm>{Algorithm::kApdo}));
}

TEST(ParseConfig, ReadsValues) {
  const ExperimentConfig cfg = parse_config(
      R"({"algorithm": ["apdo", "pdo", "pd-ddpg"], "k_adj": 10, "env": {"type": "risky_chain", "gamma": 0.8, "limit": 3},
          "dual_lr_off": 0.002, "actor_entropy": 0.2, "seeds": [3, 4]})");
  EXPECT_EQ(cfg.algorithms.size(), 3u);
  EXPECT_EQ(cfg.algorithms[2], Algorithm::kPdDdpg);
  EXPECT_EQ(cfg.apdo.k_adj, 10u);
  EXPECT_EQ(cfg.apdo.gamma, 0.8);  // from the environment when not given
  EXPECT_EQ(cfg.env.chain_limit, 3.0);
  EXPECT_EQ(cfg.apdo.offpolicy.dual_lr, 0.002);
  EXPECT_EQ(cfg.apdo.offpolicy.actor_entropy, 0.2);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{3, 4}));
}

TEST(ParseConfig, ErrorsNameTheKey) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message(R"({"k_adj": )").find("malformed JSON"), std::string::npos);
  EXPECT_NE(message(R"({"k_adj": )").find("line"), std::string::npos);
  EXPECT_EQ(message(R"({"alphaa": 1})").rfind("alphaa", 0), 0u);
  EXPECT_EQ(message(R"({"k_adj": -1})").rfind("k_adj", 0), 0u);
  EXPECT_EQ(message(R"({"k_adj": 1.5})").rfind("k_adj", 0), 0u);
  EXPECT_EQ(message(R"({"beta": "fast"})").rfind("beta", 0), 0u);
  EXPECT_EQ(message(R"({"env": {"type": "grid_gather", "grid_size": 3, "num_apples": 9}})").rfind("env", 0), 0u);
  EXPECT_EQ(message(R"({"env": {"type": "maze"}})").rfind("env.type", 0), 0u);
  EXPECT_EQ(message(R"({"algorithm": "ppo"})").rfind("algorithm", 0), 0u);
  EXPECT_EQ(message(R"({"alpha": 0})").rfind("config", 0), 0u);
  EXPECT_EQ(message(R"({"critic_hidden": [32, 0]})").rfind("critic_hidden", 0), 0u);
}

TEST(Csv, HeaderAndRows) {
  RunRecord rec;
  rec.epoch = 3;
  rec.avg_return = 1.5;
  rec.avg_cost = {0.25};
  rec.lambda = {2.0};
  rec.samples = 600;
  rec.adjusted = true;
  const std::string csv = records_csv({rec}, 1);
  const std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header, "epoch,avg_return,avg_cost_1,lambda_1,samples,wall_s,adjusted");
  EXPECT_EQ(csv.substr(csv.find('\n') + 1, 2), "3,");
}

TEST_F(ExperimentTest, WritesOneFilePerRunAndSummaries) {
  const ExperimentResult result = run_experiment(parse_config(small_config(R"(["pdo", "apdo"])", "[0, 1, 2, 3, 4]")));
  ASSERT_EQ(result.runs.size(), 10u);
  ASSERT_EQ(result.summaries.size(), 2u);
  std::size_t csvs = 0;
  for (const auto& entry : fs::directory_iterator(dir_)) csvs += entry.path().extension() == ".csv";
  EXPECT_EQ(csvs, 12u);
  EXPECT_TRUE(fs::exists(dir_ / "pdo_seed0.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "apdo_seed4.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "apdo_summary.csv"));
  EXPECT_EQ(result.runs[0].algorithm, Algorithm::kPdo);
  EXPECT_EQ(result.runs[5].algorithm, Algorithm::kApdo);

  const std::string csv = read_file(dir_ / "apdo_seed0.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,avg_return,avg_cost_1,lambda_1,samples,wall_s,adjusted");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}

TEST_F(ExperimentTest, RerunsAreByteIdentical) {
  std::string text = small_config(R"(["apdo"])", "[0, 1]");
  text.insert(text.size() - 1, R"(, "parallelism": 2)");
  const ExperimentConfig cfg = parse_config(text);
  run_experiment(cfg);
  const std::string first = read_file(dir_ / "apdo_seed1.csv");
  const std::string summary = read_file(dir_ / "apdo_summary.csv");
  run_experiment(cfg);
  EXPECT_EQ(read_file(dir_ / "apdo_seed1.csv"), first);
  EXPECT_EQ(read_file(dir_ / "apdo_summary.csv"), summary);

  ExperimentConfig serial = cfg;
  serial.parallelism = 1;
  run_experiment(serial);
  EXPECT_EQ(read_file(dir_ / "apdo_seed1.csv"), first);
}

TEST_F(ExperimentTest, SweepWritesOneSetPerValue) {
  const ExperimentConfig cfg = parse_config(small_config(R"("apdo")", "[0, 1]"));
  const SweepResult sweep = sweep_kadj(cfg, {1, 2, 10});
  ASSERT_EQ(sweep.sets.size(), 3u);
  for (std::size_t k : {1, 2, 10}) {
    EXPECT_TRUE(fs::exists(dir_ / ("kadj_" + std::to_string(k)) / "apdo_summary.csv")) << k;
  }
  const std::string cmp = read_file(sweep.comparison);
  EXPECT_EQ(cmp.substr(0, cmp.find('\n')),
            "k_adj,seed,lambda_pre_1,lambda_off_1,final_avg_return,final_avg_cost_1");
  EXPECT_EQ(std::count(cmp.begin(), cmp.end(), '\n'), 7);
  // K = 10 exceeds the 4 epochs: no adjustment, empty multiplier columns.
  EXPECT_NE(cmp.find("\n10,0,,,"), std::string::npos);
  EXPECT_THROW(sweep_kadj(cfg, {}), std::invalid_argument);
}

TEST_F(ExperimentTest, AdjustmentAtEpochZero) {
  const ExperimentConfig cfg = parse_config(small_config(R"("apdo")", "[0]"));
  const SweepResult sweep = sweep_kadj(cfg, {0});
  const auto& records = sweep.sets[0].runs[0].records;
  EXPECT_TRUE(records[0].adjusted);
  EXPECT_EQ(records[1].lambda, *records[0].lambda_off);
}

TEST_F(ExperimentTest, GridGatherDefaultRun) {
  const ExperimentConfig cfg = parse_config(
      R"({"algorithm": "pdo", "seeds": [0], "epochs": 2, "batch_size": 60, "policy_hidden": [8],
          "baseline_hidden": [8], "output": ")" + dir_.generic_string() + R"("})");
  const auto records = run_single(cfg, Algorithm::kPdo, 0);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(records[1].samples, 120u);
}

TEST(ShippedConfigs, AllParse) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(APDO_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 1u);
}

}  // namespace
}  // namespace apdo
