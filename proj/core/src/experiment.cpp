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

#include "apdo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace apdo {

namespace fs = std::filesystem;
using nlohmann::json;

std::string algorithm_name(Algorithm algo) {
  switch (algo) {
    case Algorithm::kPdo: return "pdo";
    case Algorithm::kApdo: return "apdo";
    case Algorithm::kPdDdpg: return "pd-ddpg";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "pdo") return Algorithm::kPdo;
  if (name == "apdo") return Algorithm::kApdo;
  if (name == "pd-ddpg") return Algorithm::kPdDdpg;
  throw ConfigError("algorithm: unknown algorithm '" + std::string(name) +
                    "' (expected pdo, apdo or pd-ddpg)");
}

std::unique_ptr<Environment> make_environment(const EnvConfig& cfg) {
  switch (cfg.kind) {
    case EnvKind::kGridGather: return std::make_unique<GridGatherEnv>(cfg.grid);
    case EnvKind::kRiskyChain:
      return std::make_unique<TabularEnv>(make_risky_chain(cfg.chain_gamma, cfg.chain_limit),
                                          "risky_chain");
    case EnvKind::kTabular:
      if (!cfg.cmdp) throw ConfigError("env: tabular environment without a CMDP");
      return std::make_unique<TabularEnv>(*cfg.cmdp, "tabular");
  }
  throw ConfigError("env: unknown type");
}

namespace {

// Reads the keys of one JSON object and rejects the ones nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(key_path(key) + ": expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw ConfigError(key_path(key) + ": must be finite");
  }

  void number(const std::string& key, std::optional<double>& out) {
    if (!has(key)) return;
    double v = 0.0;
    number(key, v);
    out = v;
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) {
    if (!has(key)) return;
    out = parse_integer<Int>(j_.at(key), key_path(key));
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(key_path(key) + ": expected true or false");
    out = v.get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(key_path(key) + ": expected a string");
    out = v.get<std::string>();
  }

  void sizes(const std::string& key, std::vector<std::size_t>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(key_path(key) + ": expected an array of integers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(parse_integer<std::size_t>(v[i], key_path(key) + "[" + std::to_string(i) + "]"));
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(key_path(key) + ": expected an array of numbers");
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        throw ConfigError(key_path(key) + "[" + std::to_string(i) + "]: expected a number");
      }
      out.push_back(v[i].get<double>());
    }
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(key_path(it.key()) + ": unknown key");
    }
  }

  template <typename Int>
  static Int parse_integer(const json& v, const std::string& where) {
    if (v.is_number_unsigned()) return static_cast<Int>(v.get<std::uint64_t>());
    if (v.is_number_integer()) {
      const auto x = v.get<std::int64_t>();
      if (x < 0) throw ConfigError(where + ": must be non-negative");
      return static_cast<Int>(x);
    }
    throw ConfigError(where + ": expected a non-negative integer");
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Cell parse_cell(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw ConfigError(where + ": expected [row, col]");
  }
  return Cell{v[0].get<int>(), v[1].get<int>()};
}

std::vector<Cell> parse_cells(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of [row, col] pairs");
  std::vector<Cell> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(parse_cell(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

template <typename F>
void wrap(const std::string& where, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

EnvConfig parse_env(const json& j, const fs::path& base_dir) {
  ObjectReader r(j, "env");
  std::string type = "grid_gather";
  r.string("type", type);
  EnvConfig env;
  if (type == "grid_gather") {
    env.kind = EnvKind::kGridGather;
    GridGatherSpec& g = env.grid;
    r.integer("grid_size", g.grid_size);
    r.integer("num_apples", g.num_apples);
    r.integer("num_bombs", g.num_bombs);
    r.number("apple_reward", g.apple_reward);
    r.number("bomb_cost", g.bomb_cost);
    r.number("cost_limit", g.cost_limit);
    r.integer("episode_length", g.episode_length);
    if (r.has("layout_seed")) {
      g.layout_seed = ObjectReader::parse_integer<std::uint64_t>(r.raw("layout_seed"), "env.layout_seed");
    }
    if (r.has("layout")) {
      ObjectReader lr(r.raw("layout"), "env.layout");
      GridLayout layout;
      if (lr.has("apples")) layout.apples = parse_cells(lr.raw("apples"), "env.layout.apples");
      if (lr.has("bombs")) layout.bombs = parse_cells(lr.raw("bombs"), "env.layout.bombs");
      lr.finish();
      g.layout = layout;
    }
    wrap("env", [&] { g.validate(); });
  } else if (type == "risky_chain") {
    env.kind = EnvKind::kRiskyChain;
    r.number("gamma", env.chain_gamma);
    r.number("limit", env.chain_limit);
    wrap("env", [&] { make_risky_chain(env.chain_gamma, env.chain_limit); });
  } else if (type == "tabular") {
    env.kind = EnvKind::kTabular;
    const bool inline_cmdp = r.has("cmdp");
    const bool from_file = r.has("path");
    if (inline_cmdp == from_file) throw ConfigError("env: give exactly one of 'cmdp' or 'path'");
    if (inline_cmdp) {
      wrap("env.cmdp", [&] { env.cmdp = cmdp_from_json(r.raw("cmdp").dump()); });
    } else {
      if (!r.raw("path").is_string()) throw ConfigError("env.path: expected a string");
      fs::path p = r.raw("path").get<std::string>();
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      wrap("env.path", [&] { env.cmdp = load_cmdp(p.string()); });
    }
  } else {
    throw ConfigError("env.type: unknown environment '" + type +
                      "' (expected grid_gather, risky_chain or tabular)");
  }
  r.finish();
  return env;
}

AdvantageNormalization parse_normalization(const std::string& name) {
  if (name == "combined") return AdvantageNormalization::kCombined;
  if (name == "per_channel") return AdvantageNormalization::kPerChannel;
  if (name == "none") return AdvantageNormalization::kNone;
  throw ConfigError("advantage_normalization: expected combined, per_channel or none");
}

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "auto") return PolicyKind::kAuto;
  if (name == "tabular") return PolicyKind::kTabular;
  if (name == "mlp") return PolicyKind::kMlp;
  throw ConfigError("policy: expected auto, tabular or mlp");
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  ObjectReader r(j, "");

  if (r.has("algorithm")) {
    const json& a = r.raw("algorithm");
    cfg.algorithms.clear();
    if (a.is_string()) {
      cfg.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    } else if (a.is_array() && !a.empty()) {
      for (const json& x : a) {
        if (!x.is_string()) throw ConfigError("algorithm: expected strings");
        cfg.algorithms.push_back(parse_algorithm(x.get<std::string>()));
      }
    } else {
      throw ConfigError("algorithm: expected a name or a non-empty list of names");
    }
  }
  if (r.has("env")) cfg.env = parse_env(r.raw("env"), base_dir);

  if (r.has("seeds")) {
    const json& s = r.raw("seeds");
    if (!s.is_array() || s.empty()) throw ConfigError("seeds: expected a non-empty array");
    cfg.seeds.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      cfg.seeds.push_back(ObjectReader::parse_integer<std::uint64_t>(s[i], "seeds[" + std::to_string(i) + "]"));
    }
  }
  std::string output;
  r.string("output", output);
  if (!output.empty()) {
    cfg.output = output;
    if (cfg.output.is_relative() && !base_dir.empty()) cfg.output = base_dir / cfg.output;
  }
  r.integer("parallelism", cfg.parallelism);
  if (cfg.parallelism == 0) throw ConfigError("parallelism: must be at least 1");

  ApdoConfig& c = cfg.apdo;
  r.boolean("record_wall_clock", c.record_wall_clock);
  r.number("alpha", c.alpha);
  r.number("beta", c.beta);
  r.integer("epochs", c.epochs);
  r.integer("batch_size", c.batch_size);
  r.number("gae_lambda", c.gae_lambda);
  bool gamma_given = r.has("gamma");
  r.number("gamma", c.gamma);
  r.numbers("limits", c.limits);
  if (r.has("normalize_advantages") && r.has("advantage_normalization")) {
    throw ConfigError("normalize_advantages: give either this or advantage_normalization");
  }
  bool normalize = true;
  r.boolean("normalize_advantages", normalize);
  c.normalization = normalize ? AdvantageNormalization::kCombined : AdvantageNormalization::kNone;
  std::string norm_name;
  r.string("advantage_normalization", norm_name);
  if (!norm_name.empty()) c.normalization = parse_normalization(norm_name);
  r.number("entropy_coef", c.entropy_coef);
  r.number("clip_norm", c.clip_norm);
  r.number("lambda_init", c.lambda_init);
  std::string policy_name;
  r.string("policy", policy_name);
  if (!policy_name.empty()) c.policy = parse_policy_kind(policy_name);
  r.sizes("policy_hidden", c.policy_hidden);
  r.sizes("baseline_hidden", c.baseline_hidden);
  r.number("baseline_lr", c.baseline_lr);
  r.integer("baseline_epochs", c.baseline_epochs);
  r.integer("baseline_minibatch", c.baseline_minibatch);

  r.integer("k_adj", c.k_adj);
  r.integer("buffer_capacity", c.buffer_capacity);
  PdDdpgConfig& off = c.offpolicy;
  r.integer("minibatch", off.minibatch);
  r.number("tau", off.tau);
  r.number("critic_lr", off.critic_lr);
  r.number("actor_lr", off.actor_lr);
  r.number("dual_lr_off", off.dual_lr);
  r.integer("off_iterations", off.iterations);
  r.number("explore_sigma", off.explore_sigma);
  r.number("actor_entropy", off.actor_entropy);
  r.number("updates_per_sample", off.updates_per_sample);
  r.sizes("critic_hidden", off.critic_hidden);
  r.sizes("actor_hidden", off.actor_hidden);
  r.finish();

  if (!gamma_given) {
    if (cfg.env.kind == EnvKind::kRiskyChain) c.gamma = cfg.env.chain_gamma;
    if (cfg.env.kind == EnvKind::kTabular) c.gamma = cfg.env.cmdp->gamma();
  }
  auto positive_layers = [](const std::vector<std::size_t>& v, const char* key) {
    if (std::find(v.begin(), v.end(), std::size_t{0}) != v.end()) {
      throw ConfigError(std::string(key) + ": layer sizes must be positive");
    }
  };
  positive_layers(c.policy_hidden, "policy_hidden");
  positive_layers(c.baseline_hidden, "baseline_hidden");
  positive_layers(off.critic_hidden, "critic_hidden");
  positive_layers(off.actor_hidden, "actor_hidden");
  if (c.epochs == 0) throw ConfigError("epochs: must be at least 1");
  wrap("config", [&] { c.validate(); });
  PdDdpgConfig off_check = off;
  off_check.gamma = c.gamma;
  off_check.limits = c.limits.empty() ? std::vector<double>{0.0} : c.limits;
  wrap("config", [&] { off_check.validate(); });
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::vector<RunRecord> run_single(const ExperimentConfig& cfg, Algorithm algo, std::uint64_t seed) {
  const std::unique_ptr<Environment> env = make_environment(cfg.env);
  switch (algo) {
    case Algorithm::kPdo: return run_pdo(*env, cfg.apdo, seed);
    case Algorithm::kApdo: return run_apdo(*env, cfg.apdo, seed);
    case Algorithm::kPdDdpg: {
      DdpgRunConfig d;
      d.epochs = cfg.apdo.epochs;
      d.steps_per_epoch = cfg.apdo.batch_size;
      d.buffer_capacity = cfg.apdo.buffer_capacity;
      d.agent = cfg.apdo.offpolicy;
      d.agent.gamma = cfg.apdo.gamma;
      d.agent.limits = cfg.apdo.limits;
      d.record_wall_clock = cfg.apdo.record_wall_clock;
      return run_primal_dual_ddpg(*env, d, seed);
    }
  }
  throw ConfigError("algorithm: unknown");
}

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) throw NonFiniteError("refusing to write a non-finite value to CSV");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string header(std::size_t m) {
  std::string h = "epoch,avg_return";
  for (std::size_t i = 1; i <= m; ++i) h += ",avg_cost_" + std::to_string(i);
  for (std::size_t i = 1; i <= m; ++i) h += ",lambda_" + std::to_string(i);
  return h + ",samples,wall_s,adjusted\n";
}

// Numeric columns of a record in CSV order, epoch and adjusted excluded.
std::vector<double> metric_row(const RunRecord& r) {
  std::vector<double> row{r.avg_return};
  row.insert(row.end(), r.avg_cost.begin(), r.avg_cost.end());
  row.insert(row.end(), r.lambda.begin(), r.lambda.end());
  row.push_back(static_cast<double>(r.samples));
  row.push_back(r.wall_s);
  return row;
}

std::vector<std::string> metric_names(std::size_t m) {
  std::vector<std::string> names{"avg_return"};
  for (std::size_t i = 1; i <= m; ++i) names.push_back("avg_cost_" + std::to_string(i));
  for (std::size_t i = 1; i <= m; ++i) names.push_back("lambda_" + std::to_string(i));
  names.push_back("samples");
  names.push_back("wall_s");
  return names;
}

// Linear interpolation between order statistics.
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("error while writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory " + dir.string() +
                             (ec ? ": " + ec.message() : ""));
  }
}

std::size_t constraint_count(const ExperimentConfig& cfg) {
  return make_environment(cfg.env)->num_constraints();
}

}  // namespace

std::string records_csv(const std::vector<RunRecord>& records, std::size_t m) {
  std::string out = header(m);
  for (const RunRecord& r : records) {
    if (r.avg_cost.size() != m || r.lambda.size() != m) {
      throw std::invalid_argument("record has the wrong number of constraints");
    }
    out += std::to_string(r.epoch) + "," + fmt(r.avg_return);
    for (double c : r.avg_cost) out += "," + fmt(c);
    for (double l : r.lambda) out += "," + fmt(l);
    out += "," + std::to_string(r.samples) + "," + fmt(r.wall_s) + "," + (r.adjusted ? "1" : "0");
    out += "\n";
  }
  return out;
}

std::string summary_csv(const std::vector<std::vector<RunRecord>>& runs, std::size_t m) {
  const std::vector<std::string> names = metric_names(m);
  std::string out = "epoch";
  for (const auto& n : names) out += "," + n + "_median," + n + "_q25," + n + "_q75";
  out += "\n";
  if (runs.empty()) return out;
  std::size_t epochs = runs.front().size();
  for (const auto& r : runs) epochs = std::min(epochs, r.size());
  for (std::size_t k = 0; k < epochs; ++k) {
    std::vector<std::vector<double>> cols(names.size());
    for (const auto& run : runs) {
      const std::vector<double> row = metric_row(run[k]);
      for (std::size_t c = 0; c < row.size(); ++c) cols[c].push_back(row[c]);
    }
    out += std::to_string(k);
    for (const auto& col : cols) {
      out += "," + fmt(quantile(col, 0.5)) + "," + fmt(quantile(col, 0.25)) + "," +
             fmt(quantile(col, 0.75));
    }
    out += "\n";
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
  ensure_dir(cfg.output);
  const std::size_t m = constraint_count(cfg);

  ExperimentResult result;
  for (Algorithm algo : cfg.algorithms) {
    for (std::uint64_t seed : cfg.seeds) {
      RunOutput run;
      run.algorithm = algo;
      run.seed = seed;
      run.file = cfg.output / (algorithm_name(algo) + "_seed" + std::to_string(seed) + ".csv");
      result.runs.push_back(std::move(run));
    }
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= result.runs.size()) return;
      {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (failure) return;
      }
      try {
        RunOutput& run = result.runs[i];
        run.records = run_single(cfg, run.algorithm, run.seed);
        write_file(run.file, records_csv(run.records, m));
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min(cfg.parallelism, result.runs.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (Algorithm algo : cfg.algorithms) {
    std::vector<std::vector<RunRecord>> runs;
    for (const RunOutput& run : result.runs) {
      if (run.algorithm == algo) runs.push_back(run.records);
    }
    const fs::path path = cfg.output / (algorithm_name(algo) + "_summary.csv");
    write_file(path, summary_csv(runs, m));
    result.summaries.push_back(path);
  }
  return result;
}

SweepResult sweep_kadj(const ExperimentConfig& cfg, const std::vector<std::size_t>& values) {
  if (values.empty()) throw std::invalid_argument("sweep-kadj needs at least one K^adj value");
  ensure_dir(cfg.output);
  const std::size_t m = constraint_count(cfg);
  SweepResult sweep;
  sweep.values = values;
  std::string cmp = "k_adj,seed";
  for (std::size_t i = 1; i <= m; ++i) cmp += ",lambda_pre_" + std::to_string(i);
  for (std::size_t i = 1; i <= m; ++i) cmp += ",lambda_off_" + std::to_string(i);
  cmp += ",final_avg_return";
  for (std::size_t i = 1; i <= m; ++i) cmp += ",final_avg_cost_" + std::to_string(i);
  cmp += "\n";

  for (std::size_t k : values) {
    ExperimentConfig sub = cfg;
    sub.algorithms = {Algorithm::kApdo};
    sub.apdo.k_adj = k;
    sub.output = cfg.output / ("kadj_" + std::to_string(k));
    ExperimentResult set = run_experiment(sub);
    for (const RunOutput& run : set.runs) {
      cmp += std::to_string(k) + "," + std::to_string(run.seed);
      const RunRecord* adjusted = nullptr;
      for (const RunRecord& r : run.records) {
        if (r.adjusted) adjusted = &r;
      }
      for (std::size_t i = 0; i < m; ++i) cmp += adjusted ? "," + fmt(adjusted->lambda[i]) : ",";
      for (std::size_t i = 0; i < m; ++i) cmp += adjusted ? "," + fmt((*adjusted->lambda_off)[i]) : ",";
      const RunRecord& last = run.records.back();
      cmp += "," + fmt(last.avg_return);
      for (double c : last.avg_cost) cmp += "," + fmt(c);
      cmp += "\n";
    }
    sweep.sets.push_back(std::move(set));
  }
  sweep.comparison = cfg.output / "kadj_comparison.csv";
  write_file(sweep.comparison, cmp);
  return sweep;
}

}  // namespace apdo
