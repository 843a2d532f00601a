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

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "apdo/cmdp.hpp"

namespace apdo {

using nlohmann::json;

namespace {

const char* const kCmdpKeys[] = {"num_states", "num_actions", "transition", "reward",
                                 "costs",      "limits",      "gamma",      "initial_dist"};

const json& require(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) throw std::invalid_argument(std::string("CMDP JSON is missing \"") + key + "\"");
  return *it;
}

Tensor3 read_tensor(const json& node, const std::string& name) {
  try {
    return node.get<Tensor3>();
  } catch (const json::exception& e) {
    throw std::invalid_argument("CMDP JSON field \"" + name + "\" is not a 3-d array: " + e.what());
  }
}

}  // namespace

TabularCmdp cmdp_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed CMDP JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("CMDP JSON must be an object");
  for (const auto& [key, _] : doc.items()) {
    if (std::find(std::begin(kCmdpKeys), std::end(kCmdpKeys), key) == std::end(kCmdpKeys)) {
      throw std::invalid_argument("unknown CMDP JSON key \"" + key + "\"");
    }
  }
  const auto ns = require(doc, "num_states").get<std::size_t>();
  const auto na = require(doc, "num_actions").get<std::size_t>();
  Tensor3 transition = read_tensor(require(doc, "transition"), "transition");
  Tensor3 reward = read_tensor(require(doc, "reward"), "reward");
  std::vector<Tensor3> costs;
  const auto& cost_node = require(doc, "costs");
  if (!cost_node.is_array()) throw std::invalid_argument("CMDP JSON \"costs\" must be an array");
  for (std::size_t i = 0; i < cost_node.size(); ++i) {
    costs.push_back(read_tensor(cost_node[i], "costs[" + std::to_string(i) + "]"));
  }
  auto limits = require(doc, "limits").get<std::vector<double>>();
  const double gamma = require(doc, "gamma").get<double>();
  auto p0 = require(doc, "initial_dist").get<std::vector<double>>();
  if (transition.size() != ns || (ns > 0 && transition[0].size() != na)) {
    throw std::invalid_argument("transition tensor does not match num_states/num_actions");
  }
  return TabularCmdp::from_dense(transition, reward, costs, std::move(limits), gamma,
                                 std::move(p0));
}

std::string cmdp_to_json(const TabularCmdp& cmdp) {
  json doc;
  doc["num_states"] = cmdp.num_states();
  doc["num_actions"] = cmdp.num_actions();
  doc["transition"] = cmdp.dense_transition();
  doc["reward"] = cmdp.dense_reward();
  json costs = json::array();
  for (std::size_t i = 0; i < cmdp.num_constraints(); ++i) costs.push_back(cmdp.dense_cost(i));
  doc["costs"] = std::move(costs);
  doc["limits"] = cmdp.limits();
  doc["gamma"] = cmdp.gamma();
  doc["initial_dist"] = cmdp.initial_dist();
  return doc.dump();
}

TabularCmdp load_cmdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CMDP file " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return cmdp_from_json(buffer.str());
}

void save_cmdp(const TabularCmdp& cmdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write CMDP file " + path);
  out << cmdp_to_json(cmdp) << '\n';
}

}  // namespace apdo
