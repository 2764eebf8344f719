// Copyright 2026 The qgrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qgrl/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <thread>

int main(int argc, char** argv) {
  using namespace qgrl::cli;
  CLI::App app{"Robust two-qubit gate synthesis: analytic construction, PPO training, robustness sweeps"};
  std::string command;
  std::vector<std::string> inputs;
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<long> seed;
  std::optional<std::string> out_dir, regularizer, range, steps, ckpt, pulses;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());

  std::string names;
  for (const auto& c : commands()) names += (names.empty() ? "" : ", ") + c;
  app.add_option("command", command, "One of: " + names)->required();
  app.add_option("inputs", inputs, "Heatmap CSV files (report)");
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "Training seed");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--regularizer", regularizer, "none | perturb | dropout");
  app.add_option("--range", range, "Heatmap offset range per axis");
  app.add_option("--steps", steps, "Heatmap grid points per axis");
  app.add_option("--ckpt", ckpt, "Policy checkpoint");
  app.add_option("--pulses", pulses, "Pulse schedule CSV");
  app.add_option("--set", sets, "Extra key=value override (repeatable)");
  app.add_option("--workers", workers, "Threads for heatmap sweeps");
  CLI11_PARSE(app, argc, argv);

  Invocation inv;
  inv.command = command;
  try {
    if (std::find(commands().begin(), commands().end(), command) == commands().end()) {
      throw UsageError("unknown command '" + command + "'");
    }
    std::vector<Setting> flags;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      flags.push_back({trim(s.substr(0, eq)), trim(s.substr(eq + 1)), "--set " + s});
    }
    if (seed) flags.push_back({"seed", std::to_string(*seed), "--seed"});
    if (out_dir) flags.push_back({"out", *out_dir, "--out"});
    if (regularizer) flags.push_back({"regularizer", *regularizer, "--regularizer"});
    if (range) flags.push_back({"heatmap_range", *range, "--range"});
    if (steps) flags.push_back({"heatmap_steps", *steps, "--steps"});
    const std::string text = config_path.empty() ? std::string{} : qgrl::robust::read_file(config_path);
    inv.config = parse_config(text, flags);
  } catch (const UsageError& e) {
    std::cerr << "error: " << command << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << command << ": " << (config_path.empty() ? "" : config_path + ": ") << e.what() << "\n";
    return 2;
  }
  inv.ckpt = ckpt;
  inv.pulses = pulses;
  inv.inputs = inputs;
  inv.workers = workers;
  return dispatch(inv, std::cout, std::cerr);
}
