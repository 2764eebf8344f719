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

// Flat key = value run configuration. Precedence: flags, then file, then
// the profile defaults selected by hamiltonian_kind and regularizer.

#pragma once

#include "qgrl/control_env.hpp"
#include "qgrl/hash.hpp"
#include "qgrl/ppo.hpp"
#include "qgrl/robustness.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qgrl::cli {

using env::ConfigError;

struct RunConfig {
  env::EnvConfig env;
  ppo::PpoConfig ppo;
  ppo::RegularizerSpec reg;
  double heatmap_range = 0.1;
  int heatmap_steps = 21;
  double scan_lo = 0.0;
  double scan_hi = 0.49;
  double scan_tol = 1e-9;
  bool seed_given = false;
  std::string out_dir = ".";

  /// Hash over every field except the output directory.
  std::string hash() const;
};

/// One key = value assignment and where it came from ("line 3", "--seed").
struct Setting {
  std::string key;
  std::string value;
  std::string origin;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<Setting> parse_settings(const std::string& text) {
  std::vector<Setting> out;
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string origin = "line " + std::to_string(no);
    if (eq == std::string::npos) throw ConfigError(origin + ": expected key = value");
    Setting s{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), origin};
    if (s.key.empty()) throw ConfigError(origin + ": missing key");
    if (s.value.empty()) throw ConfigError(origin + ": " + s.key + ": missing value");
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {

/// Plain numbers, or multiples of π written as "pi", "2pi", "0.5*pi".
inline double to_double(const std::string& v) {
  std::string s = v;
  double scale = 1.0;
  if (s.size() >= 2 && s.compare(s.size() - 2, 2, "pi") == 0) {
    s.erase(s.size() - 2);
    if (!s.empty() && s.back() == '*') s.pop_back();
    scale = kPi;
    if (s.empty()) return kPi;
  }
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(x)) throw ConfigError("malformed number '" + v + "'");
  return x * scale;
}

inline long to_long(const std::string& v) {
  const double x = to_double(v);
  if (x != std::floor(x) || std::abs(x) > 9e15) throw ConfigError("expected an integer, got '" + v + "'");
  return static_cast<long>(x);
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

inline std::vector<int> to_layers(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const long n = to_long(trim(tok));
    if (n < 1) throw ConfigError("hidden layer sizes must be positive");
    out.push_back(static_cast<int>(n));
  }
  if (out.empty()) throw ConfigError("hidden_layers needs at least one size");
  return out;
}

inline ppo::RegularizerSpec::Kind to_regularizer(const std::string& v) {
  using K = ppo::RegularizerSpec::Kind;
  if (v == "none") return K::None;
  if (v == "perturb" || v == "output_perturbation") return K::OutputPerturbation;
  if (v == "dropout") return K::Dropout;
  throw ConfigError("regularizer must be none, perturb or dropout, got '" + v + "'");
}

inline env::HamiltonianKind to_kind(const std::string& v) {
  if (v == "general") return env::HamiltonianKind::General;
  if (v == "geometric") return env::HamiltonianKind::Geometric;
  throw ConfigError("hamiltonian_kind must be general or geometric, got '" + v + "'");
}

inline env::RewardMode to_reward_mode(const std::string& v) {
  if (v == "per_step") return env::RewardMode::PerStep;
  if (v == "terminal") return env::RewardMode::Terminal;
  throw ConfigError("reward_mode must be per_step or terminal, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  auto positive = [](double x, const char* what) {
    if (!(x > 0.0)) throw ConfigError(std::string(what) + " must be positive");
    return x;
  };
  auto at_least = [](long x, long lo) {
    if (x < lo) throw ConfigError("must be >= " + std::to_string(lo));
    return x;
  };
  static const std::map<std::string, Setter> table = {
      {"omega_drive", [](RunConfig& c, const std::string& v) { c.env.omega_drive = to_double(v); }},
      {"omega_max", [](RunConfig& c, const std::string& v) { c.env.omega_max = to_double(v); }},
      {"delta_max", [](RunConfig& c, const std::string& v) { c.env.delta_max = to_double(v); }},
      {"j_max", [](RunConfig& c, const std::string& v) { c.env.j_max = to_double(v); }},
      {"total_time", [=](RunConfig& c, const std::string& v) { c.env.total_time = positive(to_double(v), "value"); }},
      {"n_max", [=](RunConfig& c, const std::string& v) { c.env.n_max = static_cast<int>(at_least(to_long(v), 1)); }},
      {"hamiltonian_kind", [](RunConfig& c, const std::string& v) { c.env.kind = to_kind(v); }},
      {"reward_mode", [](RunConfig& c, const std::string& v) { c.env.reward_mode = to_reward_mode(v); }},
      {"phase_penalty_lambda", [](RunConfig& c, const std::string& v) { c.env.phase_penalty_lambda = to_double(v); }},
      {"fidelity_threshold", [](RunConfig& c, const std::string& v) { c.env.fidelity_threshold = to_double(v); }},
      {"switch_t1", [](RunConfig& c, const std::string& v) { c.env.switch_t1 = to_double(v); }},
      {"switch_t2", [](RunConfig& c, const std::string& v) { c.env.switch_t2 = to_double(v); }},
      {"seed", [=](RunConfig& c, const std::string& v) {
         c.ppo.seed = static_cast<std::uint64_t>(at_least(to_long(v), 0));
         c.seed_given = true;
       }},
      {"batch_size", [=](RunConfig& c, const std::string& v) { c.ppo.batch_size = static_cast<int>(at_least(to_long(v), 1)); }},
      {"learning_rate", [=](RunConfig& c, const std::string& v) { c.ppo.learning_rate = positive(to_double(v), "value"); }},
      {"clip_ratio", [](RunConfig& c, const std::string& v) { c.ppo.clip_ratio = to_double(v); }},
      {"discount", [](RunConfig& c, const std::string& v) { c.ppo.discount = to_double(v); }},
      {"gae_lambda", [](RunConfig& c, const std::string& v) { c.ppo.gae_lambda = to_double(v); }},
      {"update_epochs", [=](RunConfig& c, const std::string& v) { c.ppo.update_epochs = static_cast<int>(at_least(to_long(v), 1)); }},
      {"minibatch_size", [=](RunConfig& c, const std::string& v) { c.ppo.minibatch_size = static_cast<int>(at_least(to_long(v), 1)); }},
      {"max_episodes", [=](RunConfig& c, const std::string& v) { c.ppo.max_episodes = at_least(to_long(v), 0); }},
      {"stop_on_threshold", [](RunConfig& c, const std::string& v) { c.ppo.stop_on_threshold = to_bool(v); }},
      {"halt_fidelity", [](RunConfig& c, const std::string& v) { c.ppo.halt_fidelity = to_double(v); }},
      {"hidden_layers", [](RunConfig& c, const std::string& v) { c.ppo.hidden_layers = to_layers(v); }},
      {"init_log_std", [](RunConfig& c, const std::string& v) { c.ppo.init_log_std = to_double(v); }},
      {"regularizer", [](RunConfig& c, const std::string& v) { c.reg.kind = to_regularizer(v); }},
      {"perturb_sigma", [](RunConfig& c, const std::string& v) {
         c.reg.sigma = to_double(v);
         if (!(c.reg.sigma >= 0.0)) throw ConfigError("must be non-negative");
       }},
      {"dropout_rate", [](RunConfig& c, const std::string& v) {
         c.reg.kappa = to_double(v);
         if (!(c.reg.kappa >= 0.0 && c.reg.kappa < 1.0)) throw ConfigError("must lie in [0, 1)");
       }},
      {"heatmap_range", [](RunConfig& c, const std::string& v) {
         c.heatmap_range = to_double(v);
         if (!(c.heatmap_range >= 0.0)) throw ConfigError("must be non-negative");
       }},
      {"heatmap_steps", [=](RunConfig& c, const std::string& v) { c.heatmap_steps = static_cast<int>(at_least(to_long(v), 2)); }},
      {"scan_lo", [](RunConfig& c, const std::string& v) { c.scan_lo = to_double(v); }},
      {"scan_hi", [](RunConfig& c, const std::string& v) { c.scan_hi = to_double(v); }},
      {"scan_tol", [=](RunConfig& c, const std::string& v) { c.scan_tol = positive(to_double(v), "value"); }},
      {"out", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
  };
  return table;
}

}  // namespace detail

/// Defaults for a (kind, regularizer) pair: the general kind trains 1e5
/// episodes at batch 64 without a regularizer and 2e5 at batch 128 with one;
/// the geometric kind runs for 17.05 time units with terminal reward at
/// batch 128, 2e5 episodes with dropout and 1e5 otherwise.
inline RunConfig profile_defaults(env::HamiltonianKind kind, ppo::RegularizerSpec::Kind reg) {
  using K = ppo::RegularizerSpec::Kind;
  RunConfig c;
  c.env.kind = kind;
  c.reg.kind = reg;
  if (kind == env::HamiltonianKind::General) {
    c.ppo.batch_size = reg == K::None ? 64 : 128;
    c.ppo.max_episodes = reg == K::None ? 100000 : 200000;
  } else {
    c.env.total_time = 17.05;
    c.env.reward_mode = env::RewardMode::Terminal;
    c.ppo.batch_size = 128;
    c.ppo.max_episodes = reg == K::Dropout ? 200000 : 100000;
  }
  return c;
}

/// Resolves file settings and flag overrides into a validated RunConfig.
inline RunConfig resolve(const std::vector<Setting>& file, const std::vector<Setting>& flags) {
  const auto& table = detail::setters();
  std::map<std::string, Setting> merged;
  for (const auto* group : {&file, &flags}) {
    for (const auto& s : *group) {
      if (!table.count(s.key)) throw ConfigError(s.origin + ": unknown key '" + s.key + "'");
      merged[s.key] = s;
    }
  }
  auto wrap = [](const Setting& s, const std::function<void()>& f) {
    try {
      f();
    } catch (const ConfigError& e) {
      throw ConfigError(s.origin + ": " + s.key + ": " + e.what());
    }
  };
  env::HamiltonianKind kind = env::HamiltonianKind::General;
  ppo::RegularizerSpec::Kind reg = ppo::RegularizerSpec::Kind::None;
  if (auto it = merged.find("hamiltonian_kind"); it != merged.end()) {
    wrap(it->second, [&] { kind = detail::to_kind(it->second.value); });
  }
  if (auto it = merged.find("regularizer"); it != merged.end()) {
    wrap(it->second, [&] { reg = detail::to_regularizer(it->second.value); });
  }
  RunConfig c = profile_defaults(kind, reg);
  for (const auto& [key, s] : merged) wrap(s, [&] { table.at(key)(c, s.value); });

  const bool t1 = merged.count("switch_t1"), t2 = merged.count("switch_t2");
  if (c.env.kind == env::HamiltonianKind::Geometric && !(t1 && t2)) {
    const auto [a, b] = env::geometric_phase_schedule(c.env);
    if (!t1) c.env.switch_t1 = a;
    if (!t2) c.env.switch_t2 = b;
  }
  auto origin_of = [&](const std::string& msg) {
    const auto colon = msg.find(':');
    const std::string key = msg.substr(0, colon);
    if (auto it = merged.find(key); it != merged.end()) return it->second.origin + ": ";
    if (key.rfind("switch", 0) == 0) {
      for (const char* k : {"switch_t1", "switch_t2", "total_time"})
        if (auto it = merged.find(k); it != merged.end()) return it->second.origin + ": ";
    }
    return std::string("config: ");
  };
  try {
    c.env.validate();
    c.ppo.validate();
    c.reg.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(origin_of(e.what()) + e.what());
  }
  if (!(c.scan_lo >= 0.0 && c.scan_lo < c.scan_hi && c.scan_hi < 0.5)) {
    throw ConfigError("config: scan range needs 0 <= scan_lo < scan_hi < 0.5");
  }
  return c;
}

inline RunConfig parse_config(const std::string& text, const std::vector<Setting>& overrides = {}) {
  return resolve(parse_settings(text), overrides);
}

inline std::string canonical(const RunConfig& c) {
  const auto& p = c.ppo;
  std::ostringstream os;
  os << robust::env_canonical(c.env) << ";batch_size=" << p.batch_size
     << ";learning_rate=" << fmt17(p.learning_rate) << ";clip_ratio=" << fmt17(p.clip_ratio)
     << ";discount=" << fmt17(p.discount) << ";gae_lambda=" << fmt17(p.gae_lambda)
     << ";update_epochs=" << p.update_epochs << ";minibatch_size=" << p.minibatch_size
     << ";max_episodes=" << p.max_episodes << ";seed=" << p.seed
     << ";stop_on_threshold=" << p.stop_on_threshold << ";halt_fidelity=" << fmt17(p.halt_fidelity)
     << ";value_coef=" << fmt17(p.value_coef) << ";entropy_coef=" << fmt17(p.entropy_coef)
     << ";max_grad_norm=" << fmt17(p.max_grad_norm) << ";hidden_layers=" << ppo::format_shape(p.hidden_layers)
     << ";init_log_std=" << fmt17(p.init_log_std) << ";regularizer=" << c.reg.describe()
     << ";heatmap_range=" << fmt17(c.heatmap_range) << ";heatmap_steps=" << c.heatmap_steps
     << ";scan=" << fmt17(c.scan_lo) << "," << fmt17(c.scan_hi) << "," << fmt17(c.scan_tol);
  return os.str();
}

inline std::string RunConfig::hash() const { return hex64(fnv1a(canonical(*this))); }

}  // namespace qgrl::cli
