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

// Post-training analysis of control pulses: open-loop replay under
// systematic errors, error-sweep heatmaps, centralization and the
// early-stopping reward comparison.

#pragma once

#include "qgrl/control_env.hpp"
#include "qgrl/hash.hpp"
#include "qgrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace qgrl::robust {

using env::EnvConfig;
using env::PhysicalControls;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Canonical text of every field that affects the dynamics or reward.
inline std::string env_canonical(const EnvConfig& c) {
  std::ostringstream os;
  os << "omega_drive=" << fmt17(c.omega_drive) << ";omega_max=" << fmt17(c.omega_max)
     << ";delta_max=" << fmt17(c.delta_max) << ";j_max=" << fmt17(c.j_max)
     << ";total_time=" << fmt17(c.total_time) << ";n_max=" << c.n_max
     << ";kind=" << static_cast<int>(c.kind) << ";switch_t1=" << fmt17(c.switch_t1)
     << ";switch_t2=" << fmt17(c.switch_t2) << ";reward_mode=" << static_cast<int>(c.reward_mode)
     << ";threshold=" << fmt17(c.fidelity_threshold) << ";band_lo=" << fmt17(c.band_lo)
     << ";step_bonus=" << fmt17(c.step_bonus) << ";terminal_bonus=" << fmt17(c.terminal_bonus)
     << ";lambda=" << fmt17(c.phase_penalty_lambda);
  return os.str();
}

inline std::string env_hash(const EnvConfig& c) { return hex64(fnv1a(env_canonical(c))); }

struct PulseSchedule {
  double dt = 0.0;
  std::vector<double> t;
  std::vector<PhysicalControls> controls;

  std::size_t size() const { return controls.size(); }
  bool operator==(const PulseSchedule&) const = default;

  void validate(const EnvConfig& cfg) const {
    if (t.size() != controls.size()) throw std::invalid_argument("pulse schedule: unequal column lengths");
    if (controls.size() > static_cast<std::size_t>(cfg.n_max)) {
      throw std::invalid_argument("pulse schedule: " + std::to_string(controls.size()) +
                                  " steps exceed n_max " + std::to_string(cfg.n_max));
    }
    if (dt != cfg.dt()) throw std::invalid_argument("pulse schedule: step length does not match environment");
    const double tol = 1e-9;
    for (std::size_t k = 0; k < controls.size(); ++k) {
      const auto& p = controls[k];
      auto in = [&](double v, double lo, double hi) { return v >= lo - tol && v <= hi + tol; };
      if (!in(p.omega1, 0, cfg.omega_max) || !in(p.omega2, 0, cfg.omega_max) ||
          !in(p.delta1, -cfg.delta_max, cfg.delta_max) || !in(p.delta2, -cfg.delta_max, cfg.delta_max) ||
          !in(p.j, 0, cfg.j_max)) {
        throw std::invalid_argument("pulse schedule: step " + std::to_string(k) + " outside control bounds");
      }
    }
  }
};

/// Mean-action rollout (no dropout, no perturbation, no error offsets).
inline PulseSchedule extract_pulses(const ppo::PolicyParams& p, const EnvConfig& cfg) {
  const auto ep = ppo::run_deterministic_episode(p, cfg);
  PulseSchedule s;
  s.dt = cfg.dt();
  s.controls = ep.controls;
  for (std::size_t k = 0; k < s.controls.size(); ++k) s.t.push_back(static_cast<int>(k) * cfg.dt());
  return s;
}

/// Final gate fidelity of the schedule with fixed offsets on the live channels.
inline double replay(const PulseSchedule& s, env::ErrorOffsets offsets, EnvConfig cfg) {
  cfg.errors = offsets;
  const Mat4 target = ryy_target();
  Mat4 u = Mat4::Identity();
  for (std::size_t k = 0; k < s.size(); ++k) u = env::advance(u, s.controls[k], s.t[k], cfg);
  return gate_fidelity(u, target);
}

struct Heatmap {
  std::vector<double> d_omega;  // row axis
  std::vector<double> d_delta;  // column axis
  Eigen::MatrixXd values;       // log₁₀(1 − F)
  double range = 0.0;
  std::string env_hash;
  std::string pulse_hash;
  std::string config_hash;  // optional, written when set

  bool operator==(const Heatmap&) const = default;
};

/// R(2k − (K−1))/(K−1), k = 0..K−1; symmetric with an exact zero for odd K.
inline std::vector<double> grid_axis(double range, int steps) {
  if (steps < 2) throw std::invalid_argument("heatmap steps must be >= 2");
  if (!(range >= 0.0) || !std::isfinite(range)) throw std::invalid_argument("heatmap range must be finite and >= 0");
  std::vector<double> g(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) g[static_cast<std::size_t>(k)] = range * (2 * k - (steps - 1)) / (steps - 1);
  return g;
}

inline double log_infidelity(double f) { return std::log10(1.0 - std::min(f, env::kFidelityCap)); }

inline std::string pulses_body(const PulseSchedule& s) {
  std::string out = "step,t,omega1,delta1,omega2,delta2,j\n";
  for (std::size_t k = 0; k < s.size(); ++k) {
    const auto& p = s.controls[k];
    out += std::to_string(k) + ',' + fmt17(s.t[k]) + ',' + fmt17(p.omega1) + ',' + fmt17(p.delta1) + ',' +
           fmt17(p.omega2) + ',' + fmt17(p.delta2) + ',' + fmt17(p.j) + '\n';
  }
  return out;
}

/// Replays the schedule on the uniform offset grid. Cells are independent;
/// `workers` threads share them and results land in grid order.
inline Heatmap sweep_heatmap(const PulseSchedule& s, double range, int steps, const EnvConfig& cfg,
                             unsigned workers = 1) {
  s.validate(cfg);
  Heatmap h;
  h.d_omega = grid_axis(range, steps);
  h.d_delta = h.d_omega;
  h.range = range;
  h.env_hash = env_hash(cfg);
  h.pulse_hash = hex64(fnv1a(pulses_body(s)));
  h.values.resize(steps, steps);
  const long cells = static_cast<long>(steps) * steps;
  auto work = [&](long begin, long stride) {
    for (long c = begin; c < cells; c += stride) {
      const long i = c / steps, j = c % steps;
      h.values(i, j) = log_infidelity(replay(s, {h.d_omega[static_cast<std::size_t>(i)],
                                                 h.d_delta[static_cast<std::size_t>(j)]}, cfg));
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cells)));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, static_cast<long>(w), static_cast<long>(workers));
    for (auto& th : pool) th.join();
  }
  return h;
}

struct Cell {
  int i = 0;
  int j = 0;
  bool operator==(const Cell&) const = default;
};

/// Lowest infidelity; ties go to the smallest |δΩ|+|δΔ|, then row-major order.
inline Cell argmax_fidelity(const Heatmap& h) {
  Cell best;
  double best_v = h.values(0, 0);
  double best_d = std::abs(h.d_omega[0]) + std::abs(h.d_delta[0]);
  for (int i = 0; i < h.values.rows(); ++i) {
    for (int j = 0; j < h.values.cols(); ++j) {
      const double v = h.values(i, j);
      const double d = std::abs(h.d_omega[static_cast<std::size_t>(i)]) + std::abs(h.d_delta[static_cast<std::size_t>(j)]);
      if (v < best_v || (v == best_v && d < best_d)) {
        best = {i, j};
        best_v = v;
        best_d = d;
      }
    }
  }
  return best;
}

inline Cell center_cell(const Heatmap& h) {
  return {static_cast<int>(h.values.rows() / 2), static_cast<int>(h.values.cols() / 2)};
}

struct CentralizeResult {
  PulseSchedule schedule;
  env::ErrorOffsets shift;
  Cell argmax;
  int saturated = 0;  // control values clamped to their bounds
};

/// Folds the best-fidelity offset into the schedule, on the same channels
/// the offsets act on, so the old maximum becomes the zero-offset point.
inline CentralizeResult centralize(const PulseSchedule& s, const Heatmap& h, EnvConfig cfg) {
  s.validate(cfg);
  CentralizeResult r;
  r.argmax = argmax_fidelity(h);
  r.shift = {h.d_omega[static_cast<std::size_t>(r.argmax.i)], h.d_delta[static_cast<std::size_t>(r.argmax.j)]};
  r.schedule = s;
  if (r.shift.d_omega == 0.0 && r.shift.d_delta == 0.0) return r;
  cfg.errors = r.shift;
  auto clamp = [&](double v, double lo, double hi) {
    if (v < lo || v > hi) ++r.saturated;
    return std::clamp(v, lo, hi);
  };
  for (std::size_t k = 0; k < s.size(); ++k) {
    PhysicalControls p = env::with_errors(s.controls[k], s.t[k], cfg);
    p.omega1 = clamp(p.omega1, 0.0, cfg.omega_max);
    p.omega2 = clamp(p.omega2, 0.0, cfg.omega_max);
    p.delta1 = clamp(p.delta1, -cfg.delta_max, cfg.delta_max);
    p.delta2 = clamp(p.delta2, -cfg.delta_max, cfg.delta_max);
    r.schedule.controls[k] = p;
  }
  return r;
}

/// Fraction of cells with F ≥ threshold.
inline double robust_area(const Heatmap& h, double threshold = 0.99) {
  if (h.values.size() == 0) return 0.0;
  const double bound = std::log10(1.0 - threshold);
  long n = 0;
  for (Eigen::Index k = 0; k < h.values.size(); ++k) n += h.values.data()[k] <= bound ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(h.values.size());
}

/// Extra discounted reward from holding F_hold in the bonus band from step N
/// instead of halting there with F_final.
inline double cheat_margin(int n, int n_max, double gamma, double f_hold, double f_final) {
  if (n < 1 || n > n_max) throw std::invalid_argument("cheat_margin: need 1 <= N <= N_max");
  const double hold = 1.0 - std::log10(1.0 - f_hold);
  const double fin = 10.0 - std::log10(1.0 - f_final);
  double sum = 0.0;
  for (int i = n - 1; i <= n_max - 1; ++i) sum += std::pow(gamma, i) * hold;
  return sum + std::pow(gamma, n_max) * fin - std::pow(gamma, n) * fin;
}

inline env::DynamicalPhaseReport dynamical_phase_audit(const PulseSchedule& s, EnvConfig cfg,
                                                       int substeps = 100) {
  s.validate(cfg);
  cfg.errors = {};
  return env::segment_dynamical_phases(s.controls, cfg, substeps);
}

// CSV artifacts. A '#' preamble of key=value lines precedes the header.

inline std::string pulses_to_csv(const PulseSchedule& s, const EnvConfig& cfg,
                                 const std::string& config_hash = {}) {
  std::string out = "# env_hash=" + env_hash(cfg) + "\n";
  if (!config_hash.empty()) out += "# config_hash=" + config_hash + "\n";
  return out + "# dt=" + fmt17(s.dt) + "\n" + pulses_body(s);
}

inline std::string heatmap_to_csv(const Heatmap& h) {
  std::string out = "# env_hash=" + h.env_hash + "\n# pulse_hash=" + h.pulse_hash + "\n# range=" +
                    fmt17(h.range) + "\n# steps=" + std::to_string(h.d_omega.size()) + "\n";
  if (!h.config_hash.empty()) out += "# config_hash=" + h.config_hash + "\n";
  out += "d_omega,d_delta,log10_infidelity\n";
  for (std::size_t i = 0; i < h.d_omega.size(); ++i) {
    for (std::size_t j = 0; j < h.d_delta.size(); ++j) {
      out += fmt17(h.d_omega[i]) + ',' + fmt17(h.d_delta[j]) + ',' +
             fmt17(h.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))) + '\n';
    }
  }
  return out;
}

struct CsvTable {
  std::map<std::string, std::string> meta;
  std::vector<std::vector<double>> rows;
};

inline double parse_double(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError("line " + std::to_string(line) + ": malformed number '" + tok + "'");
  }
}

inline CsvTable parse_csv(const std::string& text, const std::string& header) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  bool seen_header = false;
  const auto cols = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',') + 1);
  while (std::getline(in, line)) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq != std::string::npos) {
        auto key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        t.meta[key] = line.substr(eq + 1);
      }
      continue;
    }
    if (!seen_header) {
      if (line != header) throw FormatError("line " + std::to_string(no) + ": expected header '" + header + "'");
      seen_header = true;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(parse_double(tok, no));
    if (row.size() != cols) {
      throw FormatError("line " + std::to_string(no) + ": expected " + std::to_string(cols) + " columns");
    }
    t.rows.push_back(std::move(row));
  }
  if (!seen_header) throw FormatError("missing header '" + header + "'");
  return t;
}

struct LoadedPulses {
  PulseSchedule schedule;
  std::string env_hash;
};

inline LoadedPulses pulses_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text, "step,t,omega1,delta1,omega2,delta2,j");
  LoadedPulses out;
  if (auto it = t.meta.find("env_hash"); it != t.meta.end()) out.env_hash = it->second;
  auto it = t.meta.find("dt");
  if (it == t.meta.end()) throw FormatError("pulses: missing '# dt=' metadata");
  out.schedule.dt = parse_double(it->second, 0);
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    const auto& r = t.rows[k];
    if (r[0] != static_cast<double>(k)) throw FormatError("pulses: step column out of order at row " + std::to_string(k));
    out.schedule.t.push_back(r[1]);
    out.schedule.controls.push_back({r[2], r[3], r[4], r[5], r[6]});
  }
  return out;
}

inline Heatmap heatmap_from_csv(const std::string& text) {
  const CsvTable t = parse_csv(text, "d_omega,d_delta,log10_infidelity");
  Heatmap h;
  auto meta = [&](const char* k) {
    auto it = t.meta.find(k);
    if (it == t.meta.end()) throw FormatError(std::string("heatmap: missing '# ") + k + "=' metadata");
    return it->second;
  };
  h.env_hash = meta("env_hash");
  h.pulse_hash = meta("pulse_hash");
  if (auto it = t.meta.find("config_hash"); it != t.meta.end()) h.config_hash = it->second;
  h.range = parse_double(meta("range"), 0);
  const int steps = static_cast<int>(parse_double(meta("steps"), 0));
  if (steps < 2 || t.rows.size() != static_cast<std::size_t>(steps) * static_cast<std::size_t>(steps)) {
    throw FormatError("heatmap: row count does not match steps");
  }
  h.values.resize(steps, steps);
  for (int i = 0; i < steps; ++i) {
    for (int j = 0; j < steps; ++j) {
      const auto& r = t.rows[static_cast<std::size_t>(i * steps + j)];
      if (j == 0) h.d_omega.push_back(r[0]);
      if (i == 0) h.d_delta.push_back(r[1]);
      h.values(i, j) = r[2];
    }
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace qgrl::robust
