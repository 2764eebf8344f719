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

// Command dispatch for the qgrl tool. Every command writes its artifacts
// under the configured output directory and returns a process exit status.

#pragma once

#include "qgrl/checkpoint.hpp"
#include "qgrl/config.hpp"
#include "qgrl/geometric_gate.hpp"
#include "qgrl/ppo.hpp"
#include "qgrl/robustness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qgrl::cli {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c = {"analytic", "scan-entangler", "train",  "pulses",
                                             "heatmap",  "centralize",     "report"};
  return c;
}

struct Invocation {
  std::string command;
  RunConfig config;
  std::optional<std::string> ckpt;
  std::optional<std::string> pulses;
  std::vector<std::string> inputs;  // heatmap files for report
  unsigned workers = 1;
};

inline std::string fmt(double v, int digits = 10) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

namespace detail {

inline std::string out_path(const RunConfig& c, const std::string& name) {
  std::filesystem::create_directories(c.out_dir);
  return (std::filesystem::path(c.out_dir) / name).string();
}

inline std::vector<int> policy_shape(const RunConfig& c) {
  std::vector<int> s{env::kObservationDim};
  s.insert(s.end(), c.ppo.hidden_layers.begin(), c.ppo.hidden_layers.end());
  s.push_back(env::kActionDim);
  return s;
}

inline std::vector<int> value_shape(const RunConfig& c) {
  auto s = policy_shape(c);
  s.back() = 1;
  return s;
}

inline robust::LoadedPulses load_pulses(const Invocation& inv) {
  if (!inv.pulses) throw UsageError("missing --pulses PATH");
  auto lp = robust::pulses_from_csv(robust::read_file(*inv.pulses));
  const auto expected = robust::env_hash(inv.config.env);
  if (!lp.env_hash.empty() && lp.env_hash != expected) {
    throw std::runtime_error("pulses file env_hash " + lp.env_hash + " does not match configuration " + expected);
  }
  lp.schedule.validate(inv.config.env);
  return lp;
}

inline std::string analytic(const RunConfig& c) {
  namespace g = geometric;
  std::string r;
  auto line = [&](const std::string& k, const std::string& v) { r += k + " = " + v + "\n"; };
  const auto search = g::find_entangler_coupling(c.scan_lo, c.scan_hi, c.scan_tol);
  line("entangler_coupling", search.j_over_omega ? fmt(*search.j_over_omega) : "none");
  line("entangler_deviation", fmt(search.deviation, 3));
  const double j = g::kEntanglerCoupling;
  const Mat4 vu = g::build_vu_closed(j);
  const auto d = g::entangler_coefficients(vu);
  line("coefficients_at_0.3187", fmt(d[0], 8) + " " + fmt(d[1], 8) + " " + fmt(d[2], 8) + " " + fmt(d[3], 8));
  const Mat4 dyn = g::build_vu_dynamics(g::nonadiabatic_params(2.0 * kPi, j), 100000);
  line("closed_vs_dynamics_defect", fmt(phase_aligned_distance(vu, dyn), 3));
  const auto seq = g::reference_beta_sequence();
  const Mat4 ryy = g::compose_ryy(seq, j);
  line("beta_composite_fidelity_minus", fmt(gate_fidelity(ryy, ryy_target(-1)), 12));
  line("beta_composite_fidelity_plus", fmt(gate_fidelity(ryy, ryy_target(+1)), 12));
  const auto opt = g::optimize_beta(ryy_target(-1), seq, j);
  line("optimized_fidelity_minus", fmt(gate_fidelity(g::compose_ryy(opt.sequence, j), ryy_target(-1)), 12));
  line("optimized_objective", fmt(opt.final_objective, 8));
  const auto timing = g::composite_timing(seq);
  line("slot_durations", fmt(timing.before, 8) + " " + fmt(timing.entangler, 8) + " " + fmt(timing.after, 8));
  env::EnvConfig geo = c.env;
  geo.kind = env::HamiltonianKind::Geometric;
  geo.total_time = 17.05;
  const auto [t1, t2] = env::geometric_phase_schedule(geo);
  line("switch_times_T17.05", fmt(t1, 10) + " " + fmt(t2, 10));
  return r;
}

inline std::string scan_table(const RunConfig& c) {
  std::string r = "j_over_omega,d1,d2,deviation\n";
  const int n = 50;
  for (int k = 0; k <= n; ++k) {
    const double j = c.scan_lo + (c.scan_hi - c.scan_lo) * k / n;
    const auto d = geometric::entangler_coefficients(geometric::build_vu_closed(j));
    r += fmt17(j) + ',' + fmt17(d[0]) + ',' + fmt17(d[1]) + ',' + fmt17(d[0] - std::sqrt(0.5)) + '\n';
  }
  return r;
}

}  // namespace detail

inline void run_command(const Invocation& inv, std::ostream& out) {
  const RunConfig& c = inv.config;
  const std::string& cmd = inv.command;
  if (cmd == "analytic") {
    const auto text = detail::analytic(c);
    robust::write_file(detail::out_path(c, "analytic.txt"), "# config_hash=" + c.hash() + "\n" + text);
    out << text;
  } else if (cmd == "scan-entangler") {
    const auto search = geometric::find_entangler_coupling(c.scan_lo, c.scan_hi, c.scan_tol);
    robust::write_file(detail::out_path(c, "scan.csv"), "# config_hash=" + c.hash() + "\n" + detail::scan_table(c));
    out << "entangler_coupling = " << (search.j_over_omega ? fmt(*search.j_over_omega) : "none") << "\n"
        << "deviation = " << fmt(search.deviation, 3) << "\n";
    if (!search.j_over_omega) throw std::runtime_error("no perfect-entangler coupling in the scan range");
  } else if (cmd == "train") {
    if (!c.seed_given) throw UsageError("train requires an explicit seed (--seed N or seed = N)");
    const auto res = ppo::train(c.env, c.ppo, c.reg, [&](const ppo::UpdateRecord& r) {
      if (r.episodes_seen % (10L * c.ppo.batch_size) == 0) {
        out << "episodes " << r.episodes_seen << " eval_fidelity " << fmt(r.eval_fidelity, 6) << "\n";
      }
      return true;
    });
    ckpt::Metadata meta;
    meta.regularizer = c.reg.describe();
    meta.episodes = static_cast<long>(res.log.episodes.size());
    meta.config_hash = c.hash();
    ckpt::save(detail::out_path(c, "policy.qgrl"), res.params, meta);
    std::string log = "# config_hash=" + c.hash() + "\nepisode,reward,fidelity\n";
    for (const auto& e : res.log.episodes) log += std::to_string(e.episode) + ',' + fmt17(e.reward) + ',' + fmt17(e.fidelity) + '\n';
    robust::write_file(detail::out_path(c, "train_log.csv"), log);
    std::string upd = "# config_hash=" + c.hash() + "\nepisodes,eval_fidelity,eval_reward,policy_loss,value_loss,approx_kl,clip_fraction\n";
    for (const auto& u : res.log.updates) {
      upd += std::to_string(u.episodes_seen) + ',' + fmt17(u.eval_fidelity) + ',' + fmt17(u.eval_reward) + ',' +
             fmt17(u.policy_loss) + ',' + fmt17(u.value_loss) + ',' + fmt17(u.approx_kl) + ',' + fmt17(u.clip_fraction) + '\n';
    }
    robust::write_file(detail::out_path(c, "updates.csv"), upd);
    out << "episodes = " << res.log.episodes.size() << "\n"
        << "best_eval_fidelity = " << fmt(res.log.best_eval_fidelity, 10) << "\n"
        << "halted_on_threshold = " << (res.log.halted_on_threshold ? "true" : "false") << "\n";
  } else if (cmd == "pulses") {
    if (!inv.ckpt) throw UsageError("missing --ckpt PATH");
    const auto ck = ckpt::load_expecting(*inv.ckpt, detail::policy_shape(c), detail::value_shape(c));
    const auto s = robust::extract_pulses(ck.params, c.env);
    robust::write_file(detail::out_path(c, "pulses.csv"), robust::pulses_to_csv(s, c.env, c.hash()));
    out << "steps = " << s.size() << "\n"
        << "fidelity = " << fmt(robust::replay(s, {}, c.env), 12) << "\n";
  } else if (cmd == "heatmap" || cmd == "centralize") {
    const auto lp = detail::load_pulses(inv);
    auto h = robust::sweep_heatmap(lp.schedule, c.heatmap_range, c.heatmap_steps, c.env, inv.workers);
    h.config_hash = c.hash();
    if (cmd == "heatmap") {
      robust::write_file(detail::out_path(c, "heatmap.csv"), robust::heatmap_to_csv(h));
      const auto best = robust::argmax_fidelity(h);
      const auto mid = robust::center_cell(h);
      out << "robust_area = " << fmt(robust::robust_area(h), 6) << "\n"
          << "center_log10_infidelity = " << fmt(h.values(mid.i, mid.j), 8) << "\n"
          << "best_cell = " << fmt(h.d_omega[static_cast<std::size_t>(best.i)], 6) << " "
          << fmt(h.d_delta[static_cast<std::size_t>(best.j)], 6) << "\n";
      return;
    }
    const auto r = robust::centralize(lp.schedule, h, c.env);
    auto h2 = robust::sweep_heatmap(r.schedule, c.heatmap_range, c.heatmap_steps, c.env, inv.workers);
    h2.config_hash = c.hash();
    robust::write_file(detail::out_path(c, "pulses_centralized.csv"), robust::pulses_to_csv(r.schedule, c.env, c.hash()));
    robust::write_file(detail::out_path(c, "heatmap_centralized.csv"), robust::heatmap_to_csv(h2));
    const auto best = robust::argmax_fidelity(h2);
    const auto mid = robust::center_cell(h2);
    out << "shift = " << fmt(r.shift.d_omega, 6) << " " << fmt(r.shift.d_delta, 6) << "\n"
        << "saturated_values = " << r.saturated << "\n"
        << "robust_area_before = " << fmt(robust::robust_area(h), 6) << "\n"
        << "robust_area_after = " << fmt(robust::robust_area(h2), 6) << "\n"
        << "argmax_at_center = " << (best.i == mid.i && best.j == mid.j ? "true" : "false") << "\n";
    if (r.saturated > 0) out << "warning: " << r.saturated << " control values clamped to bounds\n";
  } else if (cmd == "report") {
    if (inv.inputs.empty()) throw UsageError("report needs at least one heatmap file");
    struct Row {
      std::string file;
      double area;
      double best;
      double center;
    };
    std::vector<Row> rows;
    std::string hash;
    for (const auto& f : inv.inputs) {
      const auto h = robust::heatmap_from_csv(robust::read_file(f));
      if (hash.empty()) hash = h.env_hash;
      if (h.env_hash != hash) {
        throw std::runtime_error("env_hash mismatch: " + f + " has " + h.env_hash + ", expected " + hash);
      }
      const auto b = robust::argmax_fidelity(h);
      const auto m = robust::center_cell(h);
      rows.push_back({f, robust::robust_area(h), h.values(b.i, b.j), h.values(m.i, m.j)});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.area > b.area; });
    std::string text = "# env_hash=" + hash + "\nrank,robust_area,best_log10_infidelity,center_log10_infidelity,file\n";
    for (std::size_t k = 0; k < rows.size(); ++k) {
      text += std::to_string(k + 1) + ',' + fmt(rows[k].area, 6) + ',' + fmt(rows[k].best, 8) + ',' +
              fmt(rows[k].center, 8) + ',' + rows[k].file + '\n';
    }
    robust::write_file(detail::out_path(c, "report.csv"), text);
    out << text;
  } else {
    throw UsageError("unknown command '" + cmd + "'");
  }
}

/// 0 on success; otherwise a single "error: <command>: <message>" line and
/// status 2 for usage errors, 1 for everything else.
inline int dispatch(const Invocation& inv, std::ostream& out, std::ostream& err) {
  try {
    run_command(inv, out);
    return 0;
  } catch (const UsageError& e) {
    err << "error: " << inv.command << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << inv.command << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace qgrl::cli
