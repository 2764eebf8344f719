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

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "qgrl/robustness.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>

namespace {

using namespace qgrl;
using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, bool ok, const char* what, const std::string& detail) {
  std::printf("criterion %2d: %s  %s: %s\n", id, ok ? "PASS" : "FAIL", what, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void closed_form_vs_dynamics() {
  const auto t0 = Clock::now();
  const Mat4 closed = geometric::build_vu_closed(0.3187);
  const Mat4 dyn = geometric::build_vu_dynamics(geometric::nonadiabatic_params(2.0 * kPi, 0.3187), 100000);
  const double defect = phase_aligned_distance(closed, dyn);
  const double secs = seconds_since(t0);
  report(1, defect <= 1e-6 && secs < 10.0, "closed form vs dynamics",
         "defect " + g(defect) + " (<= 1e-6), " + g(secs) + " s (< 10 s)");
}

void entangler_coupling() {
  const auto s = geometric::find_entangler_coupling(0.0, 0.49, 1e-9);
  if (!s.j_over_omega) {
    report(2, false, "perfect-entangler coupling", "no root found in [0, 0.49]");
    return;
  }
  const auto d = geometric::entangler_coefficients(geometric::build_vu_closed(*s.j_over_omega));
  const bool ok = std::abs(*s.j_over_omega - 0.3187) <= 5e-4 && std::abs(d[0] - 0.70711) <= 1e-3 &&
                  std::abs(d[1] - 0.70711) <= 1e-3;
  report(2, ok, "perfect-entangler coupling",
         "J/omega " + g(*s.j_over_omega) + " (0.3187 +- 5e-4), coefficients " + g(d[0]) + " " + g(d[1]) +
             " (0.70711 +- 1e-3)");
}

void dynamical_phase_cancellation() {
  using namespace geometric;
  const double omega = 2.0 * kPi;
  double worst = 0.0;
  double bound = 0.0;
  bool ok = true;
  for (double delta : {0.3, 1.0, kPi, 5.0, 6.0}) {
    const double rabi = std::sqrt(delta * (omega - delta));
    const double T = 1.7;
    const DriveSchedule s = [=](double) { return TwoLevelDrive{rabi, delta, omega}; };
    for (Branch br : {Branch::Upper, Branch::Lower}) {
      const double v = std::abs(dynamical_phase(s, br, T, 10000));
      worst = std::max(worst, v);
      ok = ok && v <= 1e-8 * omega * T;
    }
  }
  const auto p = nonadiabatic_params(omega, 0.3187);
  const CoupledSchedule cs = [&](double) { return p; };
  for (Block b : {Block::Plus, Block::Minus}) {
    for (Branch br : {Branch::Upper, Branch::Lower}) {
      const double v = std::abs(dynamical_phase(cs, b, br, p.T, 10000));
      worst = std::max(worst, v);
      bound = 1e-8 * omega * p.T;
      ok = ok && v <= bound;
    }
  }
  report(3, ok, "dynamical-phase cancellation",
         "max |gamma_d| " + g(worst) + " (<= 1e-8 omega T, " + g(bound) + " for the coupled gate)");
}

Mat2 oracle_single_qubit(double beta) {
  const Mat2 a = -std::cos(beta) * pauli(Pauli::X) + std::sin(beta) * pauli(Pauli::Z);
  return -expm_hermitian(a, -kPi * std::sin(beta));
}

Mat2 oracle_slot(const std::vector<double>& betas) {
  Mat2 m = Mat2::Identity();
  for (double b : betas) {
    const Mat2 gate = oracle_single_qubit(b);
    Mat2 next = Mat2::Zero();
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) next(i, j) += m(i, k) * gate(k, j);
    m = next;
  }
  return m;
}

Mat4 oracle_kron(const Mat2& a, const Mat2& b) {
  Mat4 out;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out(i, j) = a(i / 2, j / 2) * b(i % 2, j % 2);
  return out;
}

void beta_fixture() {
  using namespace geometric;
  constexpr double kFrozen = 3.90789978752872e-09;
  const auto seq = reference_beta_sequence();
  const Mat4 target = ryy_target(-1);
  const double f = gate_fidelity(compose_ryy(seq, kEntanglerCoupling), target);
  const Mat4 oracle = oracle_kron(oracle_slot(seq.slots[2]), oracle_slot(seq.slots[3])) *
                      build_vu_closed(kEntanglerCoupling) *
                      oracle_kron(oracle_slot(seq.slots[0]), oracle_slot(seq.slots[1]));
  const double f_oracle = gate_fidelity(oracle, target);
  const auto opt = optimize_beta(target, seq, kEntanglerCoupling);
  bool monotone = opt.final_objective <= opt.initial_objective;
  double prev = opt.initial_objective;
  for (double v : opt.history) {
    monotone = monotone && v <= prev;
    prev = v;
  }
  const double f_opt = gate_fidelity(compose_ryy(opt.sequence, kEntanglerCoupling), target);
  const bool ok = std::abs(f - f_oracle) <= 1e-12 && std::abs(f - kFrozen) <= 1e-12 && monotone && f_opt >= f;
  report(4, ok, "beta-composite fixture",
         "F " + g(f) + " vs oracle " + g(f_oracle) + " and frozen " + g(kFrozen) + " (1e-12); optimized F " +
             g(f_opt) + (monotone ? ", objective never increased" : ", objective increased"));
}

void reward_values() {
  const env::EnvConfig c;
  const double a = env::reward(0.5, c, false), b = env::reward(0.96, c, false), d = env::reward(0.999, c, false);
  const bool ok = std::abs(a - 0.3010300) <= 1e-7 && std::abs(b - 2.3979400) <= 1e-7 && std::abs(d - 13.0) <= 1e-7;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.7f %.7f %.7f (exact to 1e-7)", a, b, d);
  report(5, ok, "reward unit values", buf);
}

void identity_case() {
  env::ControlEnv e{env::EnvConfig{}};
  double worst = std::abs(e.state().fidelity - 0.5);
  int steps = 0;
  env::StepOutcome o;
  do {
    o = e.step_controls({}, env::Action{0.0, 0.5, 0.0, 0.5, 0.0});
    worst = std::max(worst, std::abs(o.fidelity - 0.5));
    ++steps;
  } while (!o.done);
  report(6, worst <= 1e-12 && steps == 100, "environment identity case",
         std::to_string(steps) + " steps, max |F - 1/2| " + g(worst) + " (<= 1e-12)");
}

ppo::Trajectory random_batch(const ppo::PolicyParams& p, int n, ppo::Rng& rng, double kappa, double clip) {
  using namespace ppo;
  Trajectory t;
  std::normal_distribution<double> nrm(0.0, 1.0), obs(0.0, 0.6);
  std::uniform_real_distribution<double> shift(-0.4, 0.4);
  const RegularizerSpec reg{kappa > 0 ? RegularizerSpec::Kind::Dropout : RegularizerSpec::Kind::None, 0.1, kappa};
  for (int k = 0; k < n; ++k) {
    Observation o;
    for (double& x : o) x = obs(rng);
    nn::DropoutMasks masks;
    const auto out = policy_forward(o, p, reg, Mode::Train, rng, &masks);
    Action u;
    for (std::size_t c = 0; c < u.size(); ++c) u[c] = out.pre_mean[c] + out.stddev[c] * nrm(rng);
    const double lp = squashed_log_prob(u, out.pre_mean, p.log_std);
    // Keep ratios away from the clip kinks, where central differences are not defined.
    double s = shift(rng);
    while (std::abs(s + std::log1p(clip)) < 1e-3 || std::abs(s + std::log1p(-clip)) < 1e-3) s = shift(rng);
    t.observations.push_back(o);
    t.actions.push_back(u);
    t.log_probs.push_back(lp + s);
    t.rewards.push_back(nrm(rng));
    t.values.push_back(out.value);
    t.dones.push_back(k % 7 == 6 || k + 1 == n);
    if (kappa > 0) {
      Vec cat(p.policy.hidden_units());
      Eigen::Index at = 0;
      for (const auto& m : masks) {
        cat.segment(at, m.rows()) = m.col(0);
        at += m.rows();
      }
      t.masks.push_back(cat);
    }
  }
  return t;
}

void gradient_check() {
  using namespace ppo;
  const auto t0 = Clock::now();
  const int draws = 100;
  double worst = 0.0;
  long checked = 0;
  for (int d = 0; d < draws; ++d) {
    Rng rng(1000 + static_cast<std::uint64_t>(d));
    PolicyParams p = PolicyParams::create({8}, rng, -0.3);
    std::normal_distribution<double> nrm(0.0, 0.4);
    p.for_each_block([&](double* x, std::size_t len) {
      for (std::size_t k = 0; k < len; ++k) x[k] = nrm(rng);
    });
    PpoConfig cfg;
    cfg.entropy_coef = 0.01;
    const double kappa = d % 5 == 4 ? 0.2 : 0.0;
    const auto t = random_batch(p, 16, rng, kappa, cfg.clip_ratio);
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<double> adv(t.size()), ret(t.size());
    for (auto& a : adv) a = nrm(rng);
    for (auto& r : ret) r = nrm(rng);
    PolicyParams grad = p.zeros_like();
    ppo_loss(p, t, idx, adv, ret, cfg, &grad);
    const Vec analytic = grad.flatten();
    const Vec theta = p.flatten();
    PolicyParams q = p;
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      Vec tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      q.assign(tp);
      const double lp = ppo_loss(q, t, idx, adv, ret, cfg).total;
      q.assign(tm);
      const double lm = ppo_loss(q, t, idx, adv, ret, cfg).total;
      const double fd = (lp - lm) / (2 * h);
      worst = std::max(worst, std::abs(fd - analytic(k)) / std::max({std::abs(fd), std::abs(analytic(k)), 1e-5}));
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  report(7, worst <= 1e-4 && secs < 60.0, "PPO gradient check",
         std::to_string(draws) + " draws of 38->8->5, " + std::to_string(checked) + " partials, max relative error " +
             g(worst) + " (<= 1e-4), " + g(secs) + " s (< 60 s)");
}

void gae_oracle() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    ppo::Trajectory t;
    const int n = 1 + static_cast<int>(u(rng) * 64);
    for (int k = 0; k < n; ++k) {
      t.observations.push_back({});
      t.actions.push_back({});
      t.log_probs.push_back(0.0);
      t.rewards.push_back(nrm(rng));
      t.values.push_back(nrm(rng));
      t.dones.push_back(u(rng) < 0.1 || k + 1 == n);
    }
    const double gamma = u(rng), lambda = u(rng);
    const auto est = ppo::compute_gae(t, gamma, lambda);
    for (int k = 0; k < n; ++k) {
      double a = 0.0, w = 1.0;
      for (int l = k; l < n; ++l) {
        const double next = t.dones[static_cast<std::size_t>(l)] ? 0.0 : t.values[static_cast<std::size_t>(l + 1)];
        a += w * (t.rewards[static_cast<std::size_t>(l)] + gamma * next - t.values[static_cast<std::size_t>(l)]);
        if (t.dones[static_cast<std::size_t>(l)]) break;
        w *= gamma * lambda;
      }
      worst = std::max(worst, std::abs(a - est.advantages[static_cast<std::size_t>(k)]));
    }
  }
  report(8, worst <= 1e-12, "GAE oracle equivalence", "1000 trajectories, max deviation " + g(worst) + " (<= 1e-12)");
}

void dropout_statistics() {
  using namespace ppo;
  Rng rng(9);
  auto p = PolicyParams::create({64, 64}, rng);
  const RegularizerSpec drop{RegularizerSpec::Kind::Dropout, 0.1, 0.1};
  const RegularizerSpec none{};
  bool identical = true;
  std::normal_distribution<double> nrm(0.0, 1.0);
  for (int k = 0; k < 1000; ++k) {
    Observation o;
    for (double& x : o) x = nrm(rng);
    const auto a = policy_forward(o, p, drop, Mode::Eval, rng);
    const auto b = policy_forward(o, p, none, Mode::Eval, rng);
    identical = identical && a.mean == b.mean && a.value == b.value && a.stddev == b.stddev;
  }
  const int n = 100000;
  const Vec out = apply_dropout(Vec::Ones(n), 0.1, Mode::Train, rng);
  const double dropped = static_cast<double>((out.array() == 0.0).count());
  const double sd = std::sqrt(n * 0.1 * 0.9);
  const bool in_band = std::abs(dropped - n * 0.1) <= 3 * sd;
  report(9, identical && in_band, "dropout statistics",
         std::string(identical ? "eval bit-identical to no dropout" : "eval differs from no dropout") + ", " +
             g(dropped) + " of 1e5 dropped (10000 +- " + g(3 * sd) + ")");
}

void smoke_training() {
  const auto t0 = Clock::now();
  env::EnvConfig ec;
  std::string detail;
  bool ok = false;
  for (std::uint64_t seed : {0, 1, 2}) {
    ppo::PpoConfig pc;
    pc.seed = seed;
    pc.max_episodes = 20000;
    pc.halt_fidelity = 0.95;
    const auto r = ppo::train(ec, pc, {});
    const double f = ppo::run_deterministic_episode(r.params, ec).fidelity;
    detail += "seed " + std::to_string(seed) + ": eval F " + g(f) + " after " + std::to_string(r.log.episodes.size()) +
              " episodes; ";
    if (f >= 0.95 && r.log.episodes.size() <= 20000) {
      ok = true;
      break;
    }
  }
  const double secs = seconds_since(t0);
  report(10, ok && secs <= 3600.0, "smoke training", detail + g(secs) + " s (<= 3600 s)");
}

// Rx(pi/2) at t = 0, ZZ for pi/2, Rx(pi/2) about -X at t = 0.5: exactly the target.
robust::PulseSchedule exact_schedule(const env::EnvConfig& c) {
  robust::PulseSchedule s;
  s.dt = c.dt();
  const double rabi = (kPi / 2) / c.dt();
  const double j = (kPi / 2) / (24 * c.dt());
  for (int k = 0; k < c.n_max; ++k) {
    s.t.push_back(k * c.dt());
    s.controls.push_back(k == 0 || k == 25 ? env::PhysicalControls{rabi, 0, rabi, 0, 0}
                                           : env::PhysicalControls{0, 0, 0, 0, j});
  }
  return s;
}

void heatmap_centralization() {
  using namespace robust;
  env::EnvConfig general;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PulseSchedule r;
  r.dt = general.dt();
  for (int k = 0; k < general.n_max; ++k) {
    r.t.push_back(k * general.dt());
    r.controls.push_back({u(rng) * general.omega_max, (2 * u(rng) - 1) * general.delta_max, u(rng) * general.omega_max,
                          (2 * u(rng) - 1) * general.delta_max, u(rng) * general.j_max});
  }
  const auto a = heatmap_to_csv(sweep_heatmap(r, 0.1, 21, general));
  const auto b = heatmap_to_csv(sweep_heatmap(r, 0.1, 21, general, 4));
  const bool identical = a == b && a == heatmap_to_csv(sweep_heatmap(r, 0.1, 21, general));

  env::EnvConfig c;
  c.omega_max = 50.0 * kPi;
  c.n_max = 26;
  c.total_time = 0.52;
  const auto grid = grid_axis(0.1, 21);
  auto shifted = c;
  shifted.errors = {-grid[7], -grid[12]};
  auto s = exact_schedule(c);
  for (std::size_t k = 0; k < s.size(); ++k) s.controls[k] = env::with_errors(s.controls[k], s.t[k], shifted);
  const auto h = sweep_heatmap(s, 0.1, 21, c);
  const auto before = argmax_fidelity(h);
  const auto res = centralize(s, h, c);
  const auto h2 = sweep_heatmap(res.schedule, 0.1, 21, c);
  const auto after = argmax_fidelity(h2);
  const bool centered = after == center_cell(h2) && before == Cell{7, 12};
  report(11, identical && centered, "heatmap determinism and centralization",
         std::string(identical ? "21x21 CSV byte-identical" : "CSV differs") + "; argmax (" + std::to_string(before.i) +
             "," + std::to_string(before.j) + ") -> (" + std::to_string(after.i) + "," + std::to_string(after.j) +
             "), center (10,10)");
}

void cheat_margin_check() {
  double worst = 0.0;
  for (int n : {1, 2, 5, 17, 50, 99, 100}) {
    for (double gamma : {0.0, 0.3, 0.9, 0.99, 1.0}) {
      for (double fh : {0.95, 0.96, 0.98}) {
        for (double ff : {0.99, 0.995, 0.9999}) {
          double sum = 0.0;
          for (int i = n - 1; i <= 99; ++i) sum += std::pow(gamma, i) * (1.0 - std::log10(1.0 - fh));
          const double bonus = 10.0 - std::log10(1.0 - ff);
          const double direct = sum + std::pow(gamma, 100) * bonus - std::pow(gamma, n) * bonus;
          const double v = robust::cheat_margin(n, 100, gamma, fh, ff);
          worst = std::max(worst, std::abs(v - direct) / std::max(1.0, std::abs(direct)));
        }
      }
    }
  }
  const double m = robust::cheat_margin(5, 100, 0.99, 0.96, 0.995);
  report(12, worst <= 1e-12 && m > 0.0, "cheat margin",
         "max deviation " + g(worst) + " (<= 1e-12); margin at N=5 " + g(m) + " (> 0)");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> checks = {
      closed_form_vs_dynamics, entangler_coupling, dynamical_phase_cancellation, beta_fixture,
      reward_values,           identity_case,      gradient_check,               gae_oracle,
      dropout_statistics,      smoke_training,     heatmap_centralization,       cheat_margin_check};
  for (std::size_t k = 0; k < checks.size(); ++k) {
    try {
      checks[k]();
    } catch (const std::exception& e) {
      report(static_cast<int>(k + 1), false, "exception", e.what());
    }
  }
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
