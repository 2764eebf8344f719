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

// Gate-control environment: the agent sets five normalized controls per
// time step, the environment multiplies the step propagator into U and
// rewards the logarithmic infidelity against R_YY(π/4).

#pragma once

#include "qgrl/geometric_gate.hpp"
#include "qgrl/linalg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qgrl::env {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class HamiltonianKind { General, Geometric };
enum class RewardMode { PerStep, Terminal };

/// Systematic offsets in units of Ω_max and Δ_max.
struct ErrorOffsets {
  double d_omega = 0.0;
  double d_delta = 0.0;
  bool operator==(const ErrorOffsets&) const = default;
};

inline constexpr int kActionDim = 5;
inline constexpr int kObservationDim = 38;
inline constexpr double kFidelityCap = 1.0 - 1e-12;

struct EnvConfig {
  double omega_drive = 2.0 * kPi;
  double omega_max = 2.0 * kPi;
  double delta_max = 2.0 * kPi;
  double j_max = 2.0 * kPi;
  double total_time = 2.0;
  int n_max = 100;
  HamiltonianKind kind = HamiltonianKind::General;
  double switch_t1 = 0.0;  // geometric kind only
  double switch_t2 = 0.0;
  RewardMode reward_mode = RewardMode::PerStep;
  double fidelity_threshold = 0.99;
  double band_lo = 0.95;  // clip band [band_lo, fidelity_threshold)
  double step_bonus = 1.0;
  double terminal_bonus = 10.0;
  double phase_penalty_lambda = 0.0;
  ErrorOffsets errors;

  double dt() const { return total_time / static_cast<double>(n_max); }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (n_max < 1) fail("n_max: must be >= 1");
    if (!(total_time > 0.0)) fail("total_time: must be positive");
    if (!(omega_max >= 0.0)) fail("omega_max: must be non-negative");
    if (!(delta_max >= 0.0)) fail("delta_max: must be non-negative");
    if (!(j_max >= 0.0)) fail("j_max: must be non-negative");
    if (!std::isfinite(omega_drive)) fail("omega_drive: must be finite");
    if (!(band_lo >= 0.0 && band_lo < fidelity_threshold && fidelity_threshold < 1.0)) {
      fail("fidelity_threshold: need 0 <= band_lo < threshold < 1");
    }
    if (!(phase_penalty_lambda >= 0.0)) fail("phase_penalty_lambda: must be non-negative");
    if (kind == HamiltonianKind::Geometric) {
      if (!(switch_t1 > 0.0 && switch_t1 < switch_t2 && switch_t2 < total_time)) {
        fail("switch times: need 0 < t1 < t2 < total_time");
      }
    } else if (phase_penalty_lambda > 0.0) {
      fail("phase_penalty_lambda: requires hamiltonian_kind = geometric");
    }
  }
};

/// Normalized controls (Ω̃₁, Δ̃₁, Ω̃₂, Δ̃₂, J̃), each in [0, 1].
using Action = std::array<double, kActionDim>;
using Observation = std::array<double, kObservationDim>;

inline Action clamp_action(Action a) {
  for (double& x : a) x = std::clamp(x, 0.0, 1.0);
  return a;
}

/// Per-qubit physical values entering the general Hamiltonian.
struct PhysicalControls {
  double omega1 = 0.0;
  double delta1 = 0.0;
  double omega2 = 0.0;
  double delta2 = 0.0;
  double j = 0.0;
  bool operator==(const PhysicalControls&) const = default;
};

enum class GeometricPhase { LocalBefore, Entangling, LocalAfter };

inline GeometricPhase phase_at(double t, const EnvConfig& cfg) {
  if (t < cfg.switch_t1) return GeometricPhase::LocalBefore;
  if (t < cfg.switch_t2) return GeometricPhase::Entangling;
  return GeometricPhase::LocalAfter;
}

/// Maps a normalized action to physical controls at time t.
///
/// General kind: Ω_i = Ω̃_i Ω_max, Δ_i = (2Δ̃_i − 1) Δ_max, J = J̃ J_max.
/// Geometric kind, local phases: both qubits driven with Ω̃₁, Ω̃₂ and a
/// shared Δ from Δ̃₁; J = 0. Entangling phase: only qubit 2 is driven, with
/// Ω from Ω̃₁, Δ from Δ̃₁ and J from J̃.
inline PhysicalControls to_physical(const Action& raw, double t, const EnvConfig& cfg) {
  const Action a = clamp_action(raw);
  const auto rabi = [&](double x) { return x * cfg.omega_max; };
  const auto detuning = [&](double x) { return (2.0 * x - 1.0) * cfg.delta_max; };
  PhysicalControls pc;
  if (cfg.kind == HamiltonianKind::General) {
    pc = {rabi(a[0]), detuning(a[1]), rabi(a[2]), detuning(a[3]), a[4] * cfg.j_max};
    return pc;
  }
  if (phase_at(t, cfg) == GeometricPhase::Entangling) {
    pc.omega2 = rabi(a[0]);
    pc.delta2 = detuning(a[1]);
    pc.j = a[4] * cfg.j_max;
  } else {
    pc.omega1 = rabi(a[0]);
    pc.omega2 = rabi(a[2]);
    pc.delta1 = pc.delta2 = detuning(a[1]);
  }
  return pc;
}

/// Applies the systematic offsets to the channels that are live at time t.
inline PhysicalControls with_errors(PhysicalControls pc, double t, const EnvConfig& cfg) {
  const double dO = cfg.omega_max * cfg.errors.d_omega;
  const double dD = cfg.delta_max * cfg.errors.d_delta;
  const bool qubit1_live =
      cfg.kind == HamiltonianKind::General || phase_at(t, cfg) != GeometricPhase::Entangling;
  if (qubit1_live) {
    pc.omega1 += dO;
    pc.delta1 += dD;
  }
  pc.omega2 += dO;
  pc.delta2 += dD;
  return pc;
}

/// ½Σᵢ(Ωᵢ cos ωt Xᵢ + Ωᵢ sin ωt Yᵢ + Δᵢ Zᵢ) + (J/2) Z₁Z₂ with error offsets.
inline Mat4 hamiltonian(const PhysicalControls& controls, double t, const EnvConfig& cfg) {
  const PhysicalControls pc = with_errors(controls, t, cfg);
  const double c = std::cos(cfg.omega_drive * t);
  const double s = std::sin(cfg.omega_drive * t);
  auto local = [&](double rabi, double det) -> Mat2 {
    return 0.5 * (rabi * c * pauli(Pauli::X) + rabi * s * pauli(Pauli::Y) + det * pauli(Pauli::Z));
  };
  const Mat2 id = Mat2::Identity();
  return kron(local(pc.omega1, pc.delta1), id) + kron(id, local(pc.omega2, pc.delta2)) +
         (pc.j / 2.0) * pauli2(Pauli::Z, Pauli::Z);
}

inline Mat4 build_hamiltonian(const Action& a, double t, const EnvConfig& cfg) {
  return hamiltonian(to_physical(a, t, cfg), t, cfg);
}

/// Switch times for the geometric kind from the slot durations of a
/// β sequence, scaled so the three phases fill total_time.
inline std::pair<double, double> switch_times(const geometric::CompositeTiming& timing,
                                              double total_time) {
  const double sum = timing.total();
  if (!(sum > 0.0) || !std::isfinite(sum) || timing.before <= 0.0 || timing.entangler <= 0.0 ||
      timing.after <= 0.0 || !(total_time > 0.0)) {
    throw ConfigError("geometric phase schedule: inconsistent phase durations");
  }
  const double scale = total_time / sum;
  return {timing.before * scale, (timing.before + timing.entangler) * scale};
}

inline std::pair<double, double> geometric_phase_schedule(const EnvConfig& cfg) {
  if (cfg.kind != HamiltonianKind::Geometric) {
    throw ConfigError("geometric phase schedule requires hamiltonian_kind = geometric");
  }
  return switch_times(geometric::composite_timing(geometric::reference_beta_sequence()),
                      cfg.total_time);
}

/// 16 real parts, 16 imaginary parts (row-major), last action, i/N_max.
inline Observation encode_observation(const Mat4& u, const Action& last, int step, int n_max) {
  Observation obs{};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      obs[static_cast<std::size_t>(4 * r + c)] = u(r, c).real();
      obs[static_cast<std::size_t>(16 + 4 * r + c)] = u(r, c).imag();
    }
  }
  for (int k = 0; k < kActionDim; ++k) obs[static_cast<std::size_t>(32 + k)] = last[static_cast<std::size_t>(k)];
  obs[37] = static_cast<double>(step) / static_cast<double>(n_max);
  return obs;
}

inline Mat4 decode_propagator(const Observation& obs) {
  Mat4 u;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      u(r, c) = Complex(obs[static_cast<std::size_t>(4 * r + c)],
                        obs[static_cast<std::size_t>(16 + 4 * r + c)]);
    }
  }
  return u;
}

/// −log₁₀(1 − F) plus the band bonus (+step_bonus in [band_lo, threshold),
/// +terminal_bonus at or above threshold) minus λ Σγ². In terminal mode the
/// reward is zero except on the terminal step.
inline double reward(double fidelity, const EnvConfig& cfg, bool is_terminal_step,
                     std::span<const double> dynamical_phases = {}) {
  if (cfg.reward_mode == RewardMode::Terminal && !is_terminal_step) return 0.0;
  const double f = std::min(fidelity, kFidelityCap);
  double r = -std::log10(1.0 - f);
  if (fidelity >= cfg.fidelity_threshold) {
    r += cfg.terminal_bonus;
  } else if (fidelity >= cfg.band_lo) {
    r += cfg.step_bonus;
  }
  if (cfg.phase_penalty_lambda > 0.0) {
    double sq = 0.0;
    for (double g : dynamical_phases) sq += g * g;
    r -= cfg.phase_penalty_lambda * sq;
  }
  return r;
}

struct DynamicalPhaseEntry {
  GeometricPhase segment;
  std::string label;  // e.g. "q1+", "block-:-"
  double value = 0.0;
};

struct DynamicalPhaseReport {
  std::vector<DynamicalPhaseEntry> phases;
  long singular_samples = 0;  // samples skipped because the invariant vanished
};

/// Dynamical phase of every invariant eigenstate along a geometric-kind
/// control history, segment by segment. Controls are held over each step
/// and the integrand uses the continuous drive phase ωt, midpoint rule with
/// `substeps` points per step.
inline DynamicalPhaseReport segment_dynamical_phases(std::span<const PhysicalControls> history,
                                                     const EnvConfig& cfg, int substeps = 100) {
  using geometric::Branch;
  using geometric::TwoLevelDrive;
  if (cfg.kind != HamiltonianKind::Geometric) {
    throw ConfigError("dynamical phases are defined for hamiltonian_kind = geometric only");
  }
  DynamicalPhaseReport report;
  const GeometricPhase segments[] = {GeometricPhase::LocalBefore, GeometricPhase::Entangling,
                                     GeometricPhase::LocalAfter};
  const Branch branches[] = {Branch::Upper, Branch::Lower};
  const char* local_labels[] = {"q1", "q2"};
  const char* block_labels[] = {"block+", "block-"};
  std::array<std::array<double, 4>, 3> acc{};
  const double dt = cfg.dt();
  const double h = dt / substeps;
  for (std::size_t k = 0; k < history.size(); ++k) {
    const double t0 = static_cast<double>(k) * dt;
    const auto seg = phase_at(t0, cfg);
    const auto si = static_cast<std::size_t>(seg);
    const PhysicalControls pc = with_errors(history[k], t0, cfg);
    std::array<TwoLevelDrive, 2> drives;
    if (seg == GeometricPhase::Entangling) {
      drives = {TwoLevelDrive{pc.omega2, pc.delta2 + pc.j, cfg.omega_drive},
                TwoLevelDrive{pc.omega2, pc.delta2 - pc.j, cfg.omega_drive}};
    } else {
      drives = {TwoLevelDrive{pc.omega1, pc.delta1, cfg.omega_drive},
                TwoLevelDrive{pc.omega2, pc.delta2, cfg.omega_drive}};
    }
    for (int sub = 0; sub < substeps; ++sub) {
      const double t = t0 + (sub + 0.5) * h;
      for (std::size_t d = 0; d < 2; ++d) {
        if (drives[d].Omega == 0.0 && drives[d].Delta == 0.0) continue;
        for (std::size_t b = 0; b < 2; ++b) {
          try {
            const auto st = geometric::invariant_eigenstate(drives[d], branches[b], t);
            acc[si][2 * d + b] -= geometric::drive_expectation(drives[d], st.state, t) * h;
          } catch (const geometric::SingularConfiguration&) {
            ++report.singular_samples;
          }
        }
      }
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    const auto seg = segments[s];
    const char** names = seg == GeometricPhase::Entangling ? block_labels : local_labels;
    for (std::size_t d = 0; d < 2; ++d) {
      for (std::size_t b = 0; b < 2; ++b) {
        report.phases.push_back({seg, std::string(names[d]) + (b == 0 ? ":+" : ":-"),
                                 acc[s][2 * d + b]});
      }
    }
  }
  return report;
}

struct EnvState {
  Mat4 U = Mat4::Identity();
  int step = 0;
  Action last_action{};
  std::vector<PhysicalControls> history;
  bool done = false;
  double fidelity = 0.0;
};

struct StepOutcome {
  Observation observation{};
  double reward = 0.0;
  bool done = false;
  double fidelity = 0.0;
};

/// Propagator update U ← exp(−i H(t) δT) U with H held at its value at t.
inline Mat4 advance(const Mat4& u, const PhysicalControls& pc, double t, const EnvConfig& cfg) {
  return expm_hermitian(hamiltonian(pc, t, cfg), cfg.dt()) * u;
}

class ControlEnv {
 public:
  explicit ControlEnv(EnvConfig cfg) : cfg_(std::move(cfg)), target_(ryy_target()) {
    cfg_.validate();
    reset();
  }

  const EnvConfig& config() const { return cfg_; }
  const EnvState& state() const { return state_; }

  /// U = I, step 0, last action zero. The seed is recorded only; the
  /// dynamics are deterministic.
  Observation reset(std::uint64_t seed = 0) {
    seed_ = seed;
    state_ = EnvState{};
    state_.history.reserve(static_cast<std::size_t>(cfg_.n_max));
    state_.fidelity = gate_fidelity(state_.U, target_);
    return observation();
  }

  Observation observation() const {
    return encode_observation(state_.U, state_.last_action, state_.step, cfg_.n_max);
  }

  StepOutcome step(const Action& action) {
    const Action a = clamp_action(action);
    const double t = state_.step * cfg_.dt();
    return step_controls(to_physical(a, t, cfg_), a);
  }

  /// Steps with physical values directly; `recorded` is what the
  /// observation reports as the last action.
  StepOutcome step_controls(const PhysicalControls& pc, const Action& recorded) {
    if (state_.done) throw std::logic_error("ControlEnv::step called on a finished episode");
    const double t = state_.step * cfg_.dt();
    state_.U = advance(state_.U, pc, t, cfg_);
#ifdef QGRL_CHECK_UNITARITY
    if (!is_unitary(state_.U, 1e-8)) throw std::runtime_error("propagator lost unitarity");
#endif
    state_.history.push_back(pc);
    state_.last_action = recorded;
    ++state_.step;
    state_.fidelity = gate_fidelity(state_.U, target_);

    const bool horizon = state_.step >= cfg_.n_max;
    const bool reached = cfg_.reward_mode == RewardMode::PerStep &&
                         state_.fidelity >= cfg_.fidelity_threshold;
    state_.done = horizon || reached;

    StepOutcome out;
    out.fidelity = state_.fidelity;
    out.done = state_.done;
    if (cfg_.phase_penalty_lambda > 0.0 && state_.done) {
      const auto rep = segment_dynamical_phases(state_.history, cfg_);
      std::vector<double> g;
      for (const auto& e : rep.phases) g.push_back(e.value);
      out.reward = reward(state_.fidelity, cfg_, state_.done, g);
    } else {
      out.reward = reward(state_.fidelity, cfg_, state_.done);
    }
    out.observation = observation();
    return out;
  }

  std::uint64_t seed() const { return seed_; }

 private:
  EnvConfig cfg_;
  Mat4 target_;
  EnvState state_;
  std::uint64_t seed_ = 0;
};

}  // namespace qgrl::env
