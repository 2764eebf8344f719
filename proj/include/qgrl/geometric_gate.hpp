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

// Analytic geometric two-qubit gate built from Lewis–Riesenfeld invariants,
// the parameterized single-qubit geometric gates, perfect-entangler
// detection, β-sequence composition and dynamical-phase diagnostics.
//
// Conventions: qubit 1 is the left tensor factor. Block "+" is the subspace
// with qubit 1 in |0⟩ (projector (I+Z)/2), block "−" has qubit 1 in |1⟩.
// A two-level drive is H = ½(Ω cos ωt X + Ω sin ωt Y + Δ Z) with invariant
// I = Ω cos ωt X + Ω sin ωt Y + (Δ − ω) Z.

#pragma once

#include "qgrl/linalg.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgrl::geometric {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The invariant has no eigenbasis (λ = 0: zero Rabi drive at Δ = ω).
class SingularConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GeometricParams {
  double omega = 2.0 * kPi;  // drive angular frequency
  double J = 0.0;            // coupling
  double Delta = kPi;        // detuning
  double Omega = kPi;        // Rabi frequency
  double a_plus = 0.0;
  double a_minus = 0.0;
  double T = 1.0;  // gate time 2π/ω
};

inline void check_coupling(double j_over_omega) {
  if (!(std::abs(j_over_omega) < 0.5)) {
    throw DomainError("coupling ratio J/omega = " + std::to_string(j_over_omega) +
                      " outside the open interval (-1/2, 1/2)");
  }
}

/// Nonadiabatic setting Δ = ω/2, Ω = √(ω² − 4J²)/2 with a± = √(1/2 ± J/ω).
///
/// The printed form a± = √(J/ω ± 1/2) is not unitary for J/ω < 1/2; the
/// choice here satisfies a₊² + a₋² = 1 and a∓ = λ±/ω, and agrees with the
/// time-ordered dynamics (see build_vu_dynamics).
inline GeometricParams nonadiabatic_params(double omega, double j_over_omega) {
  check_coupling(j_over_omega);
  if (!(omega > 0.0)) throw DomainError("drive frequency omega must be positive");
  GeometricParams p;
  p.omega = omega;
  p.J = j_over_omega * omega;
  p.Delta = omega / 2.0;
  p.Omega = std::sqrt(omega * omega - 4.0 * p.J * p.J) / 2.0;
  p.a_plus = std::sqrt(0.5 + j_over_omega);
  p.a_minus = std::sqrt(0.5 - j_over_omega);
  p.T = 2.0 * kPi / omega;
  return p;
}

struct TwoLevelDrive {
  double Omega = 0.0;
  double Delta = 0.0;
  double omega = 0.0;
};

enum class Block { Plus, Minus };
/// Eigenvalue branch of the invariant: Upper has E = +λ, Lower E = −λ.
enum class Branch { Upper, Lower };

inline int sign_of(Block b) { return b == Block::Plus ? 1 : -1; }
inline int sign_of(Branch b) { return b == Branch::Upper ? 1 : -1; }
inline std::size_t index_of(Branch b) { return b == Branch::Upper ? 0 : 1; }

/// Effective two-level drive seen by one block of the coupled Hamiltonian.
inline TwoLevelDrive block_drive(const GeometricParams& p, Block b) {
  return {p.Omega, p.Delta + sign_of(b) * p.J, p.omega};
}

struct InvariantEigenstate {
  double energy = 0.0;
  double lambda = 0.0;
  double cos_theta = 0.0;
  double sin_theta = 0.0;
  double xi = 0.0;        // cot θ; infinite when sin θ = 0
  double lr_phase = 0.0;  // Lewis–Riesenfeld phase accumulated by time t
  Eigen::Vector2cd state;
};

/// Eigenstate (cos θ e^{−iωt}, −sin θ) of the two-level invariant at time t.
///
/// ξ = Ω/(Δ ∓ λ − ω) is evaluated through (cos θ, sin θ) ∝ (Ω, Δ ∓ λ − ω),
/// switching to the equivalent (E + Δ − ω, −Ω) when that vector is shorter,
/// so the state stays finite when the denominator vanishes (Ω = 0). The phase
/// obeys α = (ω − E)t/2, the exact solution of the rotating-frame dynamics.
inline InvariantEigenstate invariant_eigenstate(const TwoLevelDrive& d, Branch branch,
                                                double t) {
  const double detune = d.Delta - d.omega;
  InvariantEigenstate s;
  s.lambda = std::hypot(detune, d.Omega);
  if (s.lambda <= 1e-14 * std::max(1.0, std::abs(d.omega))) {
    throw SingularConfiguration("invariant vanishes (Omega = 0 and Delta = omega)");
  }
  s.energy = sign_of(branch) * s.lambda;
  const double denom = detune - s.energy;
  const double r = std::hypot(d.Omega, denom);
  const double r_alt = std::hypot(s.energy + detune, d.Omega);
  if (r >= r_alt) {
    const double orient = denom < 0.0 ? -1.0 : 1.0;
    s.cos_theta = orient * d.Omega / r;
    s.sin_theta = orient * denom / r;
  } else {
    // Equivalent form (E + Δ − ω, −Ω), finite when Ω = 0 and Δ ∓ λ − ω = 0.
    const double orient = s.energy + detune < 0.0 ? -1.0 : 1.0;
    s.cos_theta = orient * (s.energy + detune) / r_alt;
    s.sin_theta = -orient * d.Omega / r_alt;
  }
  s.xi = denom != 0.0 ? d.Omega / denom : std::numeric_limits<double>::infinity();
  s.lr_phase = (d.omega - s.energy) * t / 2.0;
  s.state << s.cos_theta * std::exp(-kI * d.omega * t), -s.sin_theta;
  return s;
}

struct InvariantEigensystem {
  Block block = Block::Plus;
  double lambda = 0.0;
  std::array<double, 2> energy{};  // indexed by index_of(Branch)
  std::array<double, 2> theta{};
  std::array<double, 2> xi{};
  std::array<double, 2> lr_phase{};
  Eigen::Matrix<Complex, 4, 2> eigenvectors;  // columns: Upper, Lower
};

/// Eigensystem of the block invariant I±(t) embedded in the two-qubit space.
inline InvariantEigensystem invariant_eigensystem(const GeometricParams& p, Block block,
                                                  double t) {
  InvariantEigensystem sys;
  sys.block = block;
  sys.eigenvectors.setZero();
  const TwoLevelDrive d = block_drive(p, block);
  const Eigen::Index offset = block == Block::Plus ? 0 : 2;
  for (Branch br : {Branch::Upper, Branch::Lower}) {
    const auto s = invariant_eigenstate(d, br, t);
    const auto k = index_of(br);
    sys.lambda = s.lambda;
    sys.energy[k] = s.energy;
    sys.theta[k] = std::atan2(s.sin_theta, s.cos_theta);
    sys.xi[k] = s.xi;
    sys.lr_phase[k] = s.lr_phase;
    sys.eigenvectors.col(static_cast<Eigen::Index>(k)).segment<2>(offset) = s.state;
  }
  return sys;
}

/// G_σ± = (I ± Z)/2 ⊗ σ.
inline Mat4 effective_pauli(Block b, Pauli sigma) {
  const Mat2 proj = (pauli(Pauli::I) + sign_of(b) * pauli(Pauli::Z)) / 2.0;
  return kron(proj, pauli(sigma));
}

/// Invariant I±(t) = Ω cos ωt G_x± + Ω sin ωt G_y± + (Δ± − ω) G_z±.
inline Mat4 block_invariant(const GeometricParams& p, Block b, double t) {
  const auto d = block_drive(p, b);
  return d.Omega * std::cos(d.omega * t) * effective_pauli(b, Pauli::X) +
         d.Omega * std::sin(d.omega * t) * effective_pauli(b, Pauli::Y) +
         (d.Delta - d.omega) * effective_pauli(b, Pauli::Z);
}

/// H±(t) = ½(Ω cos ωt G_x± + Ω sin ωt G_y± + Δ± G_z±).
inline Mat4 block_hamiltonian(const GeometricParams& p, Block b, double t) {
  const auto d = block_drive(p, b);
  return 0.5 * (d.Omega * std::cos(d.omega * t) * effective_pauli(b, Pauli::X) +
                d.Omega * std::sin(d.omega * t) * effective_pauli(b, Pauli::Y) +
                d.Delta * effective_pauli(b, Pauli::Z));
}

inline Mat4 coupled_hamiltonian(const GeometricParams& p, double t) {
  return block_hamiltonian(p, Block::Plus, t) + block_hamiltonian(p, Block::Minus, t);
}

/// Closed-form geometric gate V_U at coupling J/ω.
inline Mat4 build_vu_closed(double j_over_omega) {
  check_coupling(j_over_omega);
  const double ap = std::sqrt(0.5 + j_over_omega);
  const double am = std::sqrt(0.5 - j_over_omega);
  Mat4 v = Mat4::Zero();
  auto fill = [&v](Eigen::Index o, double diag_amp, double off_amp) {
    const double c = std::cos(kPi * diag_amp);
    const double s = std::sin(kPi * diag_amp);
    v(o, o) = Complex(-c, -diag_amp * s);
    v(o, o + 1) = Complex(0.0, off_amp * s);
    v(o + 1, o) = Complex(0.0, off_amp * s);
    v(o + 1, o + 1) = Complex(-c, diag_amp * s);
  };
  fill(0, am, ap);
  fill(2, ap, am);
  return v;
}

/// Time-ordered propagator of H+ + H− over one period T = 2π/ω.
///
/// Piecewise-constant steps sampled at each step midpoint, so the defect
/// against the closed form falls as 1/steps².
inline Mat4 build_vu_dynamics(const GeometricParams& p, long steps) {
  if (steps < 1) throw DomainError("build_vu_dynamics: steps must be >= 1");
  const double dt = p.T / static_cast<double>(steps);
  Mat4 u = Mat4::Identity();
  for (long k = 0; k < steps; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt;
    u = expm_hermitian(coupled_hamiltonian(p, t), dt) * u;
  }
  return u;
}

/// D_ij = Tr(v·σ_i⊗σ_j)/4 for i, j ∈ {I, X, Y, Z}.
inline Eigen::Matrix4cd pauli_coefficient_matrix(const Mat4& v) {
  Eigen::Matrix4cd d;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      d(i, j) = (v * pauli2(kPaulis[i], kPaulis[j])).trace() / 4.0;
    }
  }
  return d;
}

/// Descending singular values of D; a perfect entangler of the CNOT class
/// has its two leading values at √(1/2).
inline std::vector<double> entangler_coefficients(const Mat4& v) {
  if (!is_unitary(v, 1e-8)) {
    throw LinalgError("entangler_coefficients: input is not unitary");
  }
  return singular_values(pauli_coefficient_matrix(v));
}

struct CouplingSearch {
  std::optional<double> j_over_omega;  // empty when no root in range
  double deviation = 0.0;              // |D₁ − √(1/2)| at the best point
  double best_j = 0.0;
};

/// Coupling at which the leading entangler coefficient reaches √(1/2).
///
/// The deviation D₁ − √(1/2) is non-negative (D₁² + D₂² = 1 with D₁ ≥ D₂),
/// so the root is a kink-shaped minimum. A uniform scan brackets each local
/// minimum; bisection on the sign of the deviation's slope then refines it.
inline CouplingSearch find_entangler_coupling(double scan_lo, double scan_hi, double tol,
                                              int grid = 256) {
  if (!(scan_lo >= 0.0 && scan_lo < scan_hi && scan_hi < 0.5)) {
    throw DomainError("find_entangler_coupling: require 0 <= lo < hi < 1/2");
  }
  const double target = std::sqrt(0.5);
  auto deviation = [&](double j) { return entangler_coefficients(build_vu_closed(j))[0] - target; };

  std::vector<double> xs(static_cast<std::size_t>(grid) + 1);
  std::vector<double> gs(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    xs[k] = scan_lo + (scan_hi - scan_lo) * static_cast<double>(k) / grid;
    gs[k] = deviation(xs[k]);
  }

  CouplingSearch out;
  out.deviation = std::numeric_limits<double>::infinity();
  auto consider = [&](double j) {
    const double g = std::abs(deviation(j));
    if (g < out.deviation) {
      out.deviation = g;
      out.best_j = j;
    }
  };
  for (std::size_t k = 0; k < xs.size(); ++k) {
    const bool left_ok = k == 0 || gs[k] <= gs[k - 1];
    const bool right_ok = k + 1 == xs.size() || gs[k] <= gs[k + 1];
    if (!(left_ok && right_ok)) continue;
    double lo = xs[k == 0 ? 0 : k - 1];
    double hi = xs[k + 1 == xs.size() ? k : k + 1];
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double h = std::max(1e-13, 1e-3 * (hi - lo));
      const double slope = deviation(std::min(mid + h, scan_hi)) - deviation(std::max(mid - h, scan_lo));
      (slope > 0.0 ? hi : lo) = mid;
    }
    consider(0.5 * (lo + hi));
  }
  if (out.deviation <= tol) out.j_over_omega = out.best_j;
  return out;
}

/// U(β) = −exp[iπ sinβ (−cosβ X + sinβ Z)].
inline Mat2 single_qubit_gate(double beta) {
  const double phi = kPi * std::sin(beta);
  const Mat2 axis = -std::cos(beta) * pauli(Pauli::X) + std::sin(beta) * pauli(Pauli::Z);
  return -(std::cos(phi) * Mat2::Identity() + kI * std::sin(phi) * axis);
}

/// β angles for the four local slots around V_U, each listed in matrix
/// product order (the rightmost factor acts first).
struct BetaSequence {
  std::array<std::vector<double>, 4> slots;
  double delta_ref = kPi;  // reference detuning: ω_j = Δ_ref / cos²β_j

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& s : slots) n += s.size();
    return n;
  }
  double& at(std::size_t flat) {
    for (auto& s : slots) {
      if (flat < s.size()) return s[flat];
      flat -= s.size();
    }
    throw std::out_of_range("BetaSequence::at");
  }
  bool operator==(const BetaSequence&) const = default;
};

/// Reference local-gate sequence for R_YY(π/4) at J/ω = 0.3187.
inline BetaSequence reference_beta_sequence() {
  BetaSequence s;
  s.slots[0] = {0.13, 0.91, 0.29, 0.52};
  s.slots[1] = {0.46, 0.31, 0.90, 0.3, 0.69, 0.23, 0.48};
  s.slots[2] = {0.24, 0.56, 0.29, 0.24, 0.81, 0.29, 0.81};
  s.slots[3] = {1.11, 0.27, 0.90, 0.16, 0.62};
  return s;
}

inline constexpr double kEntanglerCoupling = 0.3187;

enum class FactorOrder { AsWritten, Reversed };

inline Mat2 slot_unitary(const std::vector<double>& betas,
                         FactorOrder order = FactorOrder::AsWritten) {
  Mat2 m = Mat2::Identity();
  if (order == FactorOrder::AsWritten) {
    for (double b : betas) m = m * single_qubit_gate(b);
  } else {
    for (auto it = betas.rbegin(); it != betas.rend(); ++it) m = m * single_qubit_gate(*it);
  }
  return m;
}

/// (U₍₃₎ ⊗ U₍₄₎) V_U (U₍₁₎ ⊗ U₍₂₎).
inline Mat4 compose_ryy(const BetaSequence& seq, double j_over_omega,
                        FactorOrder order = FactorOrder::AsWritten) {
  const Mat4 before = kron(slot_unitary(seq.slots[0], order), slot_unitary(seq.slots[1], order));
  const Mat4 after = kron(slot_unitary(seq.slots[2], order), slot_unitary(seq.slots[3], order));
  return after * build_vu_closed(j_over_omega) * before;
}

/// Σ_j 2π/ω_j with ω_j = Δ_ref / cos²β_j.
inline double slot_duration(const std::vector<double>& betas, double delta_ref) {
  double total = 0.0;
  for (double b : betas) {
    const double c2 = std::cos(b) * std::cos(b);
    if (!(c2 > 0.0)) throw DomainError("beta with cos^2(beta) = 0 has no finite duration");
    total += 2.0 * kPi * c2 / delta_ref;
  }
  return total;
}

struct CompositeTiming {
  double before = 0.0;     // max(T₁, T₂)
  double entangler = 0.0;  // T(V_U)
  double after = 0.0;      // max(T₃, T₄)
  double total() const { return before + entangler + after; }
};

inline CompositeTiming composite_timing(const BetaSequence& seq, double vu_omega = 2.0 * kPi) {
  CompositeTiming t;
  t.before = std::max(slot_duration(seq.slots[0], seq.delta_ref),
                      slot_duration(seq.slots[1], seq.delta_ref));
  t.entangler = 2.0 * kPi / vu_omega;
  t.after = std::max(slot_duration(seq.slots[2], seq.delta_ref),
                     slot_duration(seq.slots[3], seq.delta_ref));
  return t;
}

struct BetaOptimizeOptions {
  int max_iterations = 2000;
  double initial_step = 0.05;
  double min_step = 1e-7;
};

struct BetaOptimizeResult {
  BetaSequence sequence;
  double initial_objective = 0.0;
  double final_objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each accepted move
};

/// Derivative-free coordinate descent on ‖compose_ryy(seq) − target‖_F with
/// a shrinking step; a move is accepted only if it lowers the objective.
inline BetaOptimizeResult optimize_beta(const Mat4& target, const BetaSequence& init,
                                        double j_over_omega,
                                        const BetaOptimizeOptions& opt = {}) {
  BetaOptimizeResult res;
  res.sequence = init;
  auto objective = [&](const BetaSequence& s) {
    return frobenius_distance(compose_ryy(s, j_over_omega), target);
  };
  double best = objective(init);
  res.initial_objective = best;
  double step = opt.initial_step;
  const std::size_t n = init.size();
  while (res.iterations < opt.max_iterations && best > 0.0) {
    ++res.iterations;
    bool improved = false;
    for (std::size_t k = 0; k < n; ++k) {
      for (double dir : {1.0, -1.0}) {
        BetaSequence trial = res.sequence;
        trial.at(k) += dir * step;
        const double c = std::cos(trial.at(k));
        if (!(c * c > 0.0)) continue;
        const double f = objective(trial);
        if (f < best) {
          best = f;
          res.sequence = std::move(trial);
          res.history.push_back(best);
          improved = true;
          break;
        }
      }
    }
    if (!improved) {
      step *= 0.5;
      if (step < opt.min_step) {
        res.converged = true;
        break;
      }
    }
  }
  if (best == 0.0) res.converged = true;
  res.final_objective = best;
  return res;
}

using DriveSchedule = std::function<TwoLevelDrive(double)>;
using CoupledSchedule = std::function<GeometricParams(double)>;

inline double drive_expectation(const TwoLevelDrive& d, const Eigen::Vector2cd& phi, double t) {
  Mat2 h = 0.5 * (d.Omega * std::cos(d.omega * t) * pauli(Pauli::X) +
                  d.Omega * std::sin(d.omega * t) * pauli(Pauli::Y) + d.Delta * pauli(Pauli::Z));
  return (phi.adjoint() * h * phi)(0, 0).real();
}

/// γ_d = −∫₀ᵀ ⟨φ(t)|H(t)|φ(t)⟩ dt for one invariant eigenstate of a two-level
/// drive, composite midpoint rule.
inline double dynamical_phase(const DriveSchedule& schedule, Branch branch, double T,
                              long steps = 10000) {
  if (steps < 1) throw DomainError("dynamical_phase: steps must be >= 1");
  const double dt = T / static_cast<double>(steps);
  double acc = 0.0;
  for (long k = 0; k < steps; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt;
    const TwoLevelDrive d = schedule(t);
    if (d.Omega == 0.0 && d.Delta == 0.0) continue;  // H(t) = 0
    acc += drive_expectation(d, invariant_eigenstate(d, branch, t).state, t);
  }
  return -acc * dt;
}

/// Two-qubit form: γ_d of eigenstate φ^block_branch of I± under H+ + H−.
inline double dynamical_phase(const CoupledSchedule& schedule, Block block, Branch branch,
                              double T, long steps = 10000) {
  if (steps < 1) throw DomainError("dynamical_phase: steps must be >= 1");
  const double dt = T / static_cast<double>(steps);
  double acc = 0.0;
  const auto col = static_cast<Eigen::Index>(index_of(branch));
  for (long k = 0; k < steps; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * dt;
    const GeometricParams p = schedule(t);
    const Mat4 h = coupled_hamiltonian(p, t);
    if (h.isZero(0.0)) continue;
    const Eigen::Vector4cd phi = invariant_eigensystem(p, block, t).eigenvectors.col(col);
    acc += (phi.adjoint() * h * phi)(0, 0).real();
  }
  return -acc * dt;
}

}  // namespace qgrl::geometric
