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

// Small dense complex linear algebra for two-qubit control: Pauli algebra,
// Kronecker products, Hermitian exponentials, gate fidelity, norms.
//
// Everything here is a pure function of its arguments. Fixed-size Eigen types
// (Mat2/Mat4) are used on hot paths; ComplexMatrix is the dynamic carrier.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgrl {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

class LinalgError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Pauli { I, X, Y, Z };

inline Mat2 pauli(Pauli p) {
  Mat2 m;
  switch (p) {
    case Pauli::I: m << 1, 0, 0, 1; break;
    case Pauli::X: m << 0, 1, 1, 0; break;
    case Pauli::Y: m << 0, -kI, kI, 0; break;
    case Pauli::Z: m << 1, 0, 0, -1; break;
  }
  return m;
}

inline constexpr Pauli kPaulis[4] = {Pauli::I, Pauli::X, Pauli::Y, Pauli::Z};

namespace detail {
constexpr int kron_dim(int a, int b) {
  return (a == Eigen::Dynamic || b == Eigen::Dynamic) ? Eigen::Dynamic : a * b;
}
}  // namespace detail

/// Kronecker product a ⊗ b. Fixed-size inputs give a fixed-size result.
template <typename A, typename B>
auto kron(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Result =
      Eigen::Matrix<Complex, detail::kron_dim(A::RowsAtCompileTime, B::RowsAtCompileTime),
                    detail::kron_dim(A::ColsAtCompileTime, B::ColsAtCompileTime)>;
  Result out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) =
          Complex(a(i, j)) * b.template cast<Complex>();
    }
  }
  return out;
}

/// Pauli string σ_a ⊗ σ_b on two qubits; qubit 1 is the left factor.
inline Mat4 pauli2(Pauli a, Pauli b) { return kron(pauli(a), pauli(b)); }

template <typename M>
double hermiticity_defect(const Eigen::MatrixBase<M>& h) {
  return (h - h.adjoint()).norm();
}

template <typename M>
bool is_unitary(const Eigen::MatrixBase<M>& u, double tol = 1e-10) {
  if (u.rows() != u.cols()) return false;
  using Plain = typename M::PlainObject;
  return (u.adjoint() * u - Plain::Identity(u.rows(), u.cols())).norm() <= tol;
}

/// exp(−i·h·dt) for Hermitian h, through its eigendecomposition.
///
/// Rejects inputs whose anti-Hermitian part exceeds 1e−12 (relative to
/// max(1, ‖h‖_F)); the error message carries ‖h − h†‖_F.
template <typename M>
typename M::PlainObject expm_hermitian(const Eigen::MatrixBase<M>& h, double dt) {
  if (h.rows() != h.cols()) throw LinalgError("expm_hermitian: matrix is not square");
  const double defect = hermiticity_defect(h);
  if (defect > 1e-12 * std::max(1.0, h.norm())) {
    std::ostringstream os;
    os << "expm_hermitian: input is not Hermitian, |h - h^dagger|_F = " << defect;
    throw LinalgError(os.str());
  }
  using Plain = typename M::PlainObject;
  Eigen::SelfAdjointEigenSolver<Plain> es(h.eval());
  const auto& v = es.eigenvectors();
  Plain phased = v;
  for (Eigen::Index k = 0; k < v.cols(); ++k) {
    phased.col(k) *= std::exp(-kI * es.eigenvalues()(k) * dt);
  }
  return phased * v.adjoint();
}

/// F = |Tr(target†·u)/d|², clamped into [0, 1].
template <typename A, typename B>
double gate_fidelity(const Eigen::MatrixBase<A>& u, const Eigen::MatrixBase<B>& target) {
  if (u.rows() != u.cols() || target.rows() != target.cols() || u.rows() != target.rows()) {
    std::ostringstream os;
    os << "gate_fidelity: dimension mismatch " << u.rows() << "x" << u.cols() << " vs "
       << target.rows() << "x" << target.cols();
    throw LinalgError(os.str());
  }
  const Complex tr = (target.adjoint() * u).trace() / static_cast<double>(u.rows());
  return std::clamp(std::norm(tr), 0.0, 1.0);
}

template <typename A, typename B>
double frobenius_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << "frobenius_distance: shape mismatch " << a.rows() << "x" << a.cols() << " vs "
       << b.rows() << "x" << b.cols();
    throw LinalgError(os.str());
  }
  return (a - b).norm();
}

/// min over φ of ‖a − e^{iφ}b‖_F; the optimum is φ = arg Tr(b†a).
template <typename A, typename B>
double phase_aligned_distance(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  const Complex overlap = (b.adjoint() * a).trace();
  const Complex phase = std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : Complex(1.0);
  return frobenius_distance(a, (phase * b).eval());
}

/// Singular values, sorted descending.
template <typename M>
std::vector<double> singular_values(const Eigen::MatrixBase<M>& m) {
  Eigen::JacobiSVD<ComplexMatrix> svd(m.template cast<Complex>().eval());
  const auto& s = svd.singularValues();
  std::vector<double> out(s.data(), s.data() + s.size());
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

/// exp(sign·iπ Y⊗Y/4). The default sign −1 is the R_YY(π/4) control target.
inline Mat4 ryy_target(int sign = -1) {
  const double c = std::cos(kPi / 4.0);
  return c * Mat4::Identity() + Complex(0.0, sign * c) * pauli2(Pauli::Y, Pauli::Y);
}

}  // namespace qgrl
