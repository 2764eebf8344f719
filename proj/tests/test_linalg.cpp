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

#include "qgrl/linalg.hpp"

#include <gtest/gtest.h>

#include <random>

namespace qgrl {
namespace {

Mat4 random_hermitian(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat4 a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = Complex(n(rng), n(rng));
  return 0.5 * (a + a.adjoint());
}

ComplexMatrix random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix a(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) a(i, j) = Complex(n(rng), n(rng));
  return a;
}

// Σ_{k≤order} (−i h dt)^k / k!
Mat4 taylor_expm(const Mat4& h, double dt, int order) {
  Mat4 term = Mat4::Identity();
  Mat4 sum = term;
  for (int k = 1; k <= order; ++k) {
    term = term * (-kI * dt * h) / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

TEST(Kron, PauliZZIsDiagonal) {
  const Mat4 zz = kron(pauli(Pauli::Z), pauli(Pauli::Z));
  Mat4 expected = Mat4::Zero();
  expected.diagonal() << 1, -1, -1, 1;
  EXPECT_EQ(zz, expected);
}

TEST(Kron, IdentityFactors) {
  EXPECT_EQ(kron(Mat2::Identity(), Mat2::Identity()), Mat4::Identity());
}

TEST(Kron, LocalFactorsMultiplyEntrywise) {
  const Mat2 x = pauli(Pauli::X), id = Mat2::Identity();
  const Mat4 a = kron(x, id), b = kron(id, x);
  Mat4 prod = Mat4::Zero();
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) prod(i, j) += a(i, k) * b(k, j);
  EXPECT_EQ(prod, kron(x, x));
}

TEST(Kron, MatchesIndexFormulaAndIsAssociative) {
  std::mt19937_64 rng(3);
  const ComplexMatrix a = random_matrix(rng, 2, 3), b = random_matrix(rng, 3, 2), c = random_matrix(rng, 2, 2);
  const ComplexMatrix ab = kron(a, b);
  ASSERT_EQ(ab.rows(), 6);
  ASSERT_EQ(ab.cols(), 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_EQ(ab(i, j), a(i / 3, j / 2) * b(i % 3, j % 2));
  EXPECT_LT((kron(ComplexMatrix(kron(a, b)), c) - kron(a, ComplexMatrix(kron(b, c)))).norm(), 1e-13);
}

TEST(Pauli, Algebra) {
  const Mat2 x = pauli(Pauli::X), y = pauli(Pauli::Y), z = pauli(Pauli::Z);
  EXPECT_LT((x * y - kI * z).norm(), 1e-15);
  EXPECT_LT((y * z - kI * x).norm(), 1e-15);
  for (auto p : kPaulis) EXPECT_LT((pauli(p) * pauli(p) - Mat2::Identity()).norm(), 1e-15);
}

TEST(Expm, ZeroGeneratorGivesIdentity) {
  EXPECT_LT((expm_hermitian(Mat4::Zero().eval(), 0.9) - Mat4::Identity()).norm(), 1e-15);
}

TEST(Expm, ZOverPiIsMinusIdentity) {
  const Mat2 u = expm_hermitian(pauli(Pauli::Z), kPi);
  EXPECT_LT((u + Mat2::Identity()).norm(), 1e-15);
}

TEST(Expm, MatchesTaylorSeriesOnRandomHermitian) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat4 h = random_hermitian(rng);
    const Mat4 u = expm_hermitian(h, 0.37);
    EXPECT_TRUE(is_unitary(u, 1e-10));
    // ‖0.37 h‖ ≲ 1.5, so the order-30 remainder is far below 1e-12.
    EXPECT_LT((u - taylor_expm(h, 0.37, 30)).norm(), 1e-9);
    EXPECT_LT((u - taylor_expm(h, 0.37, 12)).norm(), 1e-5);
  }
}

TEST(Expm, SemigroupInTime) {
  std::mt19937_64 rng(12);
  const Mat4 h = random_hermitian(rng, 2.0);
  EXPECT_LT((expm_hermitian(h, 0.8) - expm_hermitian(h, 0.3) * expm_hermitian(h, 0.5)).norm(), 1e-10);
}

TEST(Expm, RejectsNonHermitianWithDefect) {
  Mat2 h = pauli(Pauli::X);
  h(0, 1) = Complex(1.0, 0.5);
  try {
    expm_hermitian(h, 1.0);
    FAIL() << "expected LinalgError";
  } catch (const LinalgError& e) {
    EXPECT_NE(std::string(e.what()).find("|h - h^dagger|_F = 0.707107"), std::string::npos) << e.what();
  }
}

TEST(Fidelity, SelfIsOne) {
  std::mt19937_64 rng(5);
  const Mat4 u = expm_hermitian(random_hermitian(rng), 1.0);
  EXPECT_NEAR(gate_fidelity(u, u), 1.0, 1e-14);
}

TEST(Fidelity, IdentityAgainstTargetIsHalf) {
  EXPECT_NEAR(gate_fidelity(Mat4::Identity().eval(), ryy_target()), 0.5, 1e-15);
  EXPECT_NEAR(std::abs(ryy_target().trace()), 2.0 * std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(std::abs(ryy_target(+1).trace()), 2.0 * std::sqrt(2.0), 1e-15);
}

TEST(Fidelity, GlobalPhaseInvariant) {
  std::mt19937_64 rng(6);
  const Mat4 u = expm_hermitian(random_hermitian(rng), 1.0);
  const Mat4 v = std::exp(kI * 0.7) * u;
  EXPECT_NEAR(gate_fidelity(v, u), 1.0, 1e-14);
  EXPECT_NEAR(gate_fidelity(u, v), 1.0, 1e-14);
}

TEST(Fidelity, BoundedAndDimensionChecked) {
  std::mt19937_64 rng(7);
  for (int k = 0; k < 100; ++k) {
    const double f = gate_fidelity(expm_hermitian(random_hermitian(rng), 1.0), ryy_target());
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
  EXPECT_THROW(gate_fidelity(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(4, 4)), LinalgError);
}

TEST(Fidelity, TargetIsExpOfYY) {
  const Mat4 h = (kPi / 4.0) * pauli2(Pauli::Y, Pauli::Y);
  EXPECT_LT((expm_hermitian(h, 1.0) - ryy_target(-1)).norm(), 1e-14);
  EXPECT_LT((expm_hermitian(h, -1.0) - ryy_target(+1)).norm(), 1e-14);
}

TEST(Frobenius, Examples) {
  const Mat4 id = Mat4::Identity();
  EXPECT_EQ(frobenius_distance(id, id), 0.0);
  EXPECT_NEAR(frobenius_distance(id, (-id).eval()), 4.0, 1e-15);
  EXPECT_THROW(frobenius_distance(ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(4, 4)), LinalgError);
}

TEST(Frobenius, MatchesElementwiseSum) {
  std::mt19937_64 rng(8);
  const ComplexMatrix a = random_matrix(rng, 4, 4), b = random_matrix(rng, 4, 4);
  double sum = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) sum += std::norm(a(i, j) - b(i, j));
  EXPECT_NEAR(frobenius_distance(a, b), std::sqrt(sum), 1e-12);
}

TEST(Frobenius, PhaseAlignedRemovesGlobalPhase) {
  std::mt19937_64 rng(9);
  const Mat4 u = expm_hermitian(random_hermitian(rng), 1.0);
  EXPECT_LT(phase_aligned_distance(u, (std::exp(kI * 2.1) * u).eval()), 1e-13);
}

TEST(SingularValues, Examples) {
  const auto s = singular_values(Mat4::Identity().eval());
  ASSERT_EQ(s.size(), 4u);
  for (double v : s) EXPECT_NEAR(v, 1.0, 1e-15);
  Eigen::Matrix2d d = Eigen::Matrix2d::Zero();
  d(0, 0) = 0.0;
  d(1, 1) = 3.0;
  const auto t = singular_values(d);
  EXPECT_NEAR(t[0], 3.0, 1e-15);
  EXPECT_NEAR(t[1], 0.0, 1e-15);
}

TEST(SingularValues, AgreeWithGramEigenvalues) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const ComplexMatrix m = random_matrix(rng, 4, 4);
    const auto s = singular_values(m);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(m.adjoint() * m);
    std::vector<double> oracle;
    for (int k = 3; k >= 0; --k) oracle.push_back(std::sqrt(std::max(0.0, es.eigenvalues()(k))));
    double sq = 0.0;
    for (int k = 0; k < 4; ++k) {
      EXPECT_NEAR(s[k], oracle[k], 1e-10);
      if (k) {
        EXPECT_GE(s[k - 1], s[k]);
      }
      sq += s[k] * s[k];
    }
    EXPECT_NEAR(sq, m.squaredNorm(), 1e-10);
  }
}

TEST(SingularValues, Rectangular) {
  std::mt19937_64 rng(13);
  const ComplexMatrix m = random_matrix(rng, 3, 5);
  const auto s = singular_values(m);
  ASSERT_EQ(s.size(), 3u);
  double sq = 0.0;
  for (double v : s) sq += v * v;
  EXPECT_NEAR(sq, m.squaredNorm(), 1e-10);
}

}  // namespace
}  // namespace qgrl
