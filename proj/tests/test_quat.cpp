#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "qma/quat_matrix.hpp"
#include "qma/quaternion.hpp"

using qma::HyperhermitianMatrix;
using qma::Quaternion;
using qma::QuatMatrix;

namespace {

Eigen::MatrixXcd embed_dense(const QuatMatrix& A) {
  const auto flat = qma::complex_embed(A);
  const int m = 2 * A.size();
  Eigen::MatrixXcd M(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) M(r, c) = flat[static_cast<std::size_t>(r) * m + c];
  return M;
}

Quaternion random_quat(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Quaternion(u(rng), u(rng), u(rng), u(rng));
}

QuatMatrix random_matrix(int n, std::mt19937_64& rng) {
  QuatMatrix A(n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) A.at(r, c) = random_quat(rng);
  return A;
}

QuatMatrix conj_transpose(const QuatMatrix& A) {
  QuatMatrix B(A.size());
  for (int r = 0; r < A.size(); ++r)
    for (int c = 0; c < A.size(); ++c) B.at(r, c) = A.at(c, r).conj();
  return B;
}

/// Random positive definite hyperhermitian matrix: C C^* plus a small shift.
HyperhermitianMatrix random_posdef(int n, std::mt19937_64& rng) {
  const QuatMatrix C = random_matrix(n, rng);
  QuatMatrix G = C * conj_transpose(C);
  for (int i = 0; i < n; ++i) G.at(i, i) += Quaternion(0.25);
  return HyperhermitianMatrix(G, 1e-9);
}

} // namespace

TEST_CASE("multiplication table") {
  const Quaternion i = Quaternion::unit(1), j = Quaternion::unit(2), k = Quaternion::unit(3);
  CHECK(qma::abs_diff(i * j, k) == 0.0);
  CHECK(qma::abs_diff(j * k, Quaternion::unit(1)) == 0.0);
  CHECK(qma::abs_diff((i * j) * k, Quaternion(-1.0)) == 0.0);

  const Quaternion q(1, 1, 1, 1);
  CHECK(qma::abs_diff(q * q.conj(), Quaternion(4.0)) == 0.0);

  const Quaternion a(1, 1, 0, 0), b(1, 0, 1, 0);
  CHECK(qma::abs_diff(a * b, Quaternion(1, 1, 1, 1)) == 0.0);
}

TEST_CASE("associativity and norm multiplicativity") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const Quaternion p = random_quat(rng), q = random_quat(rng), r = random_quat(rng);
    CHECK(qma::abs_diff((p * q) * r, p * (q * r)) < 1e-12);
    CHECK(std::abs((p * q).norm() - p.norm() * q.norm()) < 1e-12);
  }
}

TEST_CASE("complex embedding basics") {
  QuatMatrix one(1);
  one.at(0, 0) = Quaternion(1.0);
  Eigen::MatrixXcd M = embed_dense(one);
  CHECK(M(0, 0) == std::complex<double>(1, 0));
  CHECK(M(1, 1) == std::complex<double>(1, 0));
  CHECK(M(0, 1) == std::complex<double>(0, 0));

  QuatMatrix jm(1);
  jm.at(0, 0) = Quaternion::unit(2);
  M = embed_dense(jm);
  CHECK(M(0, 1) == std::complex<double>(1, 0));
  CHECK(M(1, 0) == std::complex<double>(-1, 0));
}

TEST_CASE("complex embedding is an algebra homomorphism") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const QuatMatrix A = random_matrix(2, rng), B = random_matrix(2, rng);
    const Eigen::MatrixXcd lhs = embed_dense(A * B);
    const Eigen::MatrixXcd rhs = embed_dense(A) * embed_dense(B);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("moore determinant of diagonal matrices") {
  QuatMatrix id = QuatMatrix::identity(3);
  CHECK(qma::moore_det(HyperhermitianMatrix(id)) == Catch::Approx(1.0).margin(1e-14));

  QuatMatrix d(2);
  d.at(0, 0) = Quaternion(2.5);
  d.at(1, 1) = Quaternion(-0.5);
  CHECK(qma::moore_det(HyperhermitianMatrix(d)) == Catch::Approx(-1.25).margin(1e-14));
}

TEST_CASE("moore determinant squares to the embedded determinant") {
  std::mt19937_64 rng(13);
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 25; ++trial) {
      const HyperhermitianMatrix A = random_posdef(n, rng);
      const double md = qma::moore_det(A);
      const Eigen::MatrixXcd chi = embed_dense(A.matrix());
      // positive definiteness certified through the embedding
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(chi, Eigen::EigenvaluesOnly);
      REQUIRE(eig.eigenvalues().minCoeff() > 0.0);
      CHECK(md > 0.0);
      const double det = chi.partialPivLu().determinant().real();
      CHECK(std::abs(md * md - det) <= 1e-10 * std::abs(det));
    }
  }
}

TEST_CASE("hyperhermitian construction rejects asymmetry") {
  QuatMatrix A(2);
  A.at(0, 1) = Quaternion(0, 1, 0, 0);
  A.at(1, 0) = Quaternion(0, 1, 0, 0);  // should be the conjugate
  CHECK_THROWS_AS(HyperhermitianMatrix(A), std::invalid_argument);
}
