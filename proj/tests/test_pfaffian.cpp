#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <random>

#include "qma/skew.hpp"

using qma::SkewMatrix;
using cplx = std::complex<double>;

namespace {

SkewMatrix random_skew(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SkewMatrix M(size);
  for (int r = 0; r < size; ++r)
    for (int c = r + 1; c < size; ++c) M.set_upper(r, c, cplx{u(rng), u(rng)});
  return M;
}

} // namespace

TEST_CASE("pfaffian base cases") {
  SkewMatrix m2(2);
  m2.set_upper(0, 1, 1.0);
  CHECK(qma::pfaffian(m2) == cplx{1.0, 0.0});

  // standard 4x4 block form: the n = 2 normalization of the definition
  CHECK(qma::pfaffian(SkewMatrix::standard(2)) == cplx{1.0, 0.0});
  CHECK(qma::pfaffian(SkewMatrix::standard(4)) == cplx{1.0, 0.0});
}

TEST_CASE("pfaffian of a singular matrix is zero") {
  SkewMatrix m4(4);
  m4.set_upper(0, 1, 2.0);  // rows 2,3 vanish
  CHECK(std::abs(qma::pfaffian(m4)) == 0.0);
}

TEST_CASE("det = Pf^2 on random matrices") {
  std::mt19937_64 rng(5);
  for (int size : {2, 4, 6, 8}) {
    for (int trial = 0; trial < 50; ++trial) {
      const SkewMatrix M = random_skew(size, rng);
      const cplx pf = qma::pfaffian(M);
      const cplx det = Eigen::PartialPivLU<Eigen::MatrixXcd>(M.dense()).determinant();
      CHECK(std::abs(pf * pf - det) <= 1e-10 * std::max(1e-30, std::abs(det)));
    }
  }
}

TEST_CASE("partial-pivot path agrees with the recursive expansion") {
  std::mt19937_64 rng(17);
  for (int size : {6, 8}) {
    for (int trial = 0; trial < 30; ++trial) {
      const SkewMatrix M = random_skew(size, rng);
      const cplx a = qma::detail::pfaffian_parlett_reid(M.dense());
      const cplx b = qma::detail::pfaffian_expand(M.dense());
      CHECK(std::abs(a - b) <= 1e-11 * std::max(1.0, std::abs(b)));
    }
  }
}

TEST_CASE("congruence covariance Pf(B^T M B) = det(B) Pf(M)") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int size : {4, 6}) {
    for (int trial = 0; trial < 20; ++trial) {
      const SkewMatrix M = random_skew(size, rng);
      Eigen::MatrixXcd B(size, size);
      for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) B(r, c) = cplx{u(rng), u(rng)};
      const Eigen::MatrixXcd congruent = B.transpose() * M.dense() * B;
      const cplx lhs = qma::pfaffian(SkewMatrix::from_dense(congruent));
      const cplx rhs = B.partialPivLu().determinant() * qma::pfaffian(M);
      CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST_CASE("log-derivative examples") {
  const SkewMatrix M = SkewMatrix::standard(1);
  SkewMatrix dM(2);
  dM.set_upper(0, 1, 0.7);
  CHECK(std::abs(qma::pf_log_derivative(M, dM) - cplx{0.7, 0.0}) < 1e-15);

  SkewMatrix zero(2);
  CHECK(std::abs(qma::pf_log_derivative(M, zero)) == 0.0);

  // second derivative of log(1 + t) at 0
  SkewMatrix ds = SkewMatrix::standard(1);
  CHECK(std::abs(qma::pf_log_second_derivative(M, ds, ds, zero) - cplx{-1.0, 0.0}) < 1e-15);
  CHECK(std::abs(qma::pf_log_second_derivative(M, zero, zero, zero)) == 0.0);
}

TEST_CASE("log-derivative matches finite differences") {
  std::mt19937_64 rng(29);
  const double eps = 1e-6;
  for (int trial = 0; trial < 30; ++trial) {
    SkewMatrix M = random_skew(6, rng);
    for (int d = 0; d < 3; ++d) M.set_upper(2 * d, 2 * d + 1, M.at(2 * d, 2 * d + 1) + 4.0);
    const SkewMatrix dM = random_skew(6, rng);

    auto shifted = [&](double t) {
      SkewMatrix A(6);
      for (int r = 0; r < 6; ++r)
        for (int c = r + 1; c < 6; ++c) A.set_upper(r, c, M.at(r, c) + t * dM.at(r, c));
      return A;
    };
    const cplx fd =
        (std::log(qma::pfaffian(shifted(eps))) - std::log(qma::pfaffian(shifted(-eps)))) /
        (2.0 * eps);
    CHECK(std::abs(qma::pf_log_derivative(M, dM) - fd) < 1e-7);
  }
}

TEST_CASE("log-derivative is linear in the direction") {
  std::mt19937_64 rng(31);
  SkewMatrix M = random_skew(6, rng);
  for (int d = 0; d < 3; ++d) M.set_upper(2 * d, 2 * d + 1, M.at(2 * d, 2 * d + 1) + 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const SkewMatrix A = random_skew(6, rng);
    const SkewMatrix B = random_skew(6, rng);
    SkewMatrix combo(6);
    for (int r = 0; r < 6; ++r)
      for (int c = r + 1; c < 6; ++c) combo.set_upper(r, c, 0.3 * A.at(r, c) - 1.7 * B.at(r, c));
    const cplx lhs = qma::pf_log_derivative(M, combo);
    const cplx rhs =
        0.3 * qma::pf_log_derivative(M, A) - 1.7 * qma::pf_log_derivative(M, B);
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("singular input is a distinct error") {
  SkewMatrix M(4);  // all zero
  SkewMatrix dM(4);
  CHECK_THROWS_AS(qma::pf_log_derivative(M, dM), qma::singular_matrix_error);
}
