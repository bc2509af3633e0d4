#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "qma/field.hpp"
#include "qma/hkt.hpp"

using namespace qma;
constexpr double pi = std::numbers::pi;

namespace {

/// Analytic mixed complex Hessian of eps * sin(2 pi x_0) sin(2 pi x_4) at
/// n = 2, evaluated pointwise from the trigonometric second partials (an
/// implementation independent of the spectral path).
struct AnalyticOracle {
  double eps;

  // complex combination coefficients of d/dz_a over the real axes
  static void z_coeffs(int a, int* axes, cplx* coef) {
    const int base = (a / 2) * 4 + (a % 2 == 0 ? 0 : 2);
    axes[0] = base;
    axes[1] = base + 1;
    coef[0] = 0.5;
    coef[1] = (a % 2 == 0) ? cplx{0.0, -0.5} : cplx{0.0, 0.5};
  }
  static void zbar_coeffs(int a, int* axes, cplx* coef) {
    z_coeffs(a, axes, coef);
    coef[1] = std::conj(coef[1]);
  }

  double second_partial(int p, int q, const double* x) const {
    // phi = eps sin(2 pi x0) sin(2 pi x4)
    const double w = 2.0 * pi;
    auto s = [&](int r) { return std::sin(w * x[r]); };
    auto c = [&](int r) { return std::cos(w * x[r]); };
    if (p > q) std::swap(p, q);
    if (p == 0 && q == 0) return -eps * w * w * s(0) * s(4);
    if (p == 4 && q == 4) return -eps * w * w * s(0) * s(4);
    if (p == 0 && q == 4) return eps * w * w * c(0) * c(4);
    return 0.0;
  }

  cplx mixed(int a, int b, const double* x) const {
    int ax[2], bx[2];
    cplx ac[2], bc[2];
    z_coeffs(a, ax, ac);
    zbar_coeffs(b, bx, bc);
    cplx v{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) v += ac[i] * bc[j] * second_partial(ax[i], bx[j], x);
    return v;
  }
};

RealField quarter_laplacian(const RealField& f) {
  RealField out(f.grid());
  for (int r = 0; r < f.grid().axes(); ++r) out += d_real(d_real(f, r), r);
  out *= 0.25;
  return out;
}

} // namespace

TEST_CASE("reference potential assembles to the standard form") {
  const GridSpec g(2, 4);
  const StandardModel model(2);
  const RealField zero(g);
  const HktFormField form = assemble_omega_phi(zero, model);
  for (int r = 0; r < 4; ++r)
    for (int c = r + 1; c < 4; ++c) {
      const double want = (r % 2 == 0 && c == r + 1) ? 1.0 : 0.0;
      for (std::size_t p = 0; p < g.total(); ++p)
        REQUIRE(std::abs(form.at(p, r, c) - cplx{want, 0.0}) <= 1e-14);
    }
  const RealField pf = pfaffian_field(form);
  CHECK(max_abs(pf - RealField(g, 1.0)) <= 1e-13);
}

TEST_CASE("n = 1 coefficient is the quarter Laplacian relation") {
  const GridSpec g(1, 16);
  const StandardModel model(1);
  std::mt19937_64 rng(3);
  const RealField phi = random_band_limited(g, 2, rng, 0.4);
  const RealField pf = qma_pfaffian_route(phi, model);
  const RealField lap = quarter_laplacian(phi);
  RealField want(g, 1.0);
  want += lap;
  CHECK(max_abs(pf - want) <= 1e-11);
}

TEST_CASE("n = 2 assembly matches the analytic oracle") {
  const GridSpec g(2, 6);
  const StandardModel model(2);
  const AnalyticOracle oracle{0.35};
  RealField phi(g);
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    phi[flat] = oracle.eps * std::sin(2.0 * pi * g.coordinate(idx[0])) *
                std::sin(2.0 * pi * g.coordinate(idx[4]));
  });
  const HktFormField form = assemble_omega_phi(phi, model);

  double worst = 0.0;
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    double x[8];
    for (int a = 0; a < 8; ++a) x[a] = g.coordinate(idx[a]);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const cplx want = (i == j ? cplx{1.0, 0.0} : cplx{}) + oracle.mixed(2 * i, 2 * j, x) +
                          oracle.mixed(2 * j + 1, 2 * i + 1, x);
        worst = std::max(worst, std::abs(form.at(flat, 2 * i, 2 * j + 1) - want));
      }
    {
      const cplx want = oracle.mixed(1, 2, x) - oracle.mixed(3, 0, x);
      worst = std::max(worst, std::abs(form.at(flat, 1, 3) - want));
      const cplx want2 = oracle.mixed(2, 1, x) - oracle.mixed(0, 3, x);
      worst = std::max(worst, std::abs(form.at(flat, 0, 2) - want2));
    }
  });
  CHECK(worst <= 1e-11);
}

TEST_CASE("J-realness of the assembled form") {
  std::mt19937_64 rng(5);
  for (int n : {1, 2}) {
    const GridSpec g(n, n == 1 ? 16 : 6);
    const RealField phi = random_band_limited(g, 1, rng, 0.05);
    const HktFormField form = assemble_omega_phi(phi, StandardModel(n));
    CHECK(j_realness_defect(form) <= 1e-11);
  }
}

TEST_CASE("mean conservation of the pfaffian route") {
  const GridSpec g(2, 6);
  const StandardModel model(2);
  std::mt19937_64 rng(7);
  // full sub-Nyquist band: products overflow the band and alias pointwise
  const RealField phi = random_band_limited(g, 2, rng, 0.01);
  const HktFormField form = assemble_omega_phi(phi, model);
  const RealField dealiased = pfaffian_field(form, ProductRule::dealiased);
  CHECK(std::abs(mean(dealiased) - 1.0) <= 1e-11);
  CHECK(std::abs(pfaffian_mean(form) - mean(dealiased)) <= 1e-13);
  // collocation aliases interior modes (not the mean), so the two rules
  // genuinely disagree pointwise
  const RealField pointwise = pfaffian_field(form, ProductRule::pointwise);
  CHECK(std::abs(mean(pointwise) - 1.0) <= 1e-11);
  CHECK(max_abs(dealiased - pointwise) > 1e-12);
}

TEST_CASE("route equivalence at n = 1 and n = 2") {
  std::mt19937_64 rng(11);
  for (int n : {1, 2}) {
    const GridSpec g(n, n == 1 ? 16 : 6);
    const StandardModel model(n);
    const double amplitude = n == 1 ? 0.01 : 0.01;
    for (int trial = 0; trial < 3; ++trial) {
      const RealField phi = random_band_limited(g, 1, rng, amplitude);
      REQUIRE(positivity_check(assemble_omega_phi(phi, model)).positive);
      const RealField pf = qma_pfaffian_route(phi, model);
      const RealField moore = qma_moore_route(phi, model);
      CHECK(max_abs(pf - moore) <= (n == 1 ? 1e-10 : 1e-9));
    }
  }
}

TEST_CASE("positivity certification") {
  const GridSpec g(1, 16);
  const StandardModel model(1);

  const PositivityResult trivial = positivity_check(assemble_omega_phi(RealField(g), model));
  CHECK(trivial.positive);
  CHECK(trivial.margin == Catch::Approx(1.0).margin(1e-12));

  // quarter Laplacian dips to -1.05 somewhere: the form degenerates
  RealField bad(g);
  const double amp = 1.05 / (pi * pi);
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    bad[flat] = amp * std::cos(2.0 * pi * g.coordinate(idx[0]));
  });
  const PositivityResult broken = positivity_check(assemble_omega_phi(bad, model));
  CHECK_FALSE(broken.positive);

  // eigenvalue perturbation bound for a small random potential
  std::mt19937_64 rng(13);
  const RealField small = random_band_limited(g, 1, rng, 0.01);
  const HktFormField form = assemble_omega_phi(small, model);
  double max_entry = 0.0;
  for (std::size_t p = 0; p < g.total(); ++p) {
    const Eigen::MatrixXcd G = hermitian_form_at(form, p);
    max_entry = std::max(max_entry,
                         (G - Eigen::MatrixXcd::Identity(2, 2)).cwiseAbs().maxCoeff());
  }
  const PositivityResult pos = positivity_check(form);
  CHECK(pos.positive);
  CHECK(std::abs(pos.margin - 1.0) <= 2 * g.n * max_entry + 1e-12);
}

TEST_CASE("gradient quantity beta") {
  const GridSpec g(1, 16);
  const RealField constant(g, 4.0);
  CHECK(max_abs(beta_of(constant)) <= 1e-12);

  RealField phi(g);
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    phi[flat] = std::sin(2.0 * pi * g.coordinate(idx[0]));
  });
  const RealField beta = beta_of(phi);
  // at x = 0 the gradient is (2 pi, 0, ...), so beta = (2 pi)^2 / 4 = pi^2
  CHECK(beta[0] == Catch::Approx(pi * pi).margin(1e-10));
  for (std::size_t p = 0; p < beta.size(); ++p) REQUIRE(beta[p] >= -1e-12);

  std::mt19937_64 rng(17);
  const RealField random = random_band_limited(g, 2, rng, 0.5);
  CHECK(max_abs(beta_of(random) - beta_gradient_expression(random)) <= 1e-11);
}

TEST_CASE("laplacian quantity eta") {
  const GridSpec g(2, 6);
  CHECK(max_abs(eta_of(RealField(g)) - RealField(g, 1.0)) <= 1e-13);

  std::mt19937_64 rng(19);
  const RealField phi = random_band_limited(g, 2, rng, 0.05);
  const RealField eta = eta_of(phi);
  CHECK(std::abs(mean(eta) - 1.0) <= 1e-13);

  const RealField small = random_band_limited(g, 1, rng, 0.02);
  if (positivity_check(assemble_omega_phi(small, StandardModel(2))).positive) {
    const RealField eta2 = eta_of(small);
    for (std::size_t p = 0; p < eta2.size(); ++p) REQUIRE(eta2[p] > 0.0);
  }
}

TEST_CASE("max-eigenvalue quantity theta") {
  const GridSpec g(1, 16);
  CHECK(max_abs(theta_of(RealField(g))) <= 1e-12);

  // single mode: the Hessian has one nonzero eigenvalue 2 a cos(2 pi x0)
  const double a = 0.3;
  RealField phi(g);
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    phi[flat] = a * (1.0 - std::cos(2.0 * pi * g.coordinate(idx[0]))) /
                (2.0 * pi * pi);
  });
  const RealField theta = theta_of(phi);
  double worst = 0.0;
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    const double want = std::max(2.0 * a * std::cos(2.0 * pi * g.coordinate(idx[0])), 0.0);
    worst = std::max(worst, std::abs(theta[flat] - want));
  });
  CHECK(worst <= 1e-11);

  // max eigenvalue dominates the average of the eigenvalues
  std::mt19937_64 rng(23);
  const RealField random = random_band_limited(g, 2, rng, 0.3);
  const RealField th = theta_of(random);
  RealField trace(g);
  for (int r = 0; r < g.axes(); ++r) trace += d_real(d_real(random, r), r);
  for (std::size_t p = 0; p < th.size(); ++p)
    REQUIRE(th[p] >= trace[p] / (4.0 * g.n) - 1e-11);
}

TEST_CASE("linearization consistency") {
  std::mt19937_64 rng(29);
  const GridSpec g(1, 8);
  const StandardModel model(1);

  // at the reference potential the linearization is the quarter Laplacian
  const RealField psi = random_band_limited(g, 2, rng, 1.0);
  const LinearizedOperator at_zero(assemble_omega_phi(RealField(g), model), model);
  CHECK(max_abs(at_zero.apply(psi) - quarter_laplacian(psi)) <= 1e-11);

  // Gateaux derivative of log Pf against the trace formula; the potential
  // must keep a healthy positivity margin or the finite difference degrades
  const RealField phi = random_band_limited(g, 1, rng, 0.005);
  REQUIRE(positivity_check(assemble_omega_phi(phi, model)).margin > 0.3);
  const RealField dir = random_band_limited(g, 1, rng, 1.0);
  const LinearizedOperator lin(assemble_omega_phi(phi, model), model);
  const RealField predicted = lin.apply(dir);
  const double eps = 1e-6;
  const RealField plus = qma_pfaffian_route(phi + eps * dir, model);
  const RealField minus = qma_pfaffian_route(phi + (-eps) * dir, model);
  double worst = 0.0;
  for (std::size_t p = 0; p < plus.size(); ++p) {
    const double fd = (std::log(plus[p]) - std::log(minus[p])) / (2.0 * eps);
    worst = std::max(worst, std::abs(fd - predicted[p]));
  }
  CHECK(worst <= 1e-7);
}

TEST_CASE("flat-model christoffel symbols vanish") {
  const auto gamma = obata_christoffel(StandardModel(2));
  for (double v : gamma) REQUIRE(v == 0.0);
}
