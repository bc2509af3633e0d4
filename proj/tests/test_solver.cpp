#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "qma/solver.hpp"
#include "qma/verification.hpp"

using namespace qma;
constexpr double pi = std::numbers::pi;

namespace {

RealField sine_mode(const GridSpec& g, int axis, double amplitude) {
  RealField f(g);
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    f[flat] = amplitude * std::sin(2.0 * pi * g.coordinate(idx[axis]));
  });
  return f;
}

/// High-resolution trapezoid quadrature of the 1d mean of exp(a sin):
/// spectrally accurate for periodic integrands.
double quadrature_mean_exp_sin(double a) {
  const int M = 4096;
  double sum = 0.0;
  for (int j = 0; j < M; ++j) sum += std::exp(a * std::sin(2.0 * pi * j / M));
  return sum / M;
}

/// Independent spectral Poisson inverse for the n = 1 closed form.
RealField poisson_quarter(const RealField& rhs) {
  Spectrum s = Spectrum::forward(rhs);
  const GridSpec& g = rhs.grid();
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    cplx sym{};
    for (int r = 0; r < g.axes(); ++r) {
      const cplx d = s.d_real_symbol(r, idx);
      sym += d * d;
    }
    sym *= 0.25;
    s.coef(flat) = (sym == cplx{}) ? cplx{} : s.coef(flat) / sym;
  });
  return s.inverse_real();
}

SolverConfig config_for(const GridSpec& g) {
  SolverConfig cfg;
  cfg.grid = g;
  return cfg;
}

} // namespace

TEST_CASE("build_rhs normalization") {
  const GridSpec g(1, 16);
  double constant = -1.0;
  const RealField trivial = build_rhs(RealField(g), &constant);
  CHECK(max_abs(trivial - RealField(g, 1.0)) <= 1e-15);
  CHECK(constant == Catch::Approx(0.0).margin(1e-15));

  // f = a sin(2 pi x0): the constant is -log of the quadrature mean
  const RealField f = sine_mode(g, 0, 1.0);
  const RealField rhs = build_rhs(f, &constant);
  CHECK(std::abs(mean(rhs) - 1.0) <= 1e-12);
  CHECK(constant == Catch::Approx(-std::log(quadrature_mean_exp_sin(1.0))).margin(1e-12));

  std::mt19937_64 rng(3);
  const RealField random = random_band_limited(g, 2, rng, 0.7);
  CHECK(std::abs(mean(build_rhs(random)) - 1.0) <= 1e-12);
}

TEST_CASE("continuity path targets") {
  const GridSpec g(1, 8);
  std::mt19937_64 rng(5);
  const RealField rhs = build_rhs(random_band_limited(g, 1, rng, 0.4));
  const RealField at0 = continuity_rhs(rhs, 0.0);
  CHECK(max_abs(at0 - RealField(g, 1.0)) == 0.0);
  const RealField at1 = continuity_rhs(rhs, 1.0);
  CHECK(max_abs(at1 - rhs) == 0.0);
  CHECK(std::abs(mean(continuity_rhs(rhs, 0.37)) - 1.0) <= 1e-14);
}

TEST_CASE("newton step is exact for the linear n = 1 operator") {
  const GridSpec g(1, 16);
  const SolverConfig cfg = config_for(g);
  const RealField f = sine_mode(g, 0, 0.25);
  const RealField target = build_rhs(f);

  const auto [phi, diag] = newton_step(RealField(g), target, cfg);
  CHECK(diag.step_size == 1.0);
  CHECK(diag.residual_norm <= 1e-9);

  // already-solved input is a no-op
  const auto [same, diag2] = newton_step(phi, target, cfg);
  CHECK(diag2.residual_norm <= cfg.newton_tol);
  CHECK(max_abs(same - phi) == 0.0);
}

TEST_CASE("trivial data solves on the spot") {
  const GridSpec g(1, 8);
  const SolverConfig cfg = config_for(g);
  const SolveReport report = solve(RealField(g), cfg);
  REQUIRE(report.converged);
  REQUIRE(report.path.size() == 1);
  CHECK(report.path[0].t == 1.0);
  CHECK(report.path[0].newton_iters == 0);
  CHECK(max_abs(report.phi_mean_zero) == 0.0);
}

TEST_CASE("n = 1 closed form: quarter Laplacian Poisson solve") {
  const GridSpec g(1, 16);
  const SolverConfig cfg = config_for(g);
  RealField f(g);
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    const double v = 0.3 * std::sin(2.0 * pi * g.coordinate(idx[0])) *
                     std::sin(2.0 * pi * g.coordinate(idx[1]));
    f[flat] = std::log1p(v);
  });
  const SolveReport report = solve(f, cfg);
  REQUIRE(report.converged);
  CHECK_FALSE(report.rhs_was_rescaled);  // mean(e^f) = 1 by construction

  RealField rhs_minus_one = build_rhs(f);
  for (std::size_t i = 0; i < rhs_minus_one.size(); ++i) rhs_minus_one[i] -= 1.0;
  const RealField expected = mean_zero(poisson_quarter(rhs_minus_one));
  CHECK(max_abs(report.phi_mean_zero - expected) <= 1e-9);

  // the sup-zero copy is the same function shifted
  RealField shifted = report.phi_sup_zero;
  const double diff0 = report.phi_mean_zero[0] - shifted[0];
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += diff0;
  CHECK(max_abs(shifted - report.phi_mean_zero) <= 1e-12);
  double sup = report.phi_sup_zero[0];
  for (std::size_t i = 0; i < report.phi_sup_zero.size(); ++i)
    sup = std::max(sup, report.phi_sup_zero[i]);
  CHECK(std::abs(sup) <= 1e-12);
}

TEST_CASE("path invariants and monitors") {
  const GridSpec g(1, 16);
  const SolverConfig cfg = config_for(g);
  const RealField f = mean_zero(sine_mode(g, 0, 0.4));
  const SolveReport report = solve(f, cfg);
  REQUIRE(report.converged);
  CHECK(report.rhs_was_rescaled);  // mean(e^f) != 1 for a pure sine
  REQUIRE(!report.path.empty());
  for (const ContinuityState& state : report.path) {
    CHECK(state.positivity_margin >= cfg.positivity_margin);
    CHECK(std::abs(state.mean_pf - 1.0) <= 1e-11);
    CHECK(std::abs(mean(state.phi)) <= 1e-13);
    CHECK(std::isfinite(state.monitor.beta_sup));
    CHECK(std::isfinite(state.monitor.theta_sup));
    CHECK(state.monitor.eta_sup > 0.0);
    // residuals decrease strictly across accepted newton iterates
    for (std::size_t k = 1; k + 1 < state.newton_residuals.size(); ++k)
      CHECK(state.newton_residuals[k] < state.newton_residuals[k - 1]);
  }
  CHECK(report.max_discarded_mean <= 1e-9);
  CHECK(report.beta_definition_discrepancy <= 1e-10);
}

TEST_CASE("solves are reproducible bit for bit") {
  const GridSpec g(1, 8);
  const SolverConfig cfg = config_for(g);
  std::mt19937_64 rng(11);
  const RealField f = random_band_limited(g, 1, rng, 0.3);
  const SolveReport a = solve(f, cfg);
  const SolveReport b = solve(f, cfg);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  REQUIRE(a.path.size() == b.path.size());
  for (std::size_t i = 0; i < a.phi_mean_zero.size(); ++i)
    REQUIRE(a.phi_mean_zero[i] == b.phi_mean_zero[i]);
}

TEST_CASE("uniqueness up to constants across warm starts") {
  const GridSpec g(1, 16);
  const SolverConfig cfg = config_for(g);
  RealField f(g);
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    const double v = 0.3 * std::sin(2.0 * pi * g.coordinate(idx[0])) *
                     std::sin(2.0 * pi * g.coordinate(idx[1]));
    f[flat] = std::log1p(v);
  });
  const SolveReport from_zero = solve(f, cfg);
  std::mt19937_64 rng(13);
  const RealField guess = random_band_limited(g, 1, rng, 0.01);
  const SolveReport from_guess = solve(f, cfg, &guess);
  REQUIRE(from_zero.converged);
  REQUIRE(from_guess.converged);
  // both are mean-zero, so mean alignment is the identity
  CHECK(max_abs(from_zero.phi_mean_zero - from_guess.phi_mean_zero) <= 1e-9);
}

TEST_CASE("manufactured recovery at n = 2 on a coarse grid") {
  const int n = 2, N = 4;
  std::mt19937_64 rng(17);
  const GridSpec g(n, N);
  const auto modes = random_mode_set(g, 2, rng);
  const ManufacturedCase mc = make_case(n, N, 0.02, modes);
  SolverConfig cfg = config_for(g);
  const SolveReport report = solve(mc.f_star, cfg);
  REQUIRE(report.converged);
  const RealField aligned = mean_zero(mc.phi_star);
  CHECK(max_abs(report.phi_mean_zero - aligned) <= 1e-8);
}

TEST_CASE("positivity collapse ends in a diagnosed failure") {
  const GridSpec g(1, 8);
  SolverConfig cfg = config_for(g);
  cfg.max_newton = 12;
  const RealField f = sine_mode(g, 0, 12.0);  // margin at t = 1 far below the floor
  const SolveReport report = solve(f, cfg);
  CHECK_FALSE(report.converged);
  CHECK(!report.failure_reason.empty());
  CHECK(!report.path.empty());  // trajectory retained for post-mortem
  for (const ContinuityState& state : report.path) CHECK(state.t < 1.0);
}

TEST_CASE("config validation") {
  SolverConfig cfg = config_for(GridSpec(1, 8));
  cfg.t_step_init = 2.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = config_for(GridSpec(1, 8));
  cfg.damping = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = config_for(GridSpec(1, 8));
  cfg.newton_tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
