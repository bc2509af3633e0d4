#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qma/field.hpp"
#include "qma/forms.hpp"
#include "qma/hkt.hpp"
#include "qma/skew.hpp"

namespace qma {

// ---------------------------------------------------------------------------
// Manufactured cases
// ---------------------------------------------------------------------------

/// One additive term of a manufactured potential: a product of single-axis
/// factors, one per real axis, each 1, sin(2 pi x), or cos(2 pi x).
struct ModeProduct {
  enum Factor : int8_t { one = 0, sine = 1, cosine = 2 };
  std::vector<int8_t> factors;  // length 4n

  double evaluate(const GridSpec& grid, const int* idx) const {
    double v = 1.0;
    for (int a = 0; a < grid.axes(); ++a) {
      const double x = grid.coordinate(idx[a]);
      switch (factors[a]) {
        case sine: v *= std::sin(2.0 * std::numbers::pi * x); break;
        case cosine: v *= std::cos(2.0 * std::numbers::pi * x); break;
        default: break;
      }
    }
    return v;
  }
};

/// amplitude * sum of mode products sampled on the grid (all |k| <= 1, so
/// any admissible grid represents the field and its operator images exactly
/// after dealiasing).
inline RealField mode_sum_field(const GridSpec& grid, const std::vector<ModeProduct>& modes,
                                double amplitude) {
  RealField f(grid);
  detail::for_each_slot(grid, [&](std::size_t flat, const int* idx) {
    double v = 0.0;
    for (const ModeProduct& m : modes) v += m.evaluate(grid, idx);
    f[flat] = amplitude * v;
  });
  return f;
}

/// Random mode set: each product has at least two non-constant axis factors
/// so the potential genuinely couples axes.
inline std::vector<ModeProduct> random_mode_set(const GridSpec& grid, int count,
                                                std::mt19937_64& rng) {
  std::vector<ModeProduct> modes(count);
  std::uniform_int_distribution<int> axis(0, grid.axes() - 1);
  std::uniform_int_distribution<int> kind(1, 2);
  for (ModeProduct& m : modes) {
    m.factors.assign(grid.axes(), ModeProduct::one);
    int a = axis(rng);
    int b = axis(rng);
    while (b == a) b = axis(rng);
    m.factors[a] = static_cast<int8_t>(kind(rng));
    m.factors[b] = static_cast<int8_t>(kind(rng));
  }
  return modes;
}

/// Manufactured problem: a band-limited mean-zero potential with verified
/// positivity and the data field it induces through the forward operator.
struct ManufacturedCase {
  GridSpec grid;
  RealField phi_star;
  RealField f_star;
  double positivity_margin = 0.0;
};

inline ManufacturedCase make_case(int n, int N, double amplitude,
                                  const std::vector<ModeProduct>& mode_set) {
  const GridSpec grid(n, N);
  const StandardModel model(n);
  ManufacturedCase out{grid, RealField(grid), RealField(grid)};
  out.phi_star = mean_zero(mode_sum_field(grid, mode_set, amplitude));
  const HktFormField form = assemble_omega_phi(out.phi_star, model);
  const PositivityResult pos = positivity_check(form);
  if (!pos.positive)
    throw std::invalid_argument("make_case: requested amplitude violates positivity");
  out.positivity_margin = pos.margin;
  const RealField pf = pfaffian_field(form);
  for (std::size_t i = 0; i < pf.size(); ++i) out.f_star[i] = std::log(pf[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Identity suite
// ---------------------------------------------------------------------------

/// Deliberate-defect hook for the verification batteries: used to prove the
/// suite detects convention bugs (a flipped sign must trip named identities).
enum class Defect {
  none,
  flip_jinv_barred_sign,  ///< corrupt the J^{-1} action on barred covectors
  flip_assembly_sign,     ///< corrupt the odd-odd family of the assembly
};

struct IdentityResult {
  std::string name;
  double max_violation = 0.0;
};

struct SuiteOptions {
  int trials = 20;
  double amplitude = 0.1;
  std::uint64_t seed = 20260811;
  Defect defect = Defect::none;
};

namespace detail {

inline void record(std::vector<IdentityResult>& results, const std::string& name,
                   double violation) {
  for (auto& r : results)
    if (r.name == name) {
      r.max_violation = std::max(r.max_violation, violation);
      return;
    }
  results.push_back({name, violation});
}

} // namespace detail

/// The operator-identity battery: squares and anticommutators of the four
/// first-order operators on random band-limited potentials, J-realness and
/// assembly consistency of the coefficient field, mean conservation of its
/// Pfaffian, and the quaternionic/complex derivative consistency.
inline std::vector<IdentityResult> run_identity_suite(const GridSpec& grid,
                                                      const SuiteOptions& opts) {
  const StandardModel model(grid.n);
  JTable table{2 * grid.n};
  if (opts.defect == Defect::flip_jinv_barred_sign) table.inverse_barred_sign = -1.0;

  std::mt19937_64 rng(opts.seed);
  std::vector<IdentityResult> results;

  for (int trial = 0; trial < opts.trials; ++trial) {
    const RealField phi = random_band_limited(grid, 1, rng, opts.amplitude);
    const FormField f0 = FormField::scalar(phi, 1);

    const FormField df = forms::d(f0);
    const FormField dbarf = forms::dbar(f0);
    const FormField dJf = forms::d_J(f0, table);
    const FormField dbarJf = forms::dbar_J(f0, table);

    detail::record(results, "d^2", forms::d(df).max_coefficient());
    detail::record(results, "dbar^2", forms::dbar(dbarf).max_coefficient());
    detail::record(results, "dJ^2", forms::d_J(dJf, table).max_coefficient());
    detail::record(results, "dbarJ^2", forms::dbar_J(dbarJf, table).max_coefficient());
    detail::record(results, "d dbar + dbar d",
                   (forms::d(dbarf) + forms::dbar(df)).max_coefficient());
    detail::record(results, "dJ dbarJ + dbarJ dJ",
                   (forms::d_J(dbarJf, table) + forms::dbar_J(dJf, table)).max_coefficient());
    detail::record(results, "d dJ + dJ d",
                   (forms::d(dJf) + forms::d_J(df, table)).max_coefficient());
    detail::record(results, "dbar dbarJ + dbarJ dbar",
                   (forms::dbar(dbarJf) + forms::dbar_J(dbarf, table)).max_coefficient());
    detail::record(results, "dJ dbar + dbar dJ",
                   (forms::d_J(dbarf, table) + forms::dbar(dJf)).max_coefficient());
    detail::record(results, "dbarJ d + d dbarJ",
                   (forms::dbar_J(df, table) + forms::d(dbarJf)).max_coefficient());

    // coefficient assembly vs the operator composition, entry by entry
    HktFormField assembled = assemble_perturbation(phi, model);
    if (opts.defect == Defect::flip_assembly_sign) {
      for (int i = 0; i < grid.n; ++i)
        for (int j = i + 1; j < grid.n; ++j)
          assembled.upper(2 * i + 1, 2 * j + 1) *= cplx{-1.0, 0.0};
    }
    const FormField ddJ = forms::d(dJf);
    double assembly_diff = 0.0;
    for (int k = 0; k < 2 * grid.n; ++k)
      for (int l = k + 1; l < 2 * grid.n; ++l) {
        const ComplexField want = ddJ.coefficient({k, l});
        assembly_diff = std::max(assembly_diff, max_abs(want - assembled.upper(k, l)));
      }
    detail::record(results, "assembly = d dJ", assembly_diff);

    // J-realness of the full form (Eq-type relation J Omega_phi = conj)
    HktFormField full = assembled;
    for (int i = 0; i < grid.n; ++i) {
      ComplexField& diag = full.upper(2 * i, 2 * i + 1);
      for (std::size_t p = 0; p < diag.size(); ++p) diag[p] += 1.0;
    }
    detail::record(results, "J-realness", j_realness_defect(full));

    // mean conservation of the Pfaffian (exact spectral contraction)
    detail::record(results, "mean Pf = 1", std::abs(pfaffian_mean(full) - 1.0));

    // quaternionic derivative components vs complex derivatives
    double crf_diff = 0.0;
    for (int alpha = 0; alpha < grid.n; ++alpha) {
      const QuaternionField q = crf_dbar(phi, alpha);
      const ComplexField za = d_zbar(phi, 2 * alpha);
      const ComplexField zb = d_z(phi, 2 * alpha + 1);
      for (std::size_t p = 0; p < phi.size(); ++p) {
        crf_diff = std::max(crf_diff,
                            std::abs(cplx{q.w[p], q.x[p]} - 2.0 * za[p]));
        crf_diff = std::max(crf_diff,
                            std::abs(cplx{q.y[p], q.z[p]} - 2.0 * zb[p]));
      }
    }
    detail::record(results, "crf vs dz/dzbar", crf_diff);
  }
  return results;
}

// ---------------------------------------------------------------------------
// Linearization check
// ---------------------------------------------------------------------------

/// Centered finite difference of log Pf along psi against the trace-formula
/// linearization, pointwise over the grid.
inline double finite_difference_linearization_check(const RealField& phi, const RealField& psi,
                                                    double eps) {
  const StandardModel model(phi.grid().n);
  const HktFormField base = assemble_omega_phi(phi, model);
  const LinearizedOperator lin(base, model);  // unscaled: d/dt log Pf
  const RealField predicted = lin.apply(psi);

  const RealField pf_plus = qma_pfaffian_route(phi + eps * psi, model);
  const RealField pf_minus = qma_pfaffian_route(phi + (-eps) * psi, model);
  double diff = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double fd = (std::log(pf_plus[i]) - std::log(pf_minus[i])) / (2.0 * eps);
    diff = std::max(diff, std::abs(fd - predicted[i]));
  }
  return diff;
}

// ---------------------------------------------------------------------------
// Pfaffian batteries
// ---------------------------------------------------------------------------

inline SkewMatrix random_skew(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  SkewMatrix M(size);
  for (int r = 0; r < size; ++r)
    for (int c = r + 1; c < size; ++c) M.set_upper(r, c, cplx{unit(rng), unit(rng)});
  return M;
}

/// Relative defect of det = Pf^2 over random complex skew matrices
/// (determinant from an LU factorization, independent of the Pfaffian path).
inline double det_pf_battery(const std::vector<int>& sizes, int count, std::mt19937_64& rng) {
  double worst = 0.0;
  for (int size : sizes)
    for (int i = 0; i < count; ++i) {
      const SkewMatrix M = random_skew(size, rng);
      const cplx pf = pfaffian(M);
      const cplx det = Eigen::PartialPivLU<Eigen::MatrixXcd>(M.dense()).determinant();
      const double scale = std::max(std::abs(det), 1e-300);
      worst = std::max(worst, std::abs(pf * pf - det) / scale);
    }
  return worst;
}

struct DerivativeBatteryResult {
  double max_first = 0.0;
  double max_second = 0.0;
};

/// Trace formulas for the first and second derivative of log Pf against
/// centered finite differences over random matrix families
/// M(s,t) = M + s B + t C + s t D.  The second difference uses a larger
/// step: the four-point stencil divides round-off by eps^2, so eps near
/// the fourth root of machine precision balances the two error sources.
inline DerivativeBatteryResult pf_derivative_battery(int size, int count,
                                                     std::mt19937_64& rng) {
  DerivativeBatteryResult out;
  const double eps = 1e-6;
  const double eps2 = 1e-4;
  auto log_pf = [](const SkewMatrix& M) { return std::log(pfaffian(M)); };
  for (int i = 0; i < count; ++i) {
    SkewMatrix M = random_skew(size, rng);
    // keep the family comfortably nonsingular
    for (int d = 0; d < size / 2; ++d) {
      M.set_upper(2 * d, 2 * d + 1, M.at(2 * d, 2 * d + 1) + 4.0);
    }
    const SkewMatrix B = random_skew(size, rng);
    const SkewMatrix C = random_skew(size, rng);
    const SkewMatrix D = random_skew(size, rng);

    auto member = [&](double s, double t) {
      SkewMatrix A = M;
      for (int r = 0; r < size; ++r)
        for (int c = r + 1; c < size; ++c)
          A.set_upper(r, c, M.at(r, c) + s * B.at(r, c) + t * C.at(r, c) +
                                s * t * D.at(r, c));
      return A;
    };

    const cplx first = pf_log_derivative(M, C);  // d/dt at (0,0)
    const cplx fd_first = (log_pf(member(0.0, eps)) - log_pf(member(0.0, -eps))) / (2.0 * eps);
    out.max_first = std::max(out.max_first, std::abs(first - fd_first));

    const cplx second = pf_log_second_derivative(M, B, C, D);  // d2/ds dt
    const cplx fd_second = (log_pf(member(eps2, eps2)) - log_pf(member(eps2, -eps2)) -
                            log_pf(member(-eps2, eps2)) + log_pf(member(-eps2, -eps2))) /
                           (4.0 * eps2 * eps2);
    out.max_second = std::max(out.max_second, std::abs(second - fd_second));
  }
  return out;
}

/// Equality of the Moore and Pfaffian routes over manufactured cases.
inline double route_equivalence_battery(const std::vector<ManufacturedCase>& cases) {
  double worst = 0.0;
  for (const ManufacturedCase& c : cases) {
    const StandardModel model(c.grid.n);
    const RealField pf = qma_pfaffian_route(c.phi_star, model);
    const RealField moore = qma_moore_route(c.phi_star, model);
    worst = std::max(worst, max_abs(pf - moore));
  }
  return worst;
}

} // namespace qma
