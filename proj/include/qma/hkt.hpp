#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qma/field.hpp"
#include "qma/quat_matrix.hpp"
#include "qma/skew.hpp"

namespace qma {

/// The constant flat hyperhermitian model on T^{4n}: J acts on holomorphic
/// indices by the pairing a <-> a(+/-)1 with alternating sign, and the
/// reference form has the standard block coefficient matrix with Pfaffian 1.
struct StandardModel {
  int n = 1;

  StandardModel() = default;
  explicit StandardModel(int n_) : n(n_) {
    if (n < 1) throw std::invalid_argument("StandardModel: n must be >= 1");
  }

  /// Index pairing of the J action: 0<->1, 2<->3, ...
  static int j_partner(int a) { return (a % 2 == 0) ? a + 1 : a - 1; }
  /// Sign (-1)^a of the J action on index a.
  static double j_sign(int a) { return (a % 2 == 0) ? 1.0 : -1.0; }

  SkewMatrix omega() const { return SkewMatrix::standard(n); }
};

/// Obata Christoffel symbols of the flat model.  They vanish identically,
/// which is what makes the canonical-coordinate coefficient formulas below
/// valid globally and not only at a chosen point.
inline std::vector<double> obata_christoffel(const StandardModel& model) {
  const std::size_t m = static_cast<std::size_t>(2 * model.n);
  return std::vector<double>(m * m * m, 0.0);
}

/// Ratio between the squared reference volume and the hermitian volume:
/// Omega^n wedge conj(Omega)^n = c_n omega_I^{2n} with c_n = 4^n (n!)^2 / (2n)!.
/// Pinned by an exterior-algebra expansion oracle in the test suite.
inline double canonical_volume_constant(int n) {
  double c = 1.0;
  for (int k = 1; k <= n; ++k) c *= 4.0 * k * k / ((2.0 * k - 1.0) * 2.0 * k);
  return c;
}

/// Field of skew 2n x 2n coefficient matrices over the grid, stored as the
/// strict upper triangle of complex fields.
class HktFormField {
 public:
  explicit HktFormField(const GridSpec& grid)
      : grid_(grid), m_(2 * grid.n), upper_(tri_count(m_), ComplexField(grid)) {}

  const GridSpec& grid() const { return grid_; }
  int matrix_size() const { return m_; }

  ComplexField& upper(int r, int c) { return upper_[tri_index(r, c)]; }
  const ComplexField& upper(int r, int c) const { return upper_[tri_index(r, c)]; }

  /// Assign entry (r, c), folding the skew sign into the stored triangle.
  void set_entry(int r, int c, ComplexField value) {
    if (r < c) {
      upper_[tri_index(r, c)] = std::move(value);
    } else {
      value *= cplx{-1.0, 0.0};
      upper_[tri_index(c, r)] = std::move(value);
    }
  }

  cplx at(std::size_t flat, int r, int c) const {
    if (r == c) return {};
    return r < c ? upper_[tri_index(r, c)][flat] : -upper_[tri_index(c, r)][flat];
  }

  SkewMatrix matrix_at(std::size_t flat) const {
    SkewMatrix M(m_);
    for (int r = 0; r < m_; ++r)
      for (int c = r + 1; c < m_; ++c) M.set_upper(r, c, at(flat, r, c));
    return M;
  }

 private:
  static std::size_t tri_count(int m) { return static_cast<std::size_t>(m) * (m - 1) / 2; }
  std::size_t tri_index(int r, int c) const {
    if (r >= c) throw std::invalid_argument("HktFormField: need r < c");
    return static_cast<std::size_t>(r) * (2 * m_ - r - 1) / 2 + (c - r - 1);
  }

  GridSpec grid_;
  int m_;
  std::vector<ComplexField> upper_;
};

namespace detail {

/// Spectrum of one coefficient of the perturbation form: a signed sum of
/// two mixed second-derivative symbols applied to the potential.
inline ComplexField mixed_pair(const Spectrum& phi_hat, int za1, int zb1, double s1,
                               int za2, int zb2, double s2) {
  const GridSpec& g = phi_hat.grid();
  Spectrum out(g);
  for_each_slot(g, [&](std::size_t flat, const int* idx) {
    const cplx c = phi_hat.coef(flat);
    if (c == cplx{}) return;
    const cplx m1 = phi_hat.mixed_hessian_symbol(za1, zb1, idx);
    const cplx m2 = phi_hat.mixed_hessian_symbol(za2, zb2, idx);
    out.coef(flat) = c * (s1 * m1 + s2 * m2);
  });
  return out.inverse();
}

} // namespace detail

/// Coefficient matrix field of the perturbation form of a real potential:
///   (2i, 2j+1): phi_{2i zbar(2j)} + phi_{2j+1 zbar(2i+1)}
///   (2i+1, 2j+1), i<j: phi_{2i+1 zbar(2j)} - phi_{2j+1 zbar(2i)}
///   (2i, 2j), i<j: phi_{2j zbar(2i+1)} - phi_{2i zbar(2j+1)}
/// With include_reference the standard form contributes 1 on the
/// (2i, 2i+1) slots.  Each distinct mixed derivative is produced by one
/// spectral multiplier pass.
inline HktFormField assemble_omega_phi(const RealField& phi, const StandardModel& model,
                                       bool include_reference = true) {
  const GridSpec& g = phi.grid();
  if (g.n != model.n) throw std::invalid_argument("assemble_omega_phi: model/grid mismatch");
  const int n = g.n;
  HktFormField out(g);
  const Spectrum phi_hat = Spectrum::forward(phi);

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      ComplexField e =
          detail::mixed_pair(phi_hat, 2 * i, 2 * j, 1.0, 2 * j + 1, 2 * i + 1, 1.0);
      if (include_reference && i == j)
        for (std::size_t p = 0; p < e.size(); ++p) e[p] += 1.0;
      out.set_entry(2 * i, 2 * j + 1, std::move(e));
    }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      out.upper(2 * i + 1, 2 * j + 1) =
          detail::mixed_pair(phi_hat, 2 * i + 1, 2 * j, 1.0, 2 * j + 1, 2 * i, -1.0);
      out.upper(2 * i, 2 * j) =
          detail::mixed_pair(phi_hat, 2 * j, 2 * i + 1, 1.0, 2 * i, 2 * j + 1, -1.0);
    }
  return out;
}

/// Perturbation form alone (no reference contribution); the direction
/// matrix of the linearization.
inline HktFormField assemble_perturbation(const RealField& psi, const StandardModel& model) {
  return assemble_omega_phi(psi, model, false);
}

enum class ProductRule {
  pointwise,  ///< collocation products at grid nodes
  dealiased,  ///< 3/2-rule zero-padded products
};

/// Pointwise Pfaffian of an assembled coefficient field.  For n <= 2 the
/// Pfaffian polynomial is expanded in the coefficient fields so its
/// products can be dealiased; beyond that the per-point algorithm is used
/// (pointwise only).
inline RealField pfaffian_field(const HktFormField& M, ProductRule rule = ProductRule::dealiased) {
  const GridSpec& g = M.grid();
  const int n = g.n;
  if (n == 1) return real_part(M.upper(0, 1));
  if (n == 2) {
    auto prod = [&](const ComplexField& a, const ComplexField& b) {
      if (rule == ProductRule::dealiased) return dealiased_product(a, b);
      ComplexField r(a.grid());
      for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
      return r;
    };
    ComplexField pf = prod(M.upper(0, 1), M.upper(2, 3));
    pf -= prod(M.upper(0, 2), M.upper(1, 3));
    pf += prod(M.upper(0, 3), M.upper(1, 2));
    return real_part(pf);
  }
  RealField out(g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t flat = 0; flat < static_cast<std::ptrdiff_t>(g.total()); ++flat)
    out[static_cast<std::size_t>(flat)] =
        pfaffian(M.matrix_at(static_cast<std::size_t>(flat))).real();
  return out;
}

/// Pfaffian route of the operator: Pf of the assembled coefficients; the
/// reference normalizer Pf(Omega) is 1 in the standard model.
inline RealField qma_pfaffian_route(const RealField& phi, const StandardModel& model,
                                    ProductRule rule = ProductRule::dealiased) {
  return pfaffian_field(assemble_omega_phi(phi, model), rule);
}

namespace detail {

/// Exact mean of a pointwise product of two symmetric trigonometric
/// interpolants: the zero mode of their convolution, sum_k a_k b_{-k},
/// with each Nyquist axis contributing at half weight (its coefficient is
/// split across +-N/2).
inline cplx product_mean(const Spectrum& a, const Spectrum& b) {
  const GridSpec& g = a.grid();
  const int N = g.points_per_axis;
  std::vector<cplx> correlations(g.total());
  std::vector<int> neg(g.axes());
  for_each_slot(g, [&](std::size_t flat, const int* idx) {
    double weight = 1.0;
    for (int ax = 0; ax < g.axes(); ++ax) {
      neg[ax] = idx[ax] == 0 ? 0 : N - idx[ax];
      if (idx[ax] == N / 2) weight *= 0.5;
    }
    correlations[flat] = weight * a.coef(flat) * b.coef(g.ravel(neg.data()));
  });
  return pairwise_sum(correlations.data(), correlations.size());
}

} // namespace detail

/// Exact mean of the Pfaffian of an assembled form for n <= 2: the product
/// terms are contracted spectrally, which equals the mean of the dealiased
/// Pfaffian field at a fraction of its cost.
inline double pfaffian_mean(const HktFormField& M) {
  const GridSpec& g = M.grid();
  if (g.n == 1) return mean(M.upper(0, 1)).real();
  if (g.n == 2) {
    const Spectrum s01 = Spectrum::forward(M.upper(0, 1));
    const Spectrum s23 = Spectrum::forward(M.upper(2, 3));
    const Spectrum s02 = Spectrum::forward(M.upper(0, 2));
    const Spectrum s13 = Spectrum::forward(M.upper(1, 3));
    const Spectrum s03 = Spectrum::forward(M.upper(0, 3));
    const Spectrum s12 = Spectrum::forward(M.upper(1, 2));
    return (detail::product_mean(s01, s23) - detail::product_mean(s02, s13) +
            detail::product_mean(s03, s12))
        .real();
  }
  return mean(pfaffian_field(M, ProductRule::dealiased));
}

// ---------------------------------------------------------------------------
// Moore route
// ---------------------------------------------------------------------------

namespace detail {

/// All second derivatives phi_{x_a x_b}, a <= b, one spectral pass each.
inline std::vector<RealField> real_hessian_fields(const RealField& phi) {
  const GridSpec& g = phi.grid();
  const int axes = g.axes();
  const Spectrum phi_hat = Spectrum::forward(phi);
  std::vector<RealField> hess;
  hess.reserve(static_cast<std::size_t>(axes) * (axes + 1) / 2);
  for (int a = 0; a < axes; ++a)
    for (int b = a; b < axes; ++b) {
      Spectrum s(g);
      for_each_slot(g, [&](std::size_t flat, const int* idx) {
        const cplx c = phi_hat.coef(flat);
        if (c == cplx{}) return;
        s.coef(flat) = c * phi_hat.second_mixed_symbol(a, b, idx);
      });
      hess.push_back(s.inverse_real());
    }
  return hess;
}

inline std::size_t sym_index(int axes, int a, int b) {
  if (a > b) std::swap(a, b);
  return static_cast<std::size_t>(a) * (2 * axes - a - 1) / 2 + b;
}

} // namespace detail

/// Moore-determinant route: the hyperhermitian quaternionic Hessian is
/// built by the Cauchy-Riemann-Fueter composition (outer q-derivative with
/// right-multiplied units applied to the quaternion field of the qbar
/// derivative), scaled by 1/4 so the reference potential maps to the
/// identity, and fed to the Moore determinant after the identity shift.
/// A Hessian asymmetry beyond `hermitian_tol` signals a derivative
/// convention bug and is reported as an error.
inline RealField qma_moore_route(const RealField& phi, const StandardModel& model,
                                 double hermitian_tol = 1e-9) {
  const GridSpec& g = phi.grid();
  if (g.n != model.n) throw std::invalid_argument("qma_moore_route: model/grid mismatch");
  const int n = g.n;
  const int axes = g.axes();

  const std::vector<RealField> hess = detail::real_hessian_fields(phi);

  // structure constants of the composition: the (r, s) term of entry
  // (alpha, beta) multiplies phi_{x_{4a+r} x_{4b+s}} by u_s * conj(u_r)
  Quaternion coeff[4][4];
  for (int r = 0; r < 4; ++r)
    for (int s = 0; s < 4; ++s)
      coeff[r][s] = Quaternion::unit(s) * Quaternion::unit(r).conj();

  const MooreExpansion expansion(n);
  RealField out(g);
  double worst_defect = 0.0;
#pragma omp parallel
  {
    double local_defect = 0.0;
#pragma omp for schedule(static)
    for (std::ptrdiff_t flat_s = 0; flat_s < static_cast<std::ptrdiff_t>(g.total()); ++flat_s) {
      const std::size_t flat = static_cast<std::size_t>(flat_s);
      QuatMatrix H(n);
      for (int alpha = 0; alpha < n; ++alpha)
        for (int beta = 0; beta < n; ++beta) {
          Quaternion entry;
          for (int r = 0; r < 4; ++r)
            for (int s = 0; s < 4; ++s) {
              const double d =
                  hess[detail::sym_index(axes, 4 * alpha + r, 4 * beta + s)][flat];
              entry += d * coeff[r][s];
            }
          H.at(alpha, beta) = 0.25 * entry;
        }
      const double defect = H.hermitian_defect();
      if (defect > local_defect) local_defect = defect;
      // symmetrize away round-off and shift by the identity
      for (int a = 0; a < n; ++a) {
        H.at(a, a) = Quaternion(H.at(a, a).w + 1.0);
        for (int b = a + 1; b < n; ++b) {
          const Quaternion avg = 0.5 * (H.at(a, b) + H.at(b, a).conj());
          H.at(a, b) = avg;
          H.at(b, a) = avg.conj();
        }
      }
      out[flat] = expansion.evaluate(H).w;
    }
#pragma omp critical
    if (local_defect > worst_defect) worst_defect = local_defect;
  }
  if (worst_defect > hermitian_tol)
    throw std::runtime_error("qma_moore_route: quaternionic Hessian is not hyperhermitian");
  return out;
}

// ---------------------------------------------------------------------------
// Positivity and the estimate quantities
// ---------------------------------------------------------------------------

struct PositivityResult {
  bool positive = false;
  double margin = 0.0;  ///< smallest eigenvalue of the reconstructed Hermitian form
};

/// Hermitian matrix of the underlying metric form at one grid point,
/// recovered from the skew coefficients by the J-table index shuffle:
/// G_{ab} = (-1)^b M_{a, partner(b)}; the reference potential gives the
/// identity.
inline Eigen::MatrixXcd hermitian_form_at(const HktFormField& M, std::size_t flat) {
  const int m = M.matrix_size();
  Eigen::MatrixXcd G(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      G(a, b) = StandardModel::j_sign(b) * M.at(flat, a, StandardModel::j_partner(b));
  return G;
}

/// Max deviation of the reconstructed form from Hermitian symmetry; a
/// discrete realization of the J-realness of the assembled coefficients.
inline double j_realness_defect(const HktFormField& M) {
  const GridSpec& g = M.grid();
  RealField defects(g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t flat = 0; flat < static_cast<std::ptrdiff_t>(g.total()); ++flat) {
    const Eigen::MatrixXcd G = hermitian_form_at(M, static_cast<std::size_t>(flat));
    defects[static_cast<std::size_t>(flat)] = (G - G.adjoint()).cwiseAbs().maxCoeff();
  }
  return max_abs(defects);
}

/// Positive definiteness of the assembled form: the minimum eigenvalue of
/// the reconstructed Hermitian matrix over the grid.
inline PositivityResult positivity_check(const HktFormField& M) {
  const GridSpec& g = M.grid();
  RealField minimum(g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t flat = 0; flat < static_cast<std::ptrdiff_t>(g.total()); ++flat) {
    Eigen::MatrixXcd G = hermitian_form_at(M, static_cast<std::size_t>(flat));
    G = 0.5 * (G + G.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(G, Eigen::EigenvaluesOnly);
    minimum[static_cast<std::size_t>(flat)] = eig.eigenvalues().minCoeff();
  }
  double margin = minimum[0];
  for (std::size_t i = 1; i < minimum.size(); ++i) margin = std::min(margin, minimum[i]);
  return PositivityResult{margin > 0.0, margin};
}

/// Gradient quantity from the defining wedge relation: the block-trace of
/// the wedge of the holomorphic and J-twisted differentials.  Coincides
/// with |d phi|^2 / 4 for the flat metric.
inline RealField beta_of(const RealField& phi) {
  const GridSpec& g = phi.grid();
  const int two_n = 2 * g.n;
  std::vector<ComplexField> dz;
  dz.reserve(two_n);
  for (int a = 0; a < two_n; ++a) dz.push_back(d_z(phi, a));
  std::vector<ComplexField> dzbar;
  dzbar.reserve(two_n);
  for (int a = 0; a < two_n; ++a) dzbar.push_back(d_zbar(phi, a));

  RealField beta(g);
  for (int i = 0; i < g.n; ++i) {
    // wedge coefficient on the (2i, 2i+1) slot:
    //   phi_{2i} (d_J phi)_{2i+1} - phi_{2i+1} (d_J phi)_{2i}
    // with (d_J phi)_{2i+1} = phi_{zbar(2i)}, (d_J phi)_{2i} = -phi_{zbar(2i+1)}
    const ComplexField& a0 = dz[2 * i];
    const ComplexField& a1 = dz[2 * i + 1];
    const ComplexField& b0 = dzbar[2 * i];
    const ComplexField& b1 = dzbar[2 * i + 1];
    for (std::size_t p = 0; p < beta.size(); ++p)
      beta[p] += (a0[p] * b0[p] + a1[p] * b1[p]).real();
  }
  return beta;
}

/// Cross-check expression for beta: |d phi|^2 / 4 from real derivatives.
inline RealField beta_gradient_expression(const RealField& phi) {
  const GridSpec& g = phi.grid();
  RealField out(g);
  for (int r = 0; r < g.axes(); ++r) {
    const RealField d = d_real(phi, r);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += 0.25 * d[p] * d[p];
  }
  return out;
}

/// Laplacian quantity eta = (sum_a phi_{a abar} + n) / n; positive whenever
/// the assembled form is positive, with mean exactly 1.
inline RealField eta_of(const RealField& phi) {
  const GridSpec& g = phi.grid();
  const Spectrum phi_hat = Spectrum::forward(phi);
  Spectrum s(g);
  const int two_n = 2 * g.n;
  detail::for_each_slot(g, [&](std::size_t flat, const int* idx) {
    const cplx c = phi_hat.coef(flat);
    if (c == cplx{}) return;
    cplx sym{};
    for (int a = 0; a < two_n; ++a)
      sym += phi_hat.mixed_hessian_symbol(a, a, idx);
    s.coef(flat) = c * sym;
  });
  RealField eta = s.inverse_real();
  const double inv_n = 1.0 / g.n;
  for (std::size_t p = 0; p < eta.size(); ++p) eta[p] = inv_n * eta[p] + 1.0;
  return eta;
}

/// Largest eigenvalue of the real 4n x 4n Hessian at each point (the flat
/// connection makes it the full covariant Hessian).
inline RealField theta_of(const RealField& phi) {
  const GridSpec& g = phi.grid();
  const int axes = g.axes();
  const std::vector<RealField> hess = detail::real_hessian_fields(phi);
  RealField out(g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t flat_s = 0; flat_s < static_cast<std::ptrdiff_t>(g.total()); ++flat_s) {
    const std::size_t flat = static_cast<std::size_t>(flat_s);
    Eigen::MatrixXd H(axes, axes);
    for (int a = 0; a < axes; ++a)
      for (int b = a; b < axes; ++b) {
        const double v = hess[detail::sym_index(axes, a, b)][flat];
        H(a, b) = v;
        H(b, a) = v;
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, Eigen::EigenvaluesOnly);
    out[flat] = eig.eigenvalues().maxCoeff();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

/// Variable-coefficient operator obtained by differentiating the Pfaffian
/// route at a fixed assembled form:
///   apply(psi) = scale(x) * tr(M(x)^{-1} P(psi)(x)) / 2
/// with P(psi) the perturbation assembly of psi.  With scale = 1 this is
/// the log-Pfaffian derivative (the Chern-Laplacian-type linearization);
/// with scale = Pf it is the Jacobian of the Pfaffian route itself.
class LinearizedOperator {
 public:
  LinearizedOperator(const HktFormField& M, const StandardModel& model,
                     const RealField* scale = nullptr)
      : model_(model), grid_(M.grid()), m_(M.matrix_size()) {
    // store C_{kl} = scale * (M^{-1})_{kl}; the inverse of a skew matrix is
    // skew, so the upper triangle suffices:
    //   tr(M^{-1} dM) / 2 = -sum_{k<l} (M^{-1})_{kl} dM_{kl}
    coeff_.assign(static_cast<std::size_t>(m_) * (m_ - 1) / 2, ComplexField(grid_));
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t flat_s = 0; flat_s < static_cast<std::ptrdiff_t>(grid_.total());
         ++flat_s) {
      const std::size_t flat = static_cast<std::size_t>(flat_s);
      const double s = scale ? (*scale)[flat] : 1.0;
      if (m_ == 2) {
        const cplx p = M.at(flat, 0, 1);
        coeff_[0][flat] = -s / p;
      } else {
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M.matrix_at(flat).dense());
        const Eigen::MatrixXcd inv = lu.inverse();
        std::size_t slot = 0;
        for (int k = 0; k < m_; ++k)
          for (int l = k + 1; l < m_; ++l) coeff_[slot++][flat] = s * inv(k, l);
      }
    }
  }

  const GridSpec& grid() const { return grid_; }

  RealField apply(const RealField& psi) const {
    const HktFormField P = assemble_perturbation(psi, model_);
    RealField out(grid_);
    std::size_t slot = 0;
    for (int k = 0; k < m_; ++k)
      for (int l = k + 1; l < m_; ++l) {
        const ComplexField& c = coeff_[slot++];
        const ComplexField& d = P.upper(k, l);
        for (std::size_t p = 0; p < out.size(); ++p) out[p] -= (c[p] * d[p]).real();
      }
    return out;
  }

 private:
  StandardModel model_;
  GridSpec grid_;
  int m_;
  std::vector<ComplexField> coeff_;
};

} // namespace qma
