#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qma/fft.hpp"
#include "qma/grid.hpp"

namespace qma {

using cplx = std::complex<double>;

namespace detail {

/// Pairwise (cascade) summation: deterministic and accurate to
/// O(eps * log N), which the mean/normalization tolerances rely on.
template <class T>
T pairwise_sum(const T* data, std::size_t count) {
  if (count <= 8) {
    T s{};
    for (std::size_t i = 0; i < count; ++i) s += data[i];
    return s;
  }
  const std::size_t half = count / 2;
  return pairwise_sum(data, half) + pairwise_sum(data + half, count - half);
}

/// Walk all grid slots in storage order keeping the per-axis index vector
/// up to date (an odometer), calling fn(flat, idx).
template <class Fn>
void for_each_slot(const GridSpec& grid, Fn&& fn) {
  const int axes = grid.axes();
  const int N = grid.points_per_axis;
  std::vector<int> idx(axes, 0);
  const std::size_t total = grid.total();
  for (std::size_t flat = 0; flat < total; ++flat) {
    fn(flat, idx.data());
    for (int a = axes - 1; a >= 0; --a) {
      if (++idx[a] < N) break;
      idx[a] = 0;
    }
  }
}

} // namespace detail

/// Scalar field sampled on a GridSpec, row-major storage.
template <class T>
class BasicField {
 public:
  BasicField() = default;
  explicit BasicField(const GridSpec& grid, T fill = T{})
      : grid_(grid), values_(grid.total(), fill) {}
  BasicField(const GridSpec& grid, std::vector<T> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.total())
      throw std::invalid_argument("BasicField: value count does not match grid");
  }

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  T* data() { return values_.data(); }
  const T* data() const { return values_.data(); }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }
  const std::vector<T>& values() const { return values_; }

  BasicField& operator+=(const BasicField& o) {
    check_same_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  BasicField& operator-=(const BasicField& o) {
    check_same_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  BasicField& operator*=(T s) {
    for (auto& v : values_) v *= s;
    return *this;
  }

  friend BasicField operator+(BasicField a, const BasicField& b) { return a += b; }
  friend BasicField operator-(BasicField a, const BasicField& b) { return a -= b; }
  friend BasicField operator*(T s, BasicField a) { return a *= s; }

  void check_same_grid(const BasicField& o) const {
    if (!(grid_ == o.grid_)) throw std::invalid_argument("field grids differ");
  }

 private:
  GridSpec grid_;
  std::vector<T> values_;
};

using RealField = BasicField<double>;
using ComplexField = BasicField<cplx>;

inline ComplexField to_complex(const RealField& f) {
  ComplexField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i];
  return out;
}

inline RealField real_part(const ComplexField& f) {
  RealField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].real();
  return out;
}

inline RealField imag_part(const ComplexField& f) {
  RealField out(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = f[i].imag();
  return out;
}

inline double max_abs(const RealField& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i]));
  return m;
}

inline double max_abs(const ComplexField& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i]));
  return m;
}

/// Exact mean of the trigonometric interpolant (trapezoid sum on the torus).
template <class T>
T mean(const BasicField<T>& f) {
  return detail::pairwise_sum(f.data(), f.size()) /
         static_cast<double>(f.size());
}

/// Integral over the unit-volume torus; equals the mean.
template <class T>
T integral(const BasicField<T>& f) {
  return mean(f);
}

template <class T>
BasicField<T> mean_zero(BasicField<T> f) {
  const T m = mean(f);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] -= m;
  return f;
}

inline double dot(const RealField& a, const RealField& b) {
  a.check_same_grid(b);
  std::vector<double> prod(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) prod[i] = a[i] * b[i];
  return detail::pairwise_sum(prod.data(), prod.size());
}

inline double norm2(const RealField& a) { return std::sqrt(dot(a, a)); }

// ---------------------------------------------------------------------------
// Spectral calculus
// ---------------------------------------------------------------------------

/// Frequency-domain view of a field: normalized Fourier coefficients
/// c_k with f(x) = sum_k c_k exp(2 pi i k.x).
class Spectrum {
 public:
  static Spectrum forward(const ComplexField& f) {
    Spectrum s(f.grid());
    s.coef_ = f.values();
    detail::dft_forward(s.grid_.dims(), s.coef_.data(), s.coef_.data());
    const double scale = 1.0 / static_cast<double>(s.grid_.total());
    for (auto& c : s.coef_) c *= scale;
    return s;
  }

  static Spectrum forward(const RealField& f) { return forward(to_complex(f)); }

  explicit Spectrum(const GridSpec& grid) : grid_(grid), coef_(grid.total(), cplx{}) {}

  const GridSpec& grid() const { return grid_; }
  cplx& coef(std::size_t flat) { return coef_[flat]; }
  const cplx& coef(std::size_t flat) const { return coef_[flat]; }
  std::vector<cplx>& coefficients() { return coef_; }
  const std::vector<cplx>& coefficients() const { return coef_; }

  ComplexField inverse() const {
    std::vector<cplx> buf = coef_;
    detail::dft_backward(grid_.dims(), buf.data(), buf.data());
    return ComplexField(grid_, std::move(buf));
  }

  /// Inverse transform of a spectrum known to represent a real field.
  RealField inverse_real() const { return real_part(inverse()); }

  /// Symbol of d/dx_axis at a spectral slot: 2 pi i k, zero on the
  /// Nyquist slot.  This is the exact first derivative of the symmetric
  /// (Nyquist-split) trigonometric interpolant sampled back to the grid:
  /// the +-N/2 halves cancel.
  cplx d_real_symbol(int axis, const int* idx) const {
    const int slot = idx[axis];
    if (slot == grid_.points_per_axis / 2) return cplx{0.0, 0.0};
    return cplx{0.0, 2.0 * std::numbers::pi * grid_.frequency(slot)};
  }

  /// Symbol of the second derivative d/dx_p d/dx_q of the same interpolant.
  /// For p = q the +-N/2 halves reinforce, so the Nyquist slot keeps its
  /// full -(pi N)^2 weight; for p != q they cancel as in the first
  /// derivative.  This keeps pure second derivatives (hence the linearized
  /// operator) invertible on every nonconstant mode.
  cplx second_mixed_symbol(int p, int q, const int* idx) const {
    if (p == q) {
      const double k = 2.0 * std::numbers::pi * grid_.frequency(idx[p]);
      return cplx{-k * k, 0.0};
    }
    return d_real_symbol(p, idx) * d_real_symbol(q, idx);
  }

  /// Real-axis decomposition of d/dz_a = (d_u + eps i d_v) / 2.
  struct ZFactors {
    int u;
    int v;
    double eps;  ///< -1 for even indices, +1 for odd
  };
  static ZFactors z_factors(int a) {
    const int base = (a / 2) * 4 + (a % 2 == 0 ? 0 : 2);
    return {base, base + 1, a % 2 == 0 ? -1.0 : 1.0};
  }

  /// Symbol of the mixed complex Hessian d/dz_a d/dzbar_b built from the
  /// second-derivative symbols (d/dzbar_b carries the conjugate sign).
  cplx mixed_hessian_symbol(int a, int b, const int* idx) const {
    const ZFactors fa = z_factors(a);
    const ZFactors fb = z_factors(b);
    const cplx i{0.0, 1.0};
    return 0.25 * (second_mixed_symbol(fa.u, fb.u, idx) -
                   fb.eps * i * second_mixed_symbol(fa.u, fb.v, idx) +
                   fa.eps * i * second_mixed_symbol(fa.v, fb.u, idx) +
                   fa.eps * fb.eps * second_mixed_symbol(fa.v, fb.v, idx));
  }

  /// Multiply by the symbol of d/dx_axis.
  Spectrum& apply_d_real(int axis) {
    detail::for_each_slot(grid_, [&](std::size_t flat, const int* idx) {
      coef_[flat] *= d_real_symbol(axis, idx);
    });
    return *this;
  }

  /// d/dz_a: a = 2j  -> (d_{x_{4j}}   - i d_{x_{4j+1}}) / 2
  ///         a = 2j+1 -> (d_{x_{4j+2}} + i d_{x_{4j+3}}) / 2
  /// (signs forced by z_{2j} = x_{4j} + i x_{4j+1}, z_{2j+1} = x_{4j+2} - i x_{4j+3}).
  cplx d_z_symbol(int a, const int* idx) const {
    const int base = (a / 2) * 4 + (a % 2 == 0 ? 0 : 2);
    const cplx du = d_real_symbol(base, idx);
    const cplx dv = d_real_symbol(base + 1, idx);
    const double sgn = (a % 2 == 0) ? -1.0 : 1.0;
    return 0.5 * (du + sgn * cplx{0.0, 1.0} * dv);
  }

  cplx d_zbar_symbol(int a, const int* idx) const {
    const int base = (a / 2) * 4 + (a % 2 == 0 ? 0 : 2);
    const cplx du = d_real_symbol(base, idx);
    const cplx dv = d_real_symbol(base + 1, idx);
    const double sgn = (a % 2 == 0) ? 1.0 : -1.0;
    return 0.5 * (du + sgn * cplx{0.0, 1.0} * dv);
  }

  Spectrum& apply_d_z(int a) {
    detail::for_each_slot(grid_, [&](std::size_t flat, const int* idx) {
      coef_[flat] *= d_z_symbol(a, idx);
    });
    return *this;
  }

  Spectrum& apply_d_zbar(int a) {
    detail::for_each_slot(grid_, [&](std::size_t flat, const int* idx) {
      coef_[flat] *= d_zbar_symbol(a, idx);
    });
    return *this;
  }

 private:
  GridSpec grid_;
  std::vector<cplx> coef_;
};

/// Spectral derivative along a real axis.
template <class T>
BasicField<T> d_real(const BasicField<T>& f, int axis) {
  if (axis < 0 || axis >= f.grid().axes())
    throw std::invalid_argument("d_real: axis out of range");
  Spectrum s = Spectrum::forward(f);
  s.apply_d_real(axis);
  if constexpr (std::is_same_v<T, double>)
    return s.inverse_real();
  else
    return s.inverse();
}

template <class T>
ComplexField d_z(const BasicField<T>& f, int a) {
  if (a < 0 || a >= 2 * f.grid().n) throw std::invalid_argument("d_z: index out of range");
  Spectrum s = Spectrum::forward(f);
  s.apply_d_z(a);
  return s.inverse();
}

template <class T>
ComplexField d_zbar(const BasicField<T>& f, int a) {
  if (a < 0 || a >= 2 * f.grid().n) throw std::invalid_argument("d_zbar: index out of range");
  Spectrum s = Spectrum::forward(f);
  s.apply_d_zbar(a);
  return s.inverse();
}

// ---------------------------------------------------------------------------
// Quaternion-valued fields and the Cauchy-Riemann-Fueter derivatives
// ---------------------------------------------------------------------------

/// Field with values in H, stored as four real component fields
/// (1, i, j, k parts).
struct QuaternionField {
  RealField w, x, y, z;

  explicit QuaternionField(const GridSpec& grid) : w(grid), x(grid), y(grid), z(grid) {}
  QuaternionField(RealField w_, RealField x_, RealField y_, RealField z_)
      : w(std::move(w_)), x(std::move(x_)), y(std::move(y_)), z(std::move(z_)) {}

  const GridSpec& grid() const { return w.grid(); }

  double max_abs() const {
    return std::max(std::max(qma::max_abs(w), qma::max_abs(x)),
                    std::max(qma::max_abs(y), qma::max_abs(z)));
  }
};

/// df/dqbar_alpha = f_{x_{4a}} + i f_{x_{4a+1}} + j f_{x_{4a+2}} + k f_{x_{4a+3}}.
inline QuaternionField crf_dbar(const RealField& f, int alpha) {
  if (alpha < 0 || alpha >= f.grid().n)
    throw std::invalid_argument("crf_dbar: quaternionic index out of range");
  const int b = 4 * alpha;
  return QuaternionField(d_real(f, b), d_real(f, b + 1), d_real(f, b + 2), d_real(f, b + 3));
}

/// df/dq_alpha = f_{x_{4a}} - f_{x_{4a+1}} i - f_{x_{4a+2}} j - f_{x_{4a+3}} k.
inline QuaternionField crf_d(const RealField& f, int alpha) {
  if (alpha < 0 || alpha >= f.grid().n)
    throw std::invalid_argument("crf_d: quaternionic index out of range");
  const int b = 4 * alpha;
  return QuaternionField(d_real(f, b), -1.0 * d_real(f, b + 1), -1.0 * d_real(f, b + 2),
                         -1.0 * d_real(f, b + 3));
}

// ---------------------------------------------------------------------------
// Dealiased products (3/2 rule)
// ---------------------------------------------------------------------------

namespace detail {

inline GridSpec padded_grid(const GridSpec& g) {
  return GridSpec::unchecked(g.n, (3 * g.points_per_axis) / 2);
}

/// Zero-padding of a spectrum onto the 3/2 grid.  The Nyquist coefficient
/// is split evenly between +N/2 and -N/2 so that real fields stay real
/// and pad followed by truncate is the identity.
inline Spectrum pad_spectrum(const Spectrum& s) {
  const GridSpec& g = s.grid();
  const GridSpec pg = padded_grid(g);
  Spectrum out(pg);
  const int axes = g.axes();
  const int N = g.points_per_axis;
  const int M = pg.points_per_axis;
  std::vector<int> tgt(axes);
  // per-axis targets: (slot, weight) with at most two entries (Nyquist split)
  for_each_slot(g, [&](std::size_t flat, const int* idx) {
    const cplx c = s.coef(flat);
    if (c == cplx{}) return;
    // enumerate the 2^m Nyquist split combinations with an explicit stack
    int ny_axes[32];
    int ny_count = 0;
    double base_weight = 1.0;
    for (int a = 0; a < axes; ++a) {
      const int k = g.frequency(idx[a]);
      if (idx[a] == N / 2) {
        ny_axes[ny_count++] = a;
        base_weight *= 0.5;
      } else {
        tgt[a] = k >= 0 ? k : k + M;
      }
    }
    const int combos = 1 << ny_count;
    for (int mask = 0; mask < combos; ++mask) {
      for (int m = 0; m < ny_count; ++m) {
        const int a = ny_axes[m];
        const int k = (mask >> m & 1) ? N / 2 : -N / 2;
        tgt[a] = k >= 0 ? k : k + M;
      }
      out.coef(pg.ravel(tgt.data())) += base_weight * c;
    }
  });
  return out;
}

/// Truncation back to the base grid; the two split Nyquist slots are
/// recombined by summation.
inline Spectrum truncate_spectrum(const Spectrum& s, const GridSpec& g) {
  const GridSpec& pg = s.grid();
  Spectrum out(g);
  const int axes = g.axes();
  const int N = g.points_per_axis;
  const int M = pg.points_per_axis;
  std::vector<int> src(axes);
  for_each_slot(g, [&](std::size_t flat, const int* idx) {
    // sum over the source slots mapping to this retained mode
    int ny_axes[32];
    int ny_count = 0;
    for (int a = 0; a < axes; ++a) {
      const int k = g.frequency(idx[a]);
      if (idx[a] == N / 2) {
        ny_axes[ny_count++] = a;
      } else {
        src[a] = k >= 0 ? k : k + M;
      }
    }
    cplx sum{};
    const int combos = 1 << ny_count;
    for (int mask = 0; mask < combos; ++mask) {
      for (int m = 0; m < ny_count; ++m) {
        const int a = ny_axes[m];
        const int k = (mask >> m & 1) ? N / 2 : -N / 2;
        src[a] = k >= 0 ? k : k + M;
      }
      sum += s.coef(pg.ravel(src.data()));
    }
    out.coef(flat) = sum;
  });
  return out;
}

} // namespace detail

/// Pointwise product evaluated on a 3/2 zero-padded grid and truncated
/// back: quadratic products of full-spectrum inputs come back free of
/// aliased contamination in every retained mode.
inline ComplexField dealiased_product(const ComplexField& a, const ComplexField& b) {
  a.check_same_grid(b);
  Spectrum sa = detail::pad_spectrum(Spectrum::forward(a));
  ComplexField fa = sa.inverse();
  {
    Spectrum sb = detail::pad_spectrum(Spectrum::forward(b));
    ComplexField fb = sb.inverse();
    for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  }
  Spectrum prod = Spectrum::forward(fa);
  return detail::truncate_spectrum(prod, a.grid()).inverse();
}

inline RealField dealiased_product(const RealField& a, const RealField& b) {
  return real_part(dealiased_product(to_complex(a), to_complex(b)));
}

// ---------------------------------------------------------------------------
// Band-limited random fields
// ---------------------------------------------------------------------------

/// Random real field with modes |k_axis| <= max_k on every axis, zero mean,
/// scaled to the requested sup norm.  Slots are visited in a fixed order so
/// a seeded generator reproduces the field bit for bit.
inline RealField random_band_limited(const GridSpec& grid, int max_k,
                                     std::mt19937_64& rng, double sup_amplitude) {
  if (max_k < 0 || max_k >= grid.points_per_axis / 2)
    throw std::invalid_argument("random_band_limited: max_k out of range");
  Spectrum s(grid);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int axes = grid.axes();
  std::vector<int> k(axes, -max_k), slot(axes), nslot(axes);
  bool done = false;
  while (!done) {
    // canonical representative: first nonzero component positive
    int first = 0;
    for (int a = 0; a < axes; ++a) {
      if (k[a] != 0) {
        first = k[a];
        break;
      }
    }
    if (first > 0) {
      for (int a = 0; a < axes; ++a) {
        slot[a] = k[a] >= 0 ? k[a] : k[a] + grid.points_per_axis;
        nslot[a] = -k[a] >= 0 ? -k[a] : -k[a] + grid.points_per_axis;
      }
      const cplx c{unit(rng), unit(rng)};
      s.coef(grid.ravel(slot.data())) = c;
      s.coef(grid.ravel(nslot.data())) = std::conj(c);
    }
    // odometer over k in [-max_k, max_k]^{4n}
    done = true;
    for (int a = axes - 1; a >= 0; --a) {
      if (++k[a] <= max_k) {
        done = false;
        break;
      }
      k[a] = -max_k;
    }
  }
  RealField f = s.inverse_real();
  const double m = max_abs(f);
  if (m > 0.0) f *= sup_amplitude / m;
  return f;
}

} // namespace qma
