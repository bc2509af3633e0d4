#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace qma {

struct singular_matrix_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Complex skew-symmetric 2n x 2n matrix.  Only the strict upper triangle
/// is stored; the lower triangle is materialized by negation, so M^T = -M
/// holds exactly by construction.
class SkewMatrix {
 public:
  SkewMatrix() = default;
  explicit SkewMatrix(int size) : size_(size), upper_(tri_count(size)) {
    if (size < 2 || size % 2 != 0)
      throw std::invalid_argument("SkewMatrix: size must be even and >= 2");
  }

  int size() const { return size_; }
  int half_size() const { return size_ / 2; }

  std::complex<double> at(int r, int c) const {
    if (r == c) return {};
    return r < c ? upper_[tri_index(r, c)] : -upper_[tri_index(c, r)];
  }

  /// Assign the strict-upper-triangle slot backing (r, c); r < c required.
  void set_upper(int r, int c, std::complex<double> v) {
    if (r >= c) throw std::invalid_argument("SkewMatrix::set_upper: need r < c");
    upper_[tri_index(r, c)] = v;
  }

  /// Assign entry (r, c) for any r != c, folding the sign into the stored slot.
  void set(int r, int c, std::complex<double> v) {
    if (r < c)
      upper_[tri_index(r, c)] = v;
    else if (r > c)
      upper_[tri_index(c, r)] = -v;
    else if (v != std::complex<double>{})
      throw std::invalid_argument("SkewMatrix::set: diagonal must stay zero");
  }

  Eigen::MatrixXcd dense() const {
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(size_, size_);
    for (int r = 0; r < size_; ++r)
      for (int c = r + 1; c < size_; ++c) {
        const auto v = upper_[tri_index(r, c)];
        M(r, c) = v;
        M(c, r) = -v;
      }
    return M;
  }

  static SkewMatrix from_dense(const Eigen::MatrixXcd& M) {
    SkewMatrix out(static_cast<int>(M.rows()));
    for (int r = 0; r < out.size_; ++r)
      for (int c = r + 1; c < out.size_; ++c) out.set_upper(r, c, M(r, c));
    return out;
  }

  SkewMatrix& operator+=(const SkewMatrix& o) {
    for (std::size_t i = 0; i < upper_.size(); ++i) upper_[i] += o.upper_[i];
    return *this;
  }
  SkewMatrix& operator*=(std::complex<double> s) {
    for (auto& v : upper_) v *= s;
    return *this;
  }

  /// Standard block form sum of e_{2i} ^ e_{2i+1}; its Pfaffian is +1.
  static SkewMatrix standard(int half) {
    SkewMatrix m(2 * half);
    for (int i = 0; i < half; ++i) m.set_upper(2 * i, 2 * i + 1, 1.0);
    return m;
  }

 private:
  static std::size_t tri_count(int size) {
    return static_cast<std::size_t>(size) * (size - 1) / 2;
  }
  std::size_t tri_index(int r, int c) const {
    // row-major strict upper triangle
    return static_cast<std::size_t>(r) * (2 * size_ - r - 1) / 2 + (c - r - 1);
  }

  int size_ = 0;
  std::vector<std::complex<double>> upper_;
};

namespace detail {

/// First-row expansion Pf(M) = sum_j (-1)^j m_{0j} Pf(M with rows/cols 0, j
/// removed), sign fixed so the standard block form gives +1.  Exponential
/// cost; production path for size <= 4, cross-check oracle above that.
inline std::complex<double> pfaffian_expand(const Eigen::MatrixXcd& M) {
  const int m = static_cast<int>(M.rows());
  if (m == 0) return 1.0;
  if (m == 2) return M(0, 1);
  std::complex<double> acc = 0.0;
  double sign = 1.0;
  for (int j = 1; j < m; ++j, sign = -sign) {
    if (M(0, j) != std::complex<double>{}) {
      Eigen::MatrixXcd sub(m - 2, m - 2);
      int rr = 0;
      for (int r = 1; r < m; ++r) {
        if (r == j) continue;
        int cc = 0;
        for (int c = 1; c < m; ++c) {
          if (c == j) continue;
          sub(rr, cc++) = M(r, c);
        }
        ++rr;
      }
      acc += sign * M(0, j) * pfaffian_expand(sub);
    }
  }
  return acc;
}

/// Parlett-Reid skew tridiagonalization with partial pivoting (largest
/// magnitude in the working column); the Pfaffian is the signed product of
/// the block superdiagonal entries.
inline std::complex<double> pfaffian_parlett_reid(Eigen::MatrixXcd M) {
  const int m = static_cast<int>(M.rows());
  std::complex<double> pf = 1.0;
  double sign = 1.0;
  for (int k = 0; k + 1 < m; k += 2) {
    // pivot: largest magnitude in column k below row k
    int p = k + 1;
    double best = std::abs(M(k + 1, k));
    for (int j = k + 2; j < m; ++j) {
      const double mag = std::abs(M(j, k));
      if (mag > best) {
        best = mag;
        p = j;
      }
    }
    if (best == 0.0) return 0.0;
    if (p != k + 1) {
      M.row(k + 1).swap(M.row(p));
      M.col(k + 1).swap(M.col(p));
      sign = -sign;
    }
    pf *= M(k, k + 1);
    if (k + 2 < m) {
      const std::complex<double> pivot = M(k + 1, k);
      for (int j = k + 2; j < m; ++j) {
        const std::complex<double> tau = M(j, k) / pivot;
        if (tau != std::complex<double>{}) {
          M.row(j) -= tau * M.row(k + 1);
          M.col(j) -= tau * M.col(k + 1);
        }
      }
    }
  }
  return sign * pf;
}

} // namespace detail

/// Pfaffian normalized so that Pf of the standard block form is +1.
/// Recursive expansion for 2n <= 4, Parlett-Reid with partial pivoting
/// beyond that.  The Pfaffian of a singular matrix is 0.
inline std::complex<double> pfaffian(const SkewMatrix& M) {
  if (M.size() <= 4) return detail::pfaffian_expand(M.dense());
  return detail::pfaffian_parlett_reid(M.dense());
}

/// Directional derivative of log Pf at M in direction dM:
///   d/dt log Pf(M + t dM) |_{t=0} = tr(M^{-1} dM) / 2.
/// Defined for every nonsingular skew M (not only positive Pfaffian).
inline std::complex<double> pf_log_derivative(const SkewMatrix& M, const SkewMatrix& dM) {
  if (M.size() != dM.size()) throw std::invalid_argument("pf_log_derivative: size mismatch");
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(M.dense());
  if (!lu.isInvertible()) throw singular_matrix_error("pf_log_derivative: singular matrix");
  const Eigen::MatrixXcd inv = lu.inverse();
  return 0.5 * (inv * dM.dense()).trace();
}

/// Second derivative of log Pf along a two-parameter family:
///   [tr(M^{-1} d2M_st) - tr(M^{-1} dM_s M^{-1} dM_t)] / 2.
inline std::complex<double> pf_log_second_derivative(const SkewMatrix& M,
                                                     const SkewMatrix& dM_s,
                                                     const SkewMatrix& dM_t,
                                                     const SkewMatrix& d2M_st) {
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(M.dense());
  if (!lu.isInvertible())
    throw singular_matrix_error("pf_log_second_derivative: singular matrix");
  const Eigen::MatrixXcd inv = lu.inverse();
  const Eigen::MatrixXcd s = inv * dM_s.dense();
  const Eigen::MatrixXcd t = inv * dM_t.dense();
  return 0.5 * ((inv * d2M_st.dense()).trace() - (s * t).trace());
}

} // namespace qma
