#pragma once

#include <algorithm>
#include <complex>
#include <stdexcept>
#include <vector>

#include "qma/quaternion.hpp"

namespace qma {

/// Dense n x n quaternionic matrix.  Vectors are right H-modules, so the
/// entries act as scalars from the left and matrix products compose in the
/// usual order.
class QuatMatrix {
 public:
  QuatMatrix() = default;
  explicit QuatMatrix(int n) : n_(n), entries_(static_cast<std::size_t>(n) * n) {}

  int size() const { return n_; }
  Quaternion& at(int r, int c) { return entries_[static_cast<std::size_t>(r) * n_ + c]; }
  const Quaternion& at(int r, int c) const {
    return entries_[static_cast<std::size_t>(r) * n_ + c];
  }

  static QuatMatrix identity(int n) {
    QuatMatrix m(n);
    for (int i = 0; i < n; ++i) m.at(i, i) = Quaternion(1.0);
    return m;
  }

  QuatMatrix operator*(const QuatMatrix& o) const {
    if (n_ != o.n_) throw std::invalid_argument("QuatMatrix: size mismatch");
    QuatMatrix r(n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        Quaternion s;
        for (int k = 0; k < n_; ++k) s += at(i, k) * o.at(k, j);
        r.at(i, j) = s;
      }
    return r;
  }

  /// Max entrywise deviation from the quaternionic conjugate transpose.
  double hermitian_defect() const {
    double d = 0.0;
    for (int r = 0; r < n_; ++r)
      for (int c = r; c < n_; ++c) {
        const double e = abs_diff(at(c, r), at(r, c).conj());
        if (e > d) d = e;
      }
    return d;
  }

 private:
  int n_ = 0;
  std::vector<Quaternion> entries_;
};

/// Complex embedding chi: each entry q = a + b j maps to the 2x2 block
/// [[a, b], [-conj(b), conj(a)]]; chi(AB) = chi(A) chi(B).
inline std::vector<std::complex<double>> complex_embed(const QuatMatrix& A) {
  const int n = A.size();
  const int m = 2 * n;
  std::vector<std::complex<double>> M(static_cast<std::size_t>(m) * m);
  auto put = [&](int r, int c, std::complex<double> v) {
    M[static_cast<std::size_t>(r) * m + c] = v;
  };
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const auto a = A.at(r, c).complex_a();
      const auto b = A.at(r, c).complex_b();
      put(2 * r, 2 * c, a);
      put(2 * r, 2 * c + 1, b);
      put(2 * r + 1, 2 * c, -std::conj(b));
      put(2 * r + 1, 2 * c + 1, std::conj(a));
    }
  return M;
}

/// Quaternionic matrix equal to its conjugate transpose.  chi of it is a
/// complex Hermitian 2n x 2n matrix and the Moore determinant is real.
class HyperhermitianMatrix {
 public:
  static constexpr double kSymmetryTol = 1e-12;

  explicit HyperhermitianMatrix(const QuatMatrix& A, double tol = kSymmetryTol) : A_(A) {
    if (A_.hermitian_defect() > tol)
      throw std::invalid_argument("HyperhermitianMatrix: input is not hyperhermitian");
    // exact symmetrization so downstream algebra sees the invariant exactly
    const int n = A_.size();
    for (int r = 0; r < n; ++r) {
      A_.at(r, r) = Quaternion(A_.at(r, r).w);
      for (int c = r + 1; c < n; ++c) {
        const Quaternion avg = 0.5 * (A_.at(r, c) + A_.at(c, r).conj());
        A_.at(r, c) = avg;
        A_.at(c, r) = avg.conj();
      }
    }
  }

  const QuatMatrix& matrix() const { return A_; }
  int size() const { return A_.size(); }

 private:
  QuatMatrix A_;
};

/// Precompiled cycle expansion of the Moore determinant for a fixed size.
///
/// Every permutation is decomposed into disjoint cycles; each cycle is
/// written with its smallest index first and the cycles are multiplied in
/// increasing order of their leading index.  The term for a cycle
/// (c0 c1 ... cm) is a_{c0 c1} a_{c1 c2} ... a_{cm c0}, and the permutation
/// contributes with its signature.  On hyperhermitian input the sum is real.
class MooreExpansion {
 public:
  explicit MooreExpansion(int n) : n_(n) { build(); }

  int size() const { return n_; }

  Quaternion evaluate(const QuatMatrix& A) const {
    Quaternion total;
    for (const Term& t : terms_) {
      Quaternion prod(1.0);
      for (std::size_t p = 0; p + 1 < t.path.size(); p += 2)
        prod = prod * A.at(t.path[p], t.path[p + 1]);
      total += t.sign * prod;
    }
    return total;
  }

 private:
  struct Term {
    double sign;
    std::vector<int> path;  // flattened (row, col) index pairs
  };

  void build() {
    const int n = n_;
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    do {
      Term term;
      std::vector<bool> seen(n, false);
      int cycles = 0;
      for (int start = 0; start < n; ++start) {
        if (seen[start]) continue;
        ++cycles;
        int i = start;
        do {
          const int j = p[i];
          term.path.push_back(i);
          term.path.push_back(j);
          seen[i] = true;
          i = j;
        } while (i != start);
      }
      term.sign = ((n - cycles) % 2 == 0) ? 1.0 : -1.0;
      terms_.push_back(std::move(term));
    } while (std::next_permutation(p.begin(), p.end()));
  }

  int n_;
  std::vector<Term> terms_;
};

/// Moore determinant of a hyperhermitian matrix via the ordered-cycle
/// permutation expansion.  Factorial cost; intended for small n.
inline double moore_det(const HyperhermitianMatrix& A) {
  const MooreExpansion expansion(A.size());
  return expansion.evaluate(A.matrix()).w;
}

} // namespace qma
