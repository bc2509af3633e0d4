#pragma once

#include <cmath>
#include <complex>
#include <ostream>

namespace qma {

/// Quaternion x0 + x1 i + x2 j + x3 k with the convention
/// i^2 = j^2 = k^2 = -1 and i j k = -1 (so i j = k).
struct Quaternion {
  double w = 0.0;  ///< real part
  double x = 0.0;  ///< i component
  double y = 0.0;  ///< j component
  double z = 0.0;  ///< k component

  constexpr Quaternion() = default;
  constexpr Quaternion(double w_, double x_ = 0.0, double y_ = 0.0, double z_ = 0.0)
      : w(w_), x(x_), y(y_), z(z_) {}

  static constexpr Quaternion unit(int r) {
    switch (r) {
      case 0: return Quaternion(1, 0, 0, 0);
      case 1: return Quaternion(0, 1, 0, 0);
      case 2: return Quaternion(0, 0, 1, 0);
      default: return Quaternion(0, 0, 0, 1);
    }
  }

  constexpr Quaternion conj() const { return Quaternion(w, -x, -y, -z); }
  double norm2() const { return w * w + x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm2()); }

  /// q = a + b j with a, b in C(i): a = w + x i, b = y + z i.
  std::complex<double> complex_a() const { return {w, x}; }
  std::complex<double> complex_b() const { return {y, z}; }

  constexpr Quaternion operator-() const { return Quaternion(-w, -x, -y, -z); }

  constexpr Quaternion& operator+=(const Quaternion& q) {
    w += q.w; x += q.x; y += q.y; z += q.z;
    return *this;
  }
  constexpr Quaternion& operator-=(const Quaternion& q) {
    w -= q.w; x -= q.x; y -= q.y; z -= q.z;
    return *this;
  }
  constexpr Quaternion& operator*=(double s) {
    w *= s; x *= s; y *= s; z *= s;
    return *this;
  }

  friend constexpr Quaternion operator+(Quaternion a, const Quaternion& b) { return a += b; }
  friend constexpr Quaternion operator-(Quaternion a, const Quaternion& b) { return a -= b; }
  friend constexpr Quaternion operator*(double s, Quaternion q) { return q *= s; }
  friend constexpr Quaternion operator*(Quaternion q, double s) { return q *= s; }

  friend std::ostream& operator<<(std::ostream& os, const Quaternion& q) {
    return os << q.w << (q.x < 0 ? "" : "+") << q.x << "i" << (q.y < 0 ? "" : "+") << q.y
              << "j" << (q.z < 0 ? "" : "+") << q.z << "k";
  }
};

/// Hamilton product under i j k = -1.
constexpr Quaternion quat_mul(const Quaternion& p, const Quaternion& q) {
  return Quaternion(p.w * q.w - p.x * q.x - p.y * q.y - p.z * q.z,
                    p.w * q.x + p.x * q.w + p.y * q.z - p.z * q.y,
                    p.w * q.y - p.x * q.z + p.y * q.w + p.z * q.x,
                    p.w * q.z + p.x * q.y - p.y * q.x + p.z * q.w);
}

constexpr Quaternion operator*(const Quaternion& p, const Quaternion& q) {
  return quat_mul(p, q);
}

inline double abs_diff(const Quaternion& p, const Quaternion& q) {
  return (p - q).norm();
}

} // namespace qma
