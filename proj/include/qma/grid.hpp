#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qma {

/// Uniform sampling grid on the unit torus T^{4n}.
///
/// The torus carries n quaternionic dimensions, i.e. 4n real coordinate
/// axes x_0 ... x_{4n-1}, each of period 1 and sampled at the same number
/// of points N.  Fields are stored row-major over the axes (axis 0
/// slowest), matching the on-disk QMAF layout.
struct GridSpec {
  int n = 1;               ///< quaternionic dimension
  int points_per_axis = 4; ///< N, identical on all 4n axes

  GridSpec() = default;
  GridSpec(int n_, int points) : n(n_), points_per_axis(points) { validate(); }

  /// Internal factory for spectral work grids (3/2-rule padding can be odd);
  /// user-facing grids go through the validating constructor.
  static GridSpec unchecked(int n_, int points) {
    GridSpec g;
    g.n = n_;
    g.points_per_axis = points;
    return g;
  }

  int axes() const { return 4 * n; }

  std::size_t total() const {
    std::size_t t = 1;
    for (int a = 0; a < axes(); ++a) t *= static_cast<std::size_t>(points_per_axis);
    return t;
  }

  void validate() const {
    if (n < 1) throw std::invalid_argument("GridSpec: quaternionic dimension must be >= 1");
    if (points_per_axis < 4 || points_per_axis % 2 != 0)
      throw std::invalid_argument("GridSpec: points per axis must be even and >= 4");
    // N^{4n} must fit the index type
    const std::size_t limit = SIZE_MAX / 2;
    std::size_t t = 1;
    for (int a = 0; a < axes(); ++a) {
      if (t > limit / static_cast<std::size_t>(points_per_axis))
        throw std::invalid_argument("GridSpec: grid too large for index type");
      t *= static_cast<std::size_t>(points_per_axis);
    }
  }

  bool operator==(const GridSpec&) const = default;

  std::vector<int> dims() const { return std::vector<int>(axes(), points_per_axis); }

  /// Decompose a flat index into per-axis indices (axis 0 slowest).
  void unravel(std::size_t flat, int* idx) const {
    for (int a = axes() - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(flat % points_per_axis);
      flat /= points_per_axis;
    }
  }

  std::size_t ravel(const int* idx) const {
    std::size_t flat = 0;
    for (int a = 0; a < axes(); ++a)
      flat = flat * points_per_axis + static_cast<std::size_t>(idx[a]);
    return flat;
  }

  /// Coordinate of grid node i along one axis, in [0,1).
  double coordinate(int axis_index) const {
    return static_cast<double>(axis_index) / points_per_axis;
  }

  /// Signed integer frequency of spectral slot m on one axis:
  /// m for m <= N/2, m - N otherwise (slot N/2 is the Nyquist mode).
  int frequency(int slot) const {
    return slot <= points_per_axis / 2 ? slot : slot - points_per_axis;
  }
};

} // namespace qma
