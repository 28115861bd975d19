#pragma once

#include "dcm/autograd.hpp"

#include <array>

namespace dcm {

struct Projection {
  /// n x 2 coordinates of the centered points on the top two components.
  Matrix coordinates;
  /// d x 2 unit principal axes; in each column the largest-magnitude entry is
  /// positive (earliest index wins ties).
  Matrix components;
  RowVector mean;
  /// Eigenvalue over total variance, non-increasing; zeros if every point
  /// coincides.
  std::array<double, 2> explained_variance{0.0, 0.0};
};

/// Principal-component projection of the rows of features onto two axes.
/// Requires at least 3 rows and 2 columns (ShapeError).
Projection pca_2d(const Matrix& features);

}  // namespace dcm
