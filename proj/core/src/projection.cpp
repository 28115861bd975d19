#include "dcm/projection.hpp"

#include "dcm/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace dcm {

Projection pca_2d(const Matrix& features) {
  if (features.rows() < 3) throw ShapeError("projection needs at least 3 points");
  if (features.cols() < 2) throw ShapeError("projection needs at least 2 feature dimensions");
  if (!features.allFinite()) throw ShapeError("projection input has non-finite entries");

  Projection out;
  out.mean = features.colwise().mean();
  const Matrix centered = features.rowwise() - out.mean;
  const Matrix cov = (centered.transpose() * centered) / static_cast<double>(features.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw ShapeError("eigendecomposition failed");
  // eigenvalues ascend; take the last two
  const Index d = cov.rows();
  out.components.resize(d, 2);
  for (int c = 0; c < 2; ++c) {
    Vector axis = solver.eigenvectors().col(d - 1 - c);
    Index arg = 0;
    for (Index i = 1; i < d; ++i)
      if (std::fabs(axis(i)) > std::fabs(axis(arg))) arg = i;
    if (axis(arg) < 0.0) axis = -axis;
    out.components.col(c) = axis;
  }
  const double total = std::max(0.0, solver.eigenvalues().sum());
  if (total > 0.0) {
    for (int c = 0; c < 2; ++c) {
      out.explained_variance[static_cast<std::size_t>(c)] =
          std::clamp(solver.eigenvalues()(d - 1 - c) / total, 0.0, 1.0);
    }
  }
  out.coordinates = centered * out.components;
  return out;
}

}  // namespace dcm
