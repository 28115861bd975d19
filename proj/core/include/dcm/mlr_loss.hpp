#pragma once

#include "dcm/loss_types.hpp"

#include <span>
#include <vector>

namespace dcm {

struct MlrHyper {
  /// Separation margin per unit of level gap.
  double lambda = 0.3;
  /// Tolerated distance between a score and its level centroid.
  double mu = 0.1;

  /// Throws ConfigError unless lambda > 0 and mu >= 0.
  void validate() const;
  /// False when lambda <= mu; callers should warn.
  bool is_recommended() const { return lambda > mu; }
};

/// Which MLR components contribute to the total (ablation switches).
struct MlrTerms {
  bool separation = true;
  bool compactness = true;
  bool ordering = true;
};

/// Mean score per level. Throws ShapeError on an empty level.
std::vector<double> compute_centroids(const ScoreGrid& grid);

/// sum_{j<l} max(0, (l - j) * lambda - |e_j - e_l|)
double separation_loss(std::span<const double> centroids, const MlrHyper& hyper);

/// sum_j sum_k max(0, |e_j - s_jk| - mu)
double compactness_loss(const ScoreGrid& grid, std::span<const double> centroids, const MlrHyper& hyper);

/// sum_{j<l} max(0, e_j - e_l): penalizes a lower level scoring above a higher one.
double ordering_loss(std::span<const double> centroids);

struct MlrComponents {
  double separation = 0.0;
  double compactness = 0.0;
  double ordering = 0.0;
};

/// Components for one example. If grad is non-null it receives the gradient
/// of the enabled-component sum w.r.t. every score (hinge kinks take the
/// inactive side).
MlrComponents mlr_example_loss(const ScoreGrid& grid, const MlrHyper& hyper, const MlrTerms& terms = {},
                               ScoreGrid* grad = nullptr);

/// Batch mean of the per-example components. Disabled components are reported
/// as zero. grads, if given, is resized to one gradient grid per example.
LossReport mlr_loss(std::span<const ScoreGrid> grids, const MlrHyper& hyper, const MlrTerms& terms = {},
                    std::vector<ScoreGrid>* grads = nullptr);

}  // namespace dcm
