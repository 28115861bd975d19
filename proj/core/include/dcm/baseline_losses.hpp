#pragma once

// Comparison pre-training objectives. Score-based losses (BCE, margin
// ranking, vanilla multi-level ranking) consume a ScoreGrid; SupCon and FAT
// consume pooled encoder features. Every loss optionally returns its gradient
// w.r.t. its inputs.

#include "dcm/autograd.hpp"
#include "dcm/loss_types.hpp"

#include <vector>

namespace dcm {

struct BaselineHyper {
  double ranking_margin = 0.3;
  double supcon_temperature = 0.07;
  double fat_margin = 0.5;

  void validate() const;
};

/// Highest level as positives, every lower level as negatives.
struct TwoLevelView {
  std::vector<double> positives;
  std::vector<double> negatives;

  static TwoLevelView from(const ScoreGrid& grid);
  /// Maps a view-shaped gradient back onto the grid layout it was built from.
  ScoreGrid scatter(const ScoreGrid& layout) const;
};

/// features.levels[j][k] is the pooled feature of response k at level j + 1.
struct FeatureGrid {
  std::vector<std::vector<Vector>> levels;

  FeatureGrid zeros_like() const;
  /// Copy with every vector scaled to unit L2 norm.
  FeatureGrid normalized() const;
};

/// Mean binary cross-entropy with targets 1 for positives and 0 for negatives.
double bce_loss(const TwoLevelView& view, TwoLevelView* grad = nullptr);

/// Mean over all (positive, negative) pairs of max(0, margin - (pos - neg)).
double margin_ranking_loss(const TwoLevelView& view, double margin, TwoLevelView* grad = nullptr);

/// Supervised contrastive loss with levels as classes, on cosine similarity
/// of normalized features. Anchors without a same-level partner are skipped;
/// the result is the mean over the remaining anchors. Throws ShapeError if no
/// anchor is valid.
double supcon_loss(const FeatureGrid& features, double temperature, FeatureGrid* grad = nullptr);

/// Point-to-cluster triplet relaxation: sum over anchors a of level j of
/// max(0, margin + |a - c_j|^2 - min_{l != j} |a - c_l|^2) with c the level
/// centroids in feature space.
double fat_loss(const FeatureGrid& features, double margin, FeatureGrid* grad = nullptr);

/// Mean over every level pair j < l and every cross pair of responses of
/// max(0, margin - (s_l - s_j)).
double vanilla_mlr_loss(const ScoreGrid& grid, double margin, ScoreGrid* grad = nullptr);

}  // namespace dcm
