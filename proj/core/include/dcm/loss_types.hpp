#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dcm {

/// Predicted scores of one dialogue example: levels[j][k] is the score of
/// response k at coherence level j + 1.
struct ScoreGrid {
  std::vector<std::vector<double>> levels;

  int num_levels() const { return static_cast<int>(levels.size()); }
  /// Same shape, all zeros.
  ScoreGrid zeros_like() const;
};

/// Named loss components and their (weighted) total for one batch.
struct LossReport {
  std::vector<std::pair<std::string, double>> components;
  double total = 0.0;

  /// Throws std::out_of_range for unknown names.
  double component(std::string_view name) const;
};

}  // namespace dcm
