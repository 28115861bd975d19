#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dcm {

enum class CorrelationMethod { pearson, spearman, kendall };

std::string to_string(CorrelationMethod method);
CorrelationMethod parse_correlation_method(std::string_view text);

struct Correlation {
  double coefficient = 0.0;
  /// Two-sided p-value of the null hypothesis of no association.
  double p_value = 1.0;
};

/// Pearson: covariance over the product of standard deviations, t-test.
/// Spearman: Pearson on average ranks, t-test. Kendall: tau-b with tie
/// corrections, normal approximation with tie-corrected variance.
/// Requires equal lengths >= 3 and finite entries (ShapeError); throws
/// CorrelationError "undefined correlation" if either input is constant.
Correlation correlate(std::span<const double> x, std::span<const double> y, CorrelationMethod method);

/// Fractional ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

/// p-values above this threshold are flagged as not significant.
inline constexpr double kSignificanceLevel = 0.05;

struct CorrelationReport {
  double pearson = 0.0;
  double spearman = 0.0;
  double kendall = 0.0;
  /// Mean of the three coefficients.
  double average = 0.0;
  /// Ordered pearson, spearman, kendall.
  std::array<double, 3> p_values{1.0, 1.0, 1.0};
  int n = 0;

  double coefficient(CorrelationMethod method) const;
  double p_value(CorrelationMethod method) const;
  bool significant(CorrelationMethod method) const { return p_value(method) <= kSignificanceLevel; }
};

CorrelationReport correlation_report(std::span<const double> x, std::span<const double> y);

}  // namespace dcm
