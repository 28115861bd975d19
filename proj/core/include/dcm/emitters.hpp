#pragma once

#include "dcm/corpus.hpp"
#include "dcm/evaluation.hpp"
#include "dcm/model.hpp"
#include "dcm/projection.hpp"

#include <array>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace dcm {

/// Version written into every dump sidecar; readers reject newer versions.
inline constexpr int kDumpSchemaVersion = 1;

/// Shortest round-trip decimal rendering ("%.17g").
std::string format_double(double value);

/// The JSON sidecar of a CSV dump: same path with a ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

struct Quantiles {
  double min = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
  double max = 0.0;
};

/// Linear interpolation between order statistics; ShapeError when empty.
Quantiles quantiles(std::vector<double> values);

struct LevelSummary {
  int level = 0;
  std::size_t count = 0;
  Quantiles quantiles;
};

struct ScoreDistributionDump {
  /// (level, score) per scored pair, in corpus order.
  std::vector<std::pair<int, double>> samples;
  /// One entry per level, ascending.
  std::vector<LevelSummary> levels;
};

/// Scores every response of every example and groups by level.
ScoreDistributionDump score_distribution(const MetricModel& model, std::span<const EncodedExample> corpus);
/// Writes "level,score" CSV plus the quantile sidecar.
ScoreDistributionDump emit_score_distribution(const MetricModel& model, std::span<const EncodedExample> corpus,
                                              const std::filesystem::path& out_path);
void write_score_distribution(const ScoreDistributionDump& dump, const std::filesystem::path& out_path);
/// Throws FormatError on malformed files or a newer schema version.
ScoreDistributionDump read_score_distribution(const std::filesystem::path& csv_path);

struct FeatureProjectionDump {
  std::vector<int> levels;
  /// n x 2.
  Matrix coordinates;
  std::array<double, 2> explained_variance{0.0, 0.0};
};

/// PCA of the pooled final-layer features of every response.
FeatureProjectionDump feature_projection(const MetricModel& model, std::span<const EncodedExample> corpus);
/// Writes "level,x,y" CSV plus the projection-metadata sidecar.
FeatureProjectionDump emit_feature_projection(const MetricModel& model, std::span<const EncodedExample> corpus,
                                              const std::filesystem::path& out_path);
void write_feature_projection(const FeatureProjectionDump& dump, const std::filesystem::path& out_path);
FeatureProjectionDump read_feature_projection(const std::filesystem::path& csv_path);

/// "objective,fraction,avg_correlation", one row per (objective, fraction),
/// sorted by fraction ascending (objectives in first-appearance order within
/// a fraction). ShapeError on an empty report.
void emit_sweep_curves(const SweepReport& report, const std::filesystem::path& out_path);
void write_sweep_curves(const SweepReport& report, std::ostream& out);

/// Reads "schema_version" from a sidecar; FormatError if it is missing or
/// newer than kDumpSchemaVersion.
int check_dump_schema(const std::filesystem::path& sidecar);

/// Plain-text box summary of each level's quantiles on [0, 1].
void render_score_distribution(const ScoreDistributionDump& dump, std::ostream& out, int width = 50);

}  // namespace dcm
