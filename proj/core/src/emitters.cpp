#include "dcm/emitters.hpp"

#include "dcm/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace dcm {
namespace {

using json = nlohmann::json;

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& doc) {
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

/// Data rows of a CSV after checking the header.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path, const std::string& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw FormatError(path.string() + ": expected header '" + header + "'");
  }
  std::vector<std::vector<std::string>> rows;
  const std::size_t width = static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != width) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                        " fields");
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

double parse_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw FormatError("bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw FormatError("bad number '" + s + "'");
  }
}

int parse_level(const std::string& s) {
  const double v = parse_number(s);
  if (v != std::floor(v) || v < 1) throw FormatError("bad level label '" + s + "'");
  return static_cast<int>(v);
}

std::vector<LevelSummary> summarize(const std::vector<std::pair<int, double>>& samples) {
  std::map<int, std::vector<double>> by_level;
  for (const auto& [level, score] : samples) by_level[level].push_back(score);
  std::vector<LevelSummary> out;
  for (auto& [level, scores] : by_level) out.push_back({level, scores.size(), quantiles(scores)});
  return out;
}

json quantiles_json(const Quantiles& q) {
  return {{"min", q.min}, {"q25", q.q25}, {"median", q.median}, {"q75", q.q75}, {"max", q.max}};
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  return p.replace_extension(".json");
}

Quantiles quantiles(std::vector<double> values) {
  if (values.empty()) throw ShapeError("quantiles of an empty sample");
  std::sort(values.begin(), values.end());
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

int check_dump_schema(const std::filesystem::path& sidecar) {
  const json doc = read_json(sidecar);
  if (!doc.is_object() || !doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
    throw FormatError(sidecar.string() + ": missing schema_version");
  }
  const int version = doc["schema_version"].get<int>();
  if (version > kDumpSchemaVersion) {
    throw FormatError(sidecar.string() + ": schema_version " + std::to_string(version) +
                      " is newer than supported version " + std::to_string(kDumpSchemaVersion));
  }
  if (version < 1) throw FormatError(sidecar.string() + ": invalid schema_version");
  return version;
}

// ---------------------------------------------------------------------------
// Score distributions

ScoreDistributionDump score_distribution(const MetricModel& model, std::span<const EncodedExample> corpus) {
  if (corpus.empty()) throw ShapeError("score distribution of an empty corpus");
  ScoreDistributionDump dump;
  for (const auto& ex : corpus)
    for (std::size_t j = 0; j < ex.pairs.size(); ++j)
      for (const auto& pair : ex.pairs[j]) dump.samples.emplace_back(static_cast<int>(j) + 1, model.score(pair));
  dump.levels = summarize(dump.samples);
  return dump;
}

void write_score_distribution(const ScoreDistributionDump& dump, const std::filesystem::path& out_path) {
  {
    auto out = open_out(out_path);
    out << "level,score\n";
    for (const auto& [level, score] : dump.samples) out << level << ',' << format_double(score) << '\n';
  }
  json levels = json::array();
  for (const auto& l : dump.levels) {
    json entry = quantiles_json(l.quantiles);
    entry["level"] = l.level;
    entry["count"] = l.count;
    levels.push_back(entry);
  }
  write_json(sidecar_path(out_path),
             {{"schema_version", kDumpSchemaVersion}, {"kind", "score_distribution"}, {"levels", levels}});
}

ScoreDistributionDump emit_score_distribution(const MetricModel& model, std::span<const EncodedExample> corpus,
                                              const std::filesystem::path& out_path) {
  ScoreDistributionDump dump = score_distribution(model, corpus);
  write_score_distribution(dump, out_path);
  return dump;
}

ScoreDistributionDump read_score_distribution(const std::filesystem::path& csv_path) {
  check_dump_schema(sidecar_path(csv_path));
  ScoreDistributionDump dump;
  for (const auto& row : read_csv(csv_path, "level,score")) {
    dump.samples.emplace_back(parse_level(row[0]), parse_number(row[1]));
  }
  if (dump.samples.empty()) throw FormatError(csv_path.string() + ": no samples");
  dump.levels = summarize(dump.samples);
  return dump;
}

void render_score_distribution(const ScoreDistributionDump& dump, std::ostream& out, int width) {
  width = std::max(width, 10);
  const auto col = [&](double v) {
    return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * (width - 1)));
  };
  char buf[128];
  for (const auto& l : dump.levels) {
    std::string bar(static_cast<std::size_t>(width), ' ');
    const Quantiles& q = l.quantiles;
    for (int c = col(q.min); c <= col(q.max); ++c) bar[static_cast<std::size_t>(c)] = '-';
    for (int c = col(q.q25); c <= col(q.q75); ++c) bar[static_cast<std::size_t>(c)] = '=';
    bar[static_cast<std::size_t>(col(q.median))] = '|';
    std::snprintf(buf, sizeof buf, "level %d  n=%-5zu  median %.3f  ", l.level, l.count, q.median);
    out << buf << '[' << bar << "]\n";
  }
}

// ---------------------------------------------------------------------------
// Feature projections

FeatureProjectionDump feature_projection(const MetricModel& model, std::span<const EncodedExample> corpus) {
  std::vector<int> levels;
  std::vector<RowVector> rows;
  for (const auto& ex : corpus)
    for (std::size_t j = 0; j < ex.pairs.size(); ++j)
      for (const auto& pair : ex.pairs[j]) {
        levels.push_back(static_cast<int>(j) + 1);
        rows.push_back(model.trace(pair).pooled());
      }
  if (rows.size() < 3) throw ShapeError("feature projection needs at least 3 points");
  Matrix features(static_cast<Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) features.row(static_cast<Index>(i)) = rows[i];
  const Projection p = pca_2d(features);
  return {std::move(levels), p.coordinates, p.explained_variance};
}

void write_feature_projection(const FeatureProjectionDump& dump, const std::filesystem::path& out_path) {
  if (dump.coordinates.cols() != 2 || static_cast<std::size_t>(dump.coordinates.rows()) != dump.levels.size()) {
    throw ShapeError("feature projection dump must hold one 2-D point per label");
  }
  {
    auto out = open_out(out_path);
    out << "level,x,y\n";
    for (std::size_t i = 0; i < dump.levels.size(); ++i) {
      const auto r = static_cast<Index>(i);
      out << dump.levels[i] << ',' << format_double(dump.coordinates(r, 0)) << ','
          << format_double(dump.coordinates(r, 1)) << '\n';
    }
  }
  write_json(sidecar_path(out_path), {{"schema_version", kDumpSchemaVersion},
                                      {"kind", "feature_projection"},
                                      {"method", "PCA"},
                                      {"points", dump.levels.size()},
                                      {"explained_variance", {dump.explained_variance[0], dump.explained_variance[1]}}});
}

FeatureProjectionDump emit_feature_projection(const MetricModel& model, std::span<const EncodedExample> corpus,
                                              const std::filesystem::path& out_path) {
  FeatureProjectionDump dump = feature_projection(model, corpus);
  write_feature_projection(dump, out_path);
  return dump;
}

FeatureProjectionDump read_feature_projection(const std::filesystem::path& csv_path) {
  check_dump_schema(sidecar_path(csv_path));
  const json meta = read_json(sidecar_path(csv_path));
  FeatureProjectionDump dump;
  const auto rows = read_csv(csv_path, "level,x,y");
  dump.coordinates.resize(static_cast<Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    dump.levels.push_back(parse_level(rows[i][0]));
    dump.coordinates(static_cast<Index>(i), 0) = parse_number(rows[i][1]);
    dump.coordinates(static_cast<Index>(i), 1) = parse_number(rows[i][2]);
  }
  try {
    const auto ev = meta.at("explained_variance");
    dump.explained_variance = {ev.at(0).get<double>(), ev.at(1).get<double>()};
  } catch (const json::exception& e) {
    throw FormatError(csv_path.string() + ": bad projection metadata: " + e.what());
  }
  return dump;
}

// ---------------------------------------------------------------------------
// Sweep curves

void write_sweep_curves(const SweepReport& report, std::ostream& out) {
  if (report.rows.empty()) throw ShapeError("sweep report is empty");
  std::vector<SweepRow> rows = report.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.fraction < b.fraction; });
  out << "objective,fraction,avg_correlation\n";
  for (const auto& r : rows) {
    out << to_string(r.objective) << ',' << format_double(r.fraction) << ',' << format_double(r.report.average) << '\n';
  }
}

void emit_sweep_curves(const SweepReport& report, const std::filesystem::path& out_path) {
  std::ostringstream buf;
  write_sweep_curves(report, buf);
  auto out = open_out(out_path);
  out << buf.str();
}

}  // namespace dcm
