#include "dcm/evaluation.hpp"

#include "dcm/errors.hpp"
#include "dcm/trainer.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <optional>

namespace dcm {
namespace {

using json = nlohmann::json;

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string cell(double value, double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f%s", value, p > kSignificanceLevel ? "*" : "");
  return buf;
}

constexpr std::array kAblationVariants{AblationVariant::full,   AblationVariant::no_pretrain,
                                       AblationVariant::no_sep, AblationVariant::no_com,
                                       AblationVariant::no_ord, AblationVariant::no_kd_finetune};

constexpr std::array kFinetuneObjectives{FinetuneObjective::kd_mse, FinetuneObjective::mse,
                                         FinetuneObjective::mse_fix_encoder};

std::uint64_t pipeline_hash(const PipelineConfig& config, AblationVariant variant) {
  RunConfig pt{config.model, config.pretrain, {}, 1};
  RunConfig ft{config.model, config.finetune, {}, 1};
  return config_hash(pt) ^ (config_hash(ft) * 31) ^ static_cast<std::uint64_t>(variant);
}

}  // namespace

std::vector<double> score_all(const MetricModel& model, std::span<const EncodedScoredPair> data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& d : data) out.push_back(model.score(d.pair));
  return out;
}

CorrelationReport evaluate_model(const MetricModel& model, std::span<const EncodedScoredPair> eval_set) {
  if (eval_set.size() < 3) throw ShapeError("evaluate_model: at least 3 records required");
  const std::vector<double> scores = score_all(model, eval_set);
  std::vector<double> human;
  human.reserve(eval_set.size());
  for (const auto& d : eval_set) human.push_back(d.human_score);
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  if (*lo == *hi) {
    throw CorrelationError("undefined correlation: model output is constant (" + std::to_string(*lo) + ") over " +
                           std::to_string(scores.size()) + " records");
  }
  const auto [hlo, hhi] = std::minmax_element(human.begin(), human.end());
  if (*hlo == *hhi) throw CorrelationError("undefined correlation: human scores are constant");
  return correlation_report(scores, human);
}

void BenchmarkResult::add(std::string dataset, const CorrelationReport& report) {
  for (const auto& [name, _] : datasets) {
    if (name == dataset) throw ConfigError("duplicate dataset '" + dataset + "'");
  }
  datasets.emplace_back(std::move(dataset), report);
}

const CorrelationReport& BenchmarkResult::at(std::string_view dataset) const {
  for (const auto& [name, report] : datasets) {
    if (name == dataset) return report;
  }
  throw ConfigError("no dataset '" + std::string(dataset) + "'");
}

void write_report_json(std::ostream& out, std::span<const BenchmarkResult> results) {
  json doc{{"results", json::array()}};
  for (const auto& r : results) {
    json datasets = json::object();
    for (const auto& [name, c] : r.datasets) {
      datasets[name] = {{"pearson", c.pearson},
                        {"spearman", c.spearman},
                        {"kendall", c.kendall},
                        {"average", c.average},
                        {"p_values", {{"pearson", c.p_values[0]}, {"spearman", c.p_values[1]}, {"kendall", c.p_values[2]}}},
                        {"n", c.n}};
    }
    doc["results"].push_back({{"model", r.model_id}, {"config_hash", hex(r.config_hash)}, {"datasets", datasets}});
  }
  out << doc.dump(2) << '\n';
}

void write_report_table(std::ostream& out, std::span<const BenchmarkResult> results) {
  std::vector<std::string> names;
  for (const auto& r : results)
    for (const auto& [name, _] : r.datasets)
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);

  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.model_id.size());
  char line[256];
  for (const auto& name : names) {
    out << name << '\n';
    std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %9s  %9s\n", static_cast<int>(width), "model", "Pearson",
                  "Spearman", "Kendall", "Average");
    out << line;
    for (const auto& r : results) {
      const auto it = std::find_if(r.datasets.begin(), r.datasets.end(), [&](const auto& d) { return d.first == name; });
      if (it == r.datasets.end()) continue;
      const CorrelationReport& c = it->second;
      std::snprintf(line, sizeof line, "%-*s  %9s  %9s  %9s  %9.3f\n", static_cast<int>(width), r.model_id.c_str(),
                    cell(c.pearson, c.p_values[0]).c_str(), cell(c.spearman, c.p_values[1]).c_str(),
                    cell(c.kendall, c.p_values[2]).c_str(), c.average);
      out << line;
    }
    out << '\n';
  }
  out << "* p > " << kSignificanceLevel << " (not statistically significant)\n";
}

// ---------------------------------------------------------------------------

std::string to_string(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::full: return "full";
    case AblationVariant::no_pretrain: return "no-pretrain";
    case AblationVariant::no_sep: return "no-sep";
    case AblationVariant::no_com: return "no-com";
    case AblationVariant::no_ord: return "no-ord";
    case AblationVariant::no_kd_finetune: return "no-kd-finetune";
  }
  return "unknown";
}

AblationVariant parse_ablation_variant(std::string_view text) {
  for (AblationVariant v : kAblationVariants)
    if (to_string(v) == text) return v;
  throw ConfigError("unknown ablation variant '" + std::string(text) + "'");
}

std::span<const AblationVariant> all_ablation_variants() { return kAblationVariants; }

std::vector<BenchmarkResult> run_ablation_suite(std::span<const EncodedExample> pretrain_corpus,
                                                std::span<const EncodedScoredPair> finetune_corpus,
                                                std::span<const EvalSet> eval_sets, const PipelineConfig& config,
                                                std::span<const AblationVariant> variants) {
  if (eval_sets.empty()) throw ConfigError("ablation suite needs at least one eval set");
  const MetricModel initial = init_model(config.model);
  std::optional<MetricModel> full_teacher;
  std::vector<BenchmarkResult> out;

  for (AblationVariant variant : variants) {
    for (const auto& r : out)
      if (r.model_id == to_string(variant)) throw ConfigError("ablation variant listed twice");

    TrainConfig pt = config.pretrain;
    switch (variant) {
      case AblationVariant::no_sep: pt.ablation.disable_sep = true; break;
      case AblationVariant::no_com: pt.ablation.disable_com = true; break;
      case AblationVariant::no_ord: pt.ablation.disable_ord = true; break;
      default: break;
    }
    std::optional<MetricModel> teacher;
    if (variant == AblationVariant::no_pretrain) {
      teacher = initial;
    } else if (variant == AblationVariant::full || variant == AblationVariant::no_kd_finetune) {
      if (!full_teacher) full_teacher = pretrain(initial, pretrain_corpus, pt).selected();
      teacher = *full_teacher;
    } else {
      teacher = pretrain(initial, pretrain_corpus, pt).selected();
    }

    const MetricModel final_model = variant == AblationVariant::no_kd_finetune
                                        ? *teacher
                                        : finetune(*teacher, finetune_corpus, config.finetune).last;

    BenchmarkResult result;
    result.model_id = to_string(variant);
    result.config_hash = pipeline_hash(config, variant);
    for (const auto& set : eval_sets) result.add(set.name, evaluate_model(final_model, set.data));
    out.push_back(std::move(result));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(FinetuneObjective objective) {
  switch (objective) {
    case FinetuneObjective::kd_mse: return "kd_mse";
    case FinetuneObjective::mse: return "mse";
    case FinetuneObjective::mse_fix_encoder: return "mse_fix_encoder";
  }
  return "unknown";
}

FinetuneObjective parse_finetune_objective(std::string_view text) {
  for (FinetuneObjective o : kFinetuneObjectives)
    if (to_string(o) == text) return o;
  throw ConfigError("unknown fine-tuning objective '" + std::string(text) + "'");
}

std::span<const FinetuneObjective> all_finetune_objectives() { return kFinetuneObjectives; }

TrainConfig finetune_config_for(const TrainConfig& config, FinetuneObjective objective) {
  TrainConfig c = config;
  if (objective != FinetuneObjective::kd_mse) c.ablation.disable_kd = true;
  if (objective == FinetuneObjective::mse_fix_encoder) c.ablation.fix_encoder = true;
  return c;
}

std::vector<SweepRow> SweepReport::curve(FinetuneObjective objective) const {
  std::vector<SweepRow> out;
  for (const auto& r : rows)
    if (r.objective == objective) out.push_back(r);
  std::stable_sort(out.begin(), out.end(), [](const SweepRow& a, const SweepRow& b) { return a.fraction < b.fraction; });
  return out;
}

SweepReport run_data_fraction_sweep(const MetricModel& teacher, std::span<const EncodedScoredPair> corpus,
                                    std::span<const EncodedScoredPair> eval_set, const TrainConfig& config,
                                    std::span<const double> fractions, std::span<const FinetuneObjective> objectives) {
  if (fractions.empty()) throw ConfigError("sweep needs at least one fraction");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0 && fractions[i] <= 1.0)) throw ConfigError("sweep fractions must lie in (0, 1]");
    if (i > 0 && !(fractions[i] > fractions[i - 1])) throw ConfigError("sweep fractions must be strictly increasing");
  }
  if (objectives.empty()) throw ConfigError("sweep needs at least one objective");

  SweepReport report;
  for (FinetuneObjective objective : objectives) {
    for (double fraction : fractions) {
      TrainConfig c = finetune_config_for(config, objective);
      c.finetune_data_fraction = fraction;
      const TrainResult run = finetune(teacher, corpus, c);
      SweepRow row;
      row.objective = objective;
      row.fraction = fraction;
      row.records = subsample_indices(corpus.size(), fraction, c.seed).size();
      row.report = evaluate_model(run.last, eval_set);
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace dcm
