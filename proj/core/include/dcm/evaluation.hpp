#pragma once

#include "dcm/correlation.hpp"
#include "dcm/corpus.hpp"
#include "dcm/model.hpp"
#include "dcm/train_config.hpp"

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dcm {

std::vector<double> score_all(const MetricModel& model, std::span<const EncodedScoredPair> data);

/// Correlates model scores with the raw human scores. A constant model output
/// raises CorrelationError naming the cause.
CorrelationReport evaluate_model(const MetricModel& model, std::span<const EncodedScoredPair> eval_set);

struct EvalSet {
  std::string name;
  std::vector<EncodedScoredPair> data;
};

/// Correlations of one model on several named datasets.
struct BenchmarkResult {
  std::string model_id;
  std::uint64_t config_hash = 0;
  std::vector<std::pair<std::string, CorrelationReport>> datasets;

  /// Throws ConfigError on a duplicate dataset name.
  void add(std::string dataset, const CorrelationReport& report);
  const CorrelationReport& at(std::string_view dataset) const;
};

/// {"results": [{"model", "config_hash", "datasets": {name: {...}}}]}.
void write_report_json(std::ostream& out, std::span<const BenchmarkResult> results);
/// One block per dataset with columns Pearson, Spearman, Kendall, Average;
/// coefficients whose p-value exceeds the significance level carry a '*'.
void write_report_table(std::ostream& out, std::span<const BenchmarkResult> results);

// ---------------------------------------------------------------------------
// Ablations

enum class AblationVariant { full, no_pretrain, no_sep, no_com, no_ord, no_kd_finetune };

std::string to_string(AblationVariant variant);
AblationVariant parse_ablation_variant(std::string_view text);
std::span<const AblationVariant> all_ablation_variants();

struct PipelineConfig {
  ModelConfig model;
  TrainConfig pretrain = TrainConfig::defaults(Stage::pretrain);
  TrainConfig finetune = TrainConfig::defaults(Stage::finetune);
};

/// Runs pretraining and fine-tuning once per variant and evaluates the final
/// model on every eval set. no-pretrain fine-tunes the freshly initialized
/// model (which is also its distillation teacher); no-kd-finetune evaluates
/// the pretrained model without a fine-tuning stage. Variants sharing a
/// pretraining configuration share the pretrained model.
std::vector<BenchmarkResult> run_ablation_suite(std::span<const EncodedExample> pretrain_corpus,
                                                std::span<const EncodedScoredPair> finetune_corpus,
                                                std::span<const EvalSet> eval_sets, const PipelineConfig& config,
                                                std::span<const AblationVariant> variants = all_ablation_variants());

// ---------------------------------------------------------------------------
// Data-fraction sweep

enum class FinetuneObjective { kd_mse, mse, mse_fix_encoder };

std::string to_string(FinetuneObjective objective);
FinetuneObjective parse_finetune_objective(std::string_view text);
std::span<const FinetuneObjective> all_finetune_objectives();

/// config with the objective's switches applied: mse forces beta to zero and
/// mse_fix_encoder additionally freezes the encoder.
TrainConfig finetune_config_for(const TrainConfig& config, FinetuneObjective objective);

struct SweepRow {
  FinetuneObjective objective = FinetuneObjective::kd_mse;
  double fraction = 1.0;
  std::size_t records = 0;
  CorrelationReport report;
};

struct SweepReport {
  std::vector<SweepRow> rows;

  /// Rows of one objective, in fraction order.
  std::vector<SweepRow> curve(FinetuneObjective objective) const;
};

/// For every objective and fraction: fine-tune the teacher on the seeded
/// subsample of the corpus and evaluate on eval_set. Throws ConfigError on an
/// empty, unsorted or out-of-range fraction list.
SweepReport run_data_fraction_sweep(const MetricModel& teacher, std::span<const EncodedScoredPair> corpus,
                                    std::span<const EncodedScoredPair> eval_set, const TrainConfig& config,
                                    std::span<const double> fractions,
                                    std::span<const FinetuneObjective> objectives = all_finetune_objectives());

}  // namespace dcm
