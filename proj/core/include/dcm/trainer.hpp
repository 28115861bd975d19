#pragma once

#include "dcm/corpus.hpp"
#include "dcm/loss_types.hpp"
#include "dcm/model.hpp"
#include "dcm/optimizer.hpp"
#include "dcm/train_config.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace dcm {

struct StepRecord {
  long step = 0;
  LossReport report;
};

struct EpochSummary {
  int epoch = 0;
  double train_mean = 0.0;
  std::optional<double> validation;
};

/// Append-only training history.
class TrainLog {
 public:
  /// Throws std::logic_error unless step exceeds every recorded step.
  void append(StepRecord record);
  void append(EpochSummary summary) { epochs_.push_back(summary); }

  const std::vector<StepRecord>& steps() const { return steps_; }
  const std::vector<EpochSummary>& epochs() const { return epochs_; }

  double wall_seconds = 0.0;
  std::uint64_t config_hash = 0;

  /// One {"step": n, "components": {...}, "total": x} object per line.
  void write_jsonl(std::ostream& out) const;

 private:
  std::vector<StepRecord> steps_;
  std::vector<EpochSummary> epochs_;
};

struct TrainResult {
  /// Weights after the last executed step.
  MetricModel last;
  /// Lowest-validation-loss epoch; absent without a validation set.
  std::optional<MetricModel> best;
  int best_epoch = -1;
  TrainLog log;
  OptimizerState optimizer;

  const MetricModel& selected() const { return best ? *best : last; }
};

struct PretrainOptions {
  std::span<const EncodedExample> validation;
  /// Continue a run whose optimizer state was checkpointed; the model passed
  /// to pretrain() must be the matching checkpointed weights.
  std::optional<OptimizerState> resume;
  /// Stop once this many optimizer steps have been taken in total (< 0: run
  /// every epoch).
  long stop_after_step = -1;
  std::function<void(const StepRecord&)> on_step;
};

/// Multi-level ranking pre-training (or one of the comparison objectives
/// selected by config.objective). Each step scores every response of
/// batch_size examples, evaluates the objective on the resulting grids and
/// takes one Adam step. Throws DivergenceError on a non-finite loss.
TrainResult pretrain(const MetricModel& model, std::span<const EncodedExample> corpus,
                     const TrainConfig& config, const PretrainOptions& options = {});

struct FinetuneOptions {
  std::span<const EncodedScoredPair> validation;
  /// Resume: student weights and optimizer state from a checkpoint.
  std::optional<MetricModel> student;
  std::optional<OptimizerState> resume;
  long stop_after_step = -1;
  std::function<void(const StepRecord&)> on_step;
};

/// Distillation-regularized fine-tuning of a clone of the teacher. The
/// teacher is never modified. disable_kd forces beta to zero and fix_encoder
/// freezes every "encoder." tensor.
TrainResult finetune(const MetricModel& teacher, std::span<const EncodedScoredPair> corpus,
                     const TrainConfig& config, const FinetuneOptions& options = {});

/// Deterministic subset of [0, n): the first max(1, floor(fraction * n))
/// entries of a seeded permutation, returned sorted. Smaller fractions with
/// the same seed yield subsets of larger ones.
std::vector<std::size_t> subsample_indices(std::size_t n, double fraction, std::uint64_t seed);

/// Mean-over-batch value of the configured pretraining objective, evaluated in
/// inference mode (used for validation).
double pretrain_objective_value(const MetricModel& model, std::span<const EncodedExample> data,
                                const TrainConfig& config);

/// Mean kd-mse value of student against teacher in inference mode.
double finetune_objective_value(const MetricModel& teacher, const MetricModel& student,
                                std::span<const EncodedScoredPair> data, const TrainConfig& config);

}  // namespace dcm
