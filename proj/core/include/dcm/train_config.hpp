#pragma once

#include "dcm/baseline_losses.hpp"
#include "dcm/corpus.hpp"
#include "dcm/distill_loss.hpp"
#include "dcm/mlr_loss.hpp"
#include "dcm/model.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <string_view>

namespace dcm {

enum class Stage { pretrain, finetune };

enum class PretrainObjective { mlr, bce, ranking, supcon, fat, vanilla_mlr };

std::string to_string(Stage stage);
std::string to_string(PretrainObjective objective);
Stage parse_stage(std::string_view text);
PretrainObjective parse_objective(std::string_view text);

struct AblationFlags {
  bool disable_sep = false;
  bool disable_com = false;
  bool disable_ord = false;
  bool fix_encoder = false;
  bool disable_kd = false;
};

struct TrainConfig {
  Stage stage = Stage::pretrain;
  int epochs = 5;
  int batch_size = 3;
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double warmup_fraction = 0.1;
  double grad_clip = 1.0;
  PretrainObjective objective = PretrainObjective::mlr;
  MlrHyper mlr;
  KdHyper kd;
  KdOptions kd_options;
  BaselineHyper baseline;
  std::uint64_t seed = 42;
  AblationFlags ablation;
  double finetune_data_fraction = 1.0;

  /// Full-scale settings: 5 epochs, batch 3, lr 2e-5 for pretraining;
  /// 20 epochs, batch 10, lr 5e-6 for fine-tuning.
  static TrainConfig defaults(Stage stage);

  /// Throws ConfigError on epochs < 1, batch_size < 1, learning_rate <= 0 or
  /// an out-of-range hyperparameter.
  void validate() const;
};

/// Everything a CLI run needs besides data paths.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  ScoreScale scale;
  int min_freq = 1;
};

/// Applies one key/value assignment. Throws ConfigError for unknown keys or
/// unparsable values. "seed" sets both the training and model-init seed.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Parses "key = value" lines; '#' starts a comment, blank lines are ignored.
RunConfig parse_run_config(std::istream& in, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Canonical "key = value" rendering; parse_run_config reads it back.
std::string to_key_values(const RunConfig& config);

/// FNV-1a of the canonical rendering.
std::uint64_t config_hash(const RunConfig& config);

}  // namespace dcm
