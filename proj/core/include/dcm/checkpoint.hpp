#pragma once

#include "dcm/corpus.hpp"
#include "dcm/model.hpp"
#include "dcm/optimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace dcm {

enum class TrainingStage { initialized, pretrained, finetuned };

std::string to_string(TrainingStage stage);
TrainingStage parse_training_stage(const std::string& text);

/// Binary container: magic, format version, JSON config block, named float64
/// tensors (optionally followed by optimizer moments) and an FNV-1a trailer
/// over every preceding byte.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  ModelConfig config;
  std::vector<NamedTensor> weights;
  TrainingStage stage = TrainingStage::initialized;
  std::optional<OptimizerState> optimizer;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws FormatError on truncation, checksum mismatch or unknown version.
Checkpoint read_checkpoint(const std::filesystem::path& path);

void save_checkpoint(const MetricModel& model, const std::filesystem::path& path,
                     TrainingStage stage = TrainingStage::initialized,
                     const OptimizerState* optimizer = nullptr);

/// When a vocabulary is given its size must equal the checkpoint's vocab_size.
MetricModel load_checkpoint(const std::filesystem::path& path, const Vocabulary* vocab = nullptr);

}  // namespace dcm
