#pragma once

#include "dcm/autograd.hpp"
#include "dcm/corpus.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dcm {

struct ModelConfig {
  int vocab_size = 0;
  int hidden_dim = 64;
  int num_layers = 2;
  int num_heads = 2;
  int ffn_dim = 128;
  int max_seq_len = 64;
  double dropout = 0.1;
  std::pair<int, int> mlp_hidden_dims{32, 16};
  std::uint64_t seed = 0;

  /// Throws ConfigError on non-positive dimensions, heads not dividing
  /// hidden_dim, or dropout outside [0, 1).
  void validate() const;
  int head_dim() const { return hidden_dim / num_heads; }
};

bool operator==(const ModelConfig& a, const ModelConfig& b);

struct NamedTensor {
  std::string name;
  Matrix value;
};

/// Intermediate values of one forward pass, indexed the way the distillation
/// objective consumes them.
struct ForwardTrace {
  /// layer_outputs[0] is the embedding-layer output, [1..T] the transformer
  /// layer outputs (each sequence x hidden) and [T+1] the 1 x 1 pre-sigmoid
  /// scorer output.
  std::vector<Matrix> layer_outputs;
  /// attention[t-1][h]: pre-softmax scores of head h in layer t (sequence x
  /// sequence), including the additive mask fill on padded keys.
  std::vector<std::vector<Matrix>> attention;
  std::vector<int> attention_mask;
  double logit = 0.0;
  double score = 0.0;

  int num_layers() const { return static_cast<int>(attention.size()); }
  /// First-token vector of the last transformer layer.
  RowVector pooled() const { return layer_outputs[attention.size()].row(0); }
};

/// Tape handles mirroring ForwardTrace, for gradient seeding.
struct ForwardGraph {
  std::vector<Var> layer_outputs;
  std::vector<std::vector<Var>> attention;
  Var pooled;
  Var logit;
  Var score;
};

/// Transformer encoder over [CLS] c [SEP] r [SEP] followed by a three-layer
/// scorer (elu, elu, sigmoid) on the [CLS] vector of the last layer.
class MetricModel {
 public:
  /// Additive fill applied to attention scores of padded keys.
  static constexpr double kMaskFill = -10000.0;

  /// Seeded random initialization; identical seeds give identical weights.
  explicit MetricModel(const ModelConfig& config);
  /// Adopts existing weights; names and shapes must match the config layout.
  MetricModel(const ModelConfig& config, std::vector<NamedTensor> weights);

  const ModelConfig& config() const { return config_; }
  std::span<const NamedTensor> parameters() const { return params_; }
  std::span<NamedTensor> parameters() { return params_; }
  const Matrix& parameter(std::string_view name) const;
  std::size_t parameter_count() const;
  /// True for every tensor under "encoder.".
  bool is_encoder_parameter(std::size_t index) const;

  /// Inference-mode score in (0, 1). Throws ShapeError if the input exceeds
  /// max_seq_len.
  double score(const EncodedPair& pair) const;
  ForwardTrace trace(const EncodedPair& pair) const;

  /// Records one forward pass on the tape. Dropout is applied only when
  /// dropout_rng is non-null and the configured rate is positive.
  ForwardGraph forward(Tape& tape, const EncodedPair& pair,
                       std::mt19937_64* dropout_rng = nullptr) const;

  /// Runs only the scorer on row 0 of a final-layer output matrix.
  double score_from_hidden(const Matrix& final_layer) const;

  /// Zero gradient buffers shaped like parameters().
  std::vector<Matrix> zero_gradients() const;

  /// FNV-1a over every parameter's bytes.
  std::uint64_t checksum() const;

 private:
  struct LayerSlots {
    std::size_t q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
    std::size_t attn_norm_g, attn_norm_b;
    std::size_t ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
    std::size_t ffn_norm_g, ffn_norm_b;
  };
  struct Slots {
    std::size_t token, position, segment, emb_norm_g, emb_norm_b;
    std::vector<LayerSlots> layers;
    std::size_t scorer_w[3], scorer_b[3];
  };

  static std::vector<std::pair<std::string, std::pair<Index, Index>>> layout(const ModelConfig& config);
  void bind_slots();
  Var param(Tape& tape, std::size_t slot) const;
  ForwardGraph run(Tape& tape, const EncodedPair& pair, std::mt19937_64* dropout_rng) const;

  ModelConfig config_;
  std::vector<NamedTensor> params_;
  Slots slots_{};
};

MetricModel init_model(const ModelConfig& config);
/// Deep copy; the result shares no storage with the source.
MetricModel clone_model(const MetricModel& model);
double forward_score(const MetricModel& model, const EncodedPair& pair);
ForwardTrace forward_trace(const MetricModel& model, const EncodedPair& pair);

}  // namespace dcm
