#pragma once
// Tiny corpora and models shared by the unit tests.

#include "dcm/corpus.hpp"
#include "dcm/model.hpp"
#include "dcm/synthetic.hpp"
#include "dcm/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace dcm::test {

inline SyntheticSpec small_spec() {
  SyntheticSpec spec;
  spec.responses_per_level = 2;
  spec.filler_vocab = 12;
  return spec;
}

struct Toy {
  std::vector<MultiLevelExample> pretrain_raw;
  std::vector<ScoredPair> ratings_raw;
  Vocabulary vocab;
  ModelConfig model;
  std::vector<EncodedExample> pretrain;
  std::vector<EncodedScoredPair> ratings;
};

/// Small but complete pipeline inputs: 6 examples of 3 levels x 2 responses
/// and 12 rated pairs on a 16-dim, single-layer encoder.
inline Toy make_toy(std::uint64_t seed = 3, std::size_t examples = 6, std::size_t rated = 12) {
  Toy t;
  const SyntheticSpec spec = small_spec();
  t.pretrain_raw = synthesize_pretrain_corpus(examples, spec, seed);
  t.ratings_raw = synthesize_ratings(rated, spec, seed + 1);
  t.vocab = build_vocab(t.pretrain_raw, t.ratings_raw, 1);
  t.model.vocab_size = static_cast<int>(t.vocab.size());
  t.model.hidden_dim = 16;
  t.model.num_layers = 1;
  t.model.num_heads = 2;
  t.model.ffn_dim = 32;
  t.model.max_seq_len = 40;
  t.model.dropout = 0.0;
  t.model.mlp_hidden_dims = {8, 4};
  t.model.seed = seed;
  t.pretrain = encode_corpus(t.pretrain_raw, t.vocab, t.model.max_seq_len);
  t.ratings = encode_corpus(t.ratings_raw, t.vocab, t.model.max_seq_len);
  return t;
}

inline TrainConfig quick_config(Stage stage) {
  TrainConfig c = TrainConfig::defaults(stage);
  c.epochs = 2;
  c.batch_size = stage == Stage::pretrain ? 2 : 4;
  c.learning_rate = 1e-3;
  c.seed = 11;
  return c;
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("dcm_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool same_weights(const MetricModel& a, const MetricModel& b) {
  if (a.parameters().size() != b.parameters().size()) return false;
  for (std::size_t i = 0; i < a.parameters().size(); ++i)
    if (a.parameters()[i].value != b.parameters()[i].value) return false;
  return true;
}

}  // namespace dcm::test
