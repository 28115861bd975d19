#pragma once
// Shared pieces of the acceptance binaries: PASS/FAIL reporting, a wall
// clock, and the synthetic pipeline every end-to-end criterion runs on.

#include "dcm/evaluation.hpp"
#include "dcm/synthetic.hpp"
#include "dcm/trainer.hpp"

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

namespace dcm::acceptance {

class Checker {
 public:
  void check(const std::string& name, bool passed, const std::string& detail) {
    std::printf("%s %s: %s\n", passed ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    failed_ |= !passed;
  }
  int exit_code() const { return failed_ ? 1 : 0; }

 private:
  bool failed_ = false;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

/// Three levels of five responses; raters also reward eight filler tokens
/// that pretraining never sees as signal, so fine-tuning has something to learn.
inline SyntheticSpec world_spec() {
  SyntheticSpec spec;
  spec.preferred_fillers = 8;
  spec.preference_weight = 1.0;
  return spec;
}

/// Hidden 64, two layers, no dropout.
inline ModelConfig toy_model(const Vocabulary& vocab, std::uint64_t seed) {
  ModelConfig m;
  m.vocab_size = static_cast<int>(vocab.size());
  m.hidden_dim = 64;
  m.num_layers = 2;
  m.num_heads = 2;
  m.max_seq_len = 64;
  m.dropout = 0.0;
  m.seed = seed;
  return m;
}

/// Five epochs at batch 3. The rate is raised from the full-scale 2e-5
/// because a from-scratch toy encoder needs more steps than five epochs give.
inline TrainConfig toy_pretrain(std::uint64_t seed) {
  TrainConfig c = TrainConfig::defaults(Stage::pretrain);
  c.learning_rate = 1e-4;
  c.seed = seed;
  return c;
}

/// Twenty epochs at batch 10, alpha 1, beta 5.
inline TrainConfig toy_finetune(std::uint64_t seed) {
  TrainConfig c = TrainConfig::defaults(Stage::finetune);
  c.learning_rate = 3e-4;
  c.seed = seed;
  return c;
}

struct World {
  Vocabulary vocab;
  ModelConfig model;
  std::vector<EncodedExample> pretrain;
  std::vector<EncodedScoredPair> finetune;
  std::vector<EncodedScoredPair> eval;
};

/// Corpora for one seed: 60 pretraining examples, a rated fine-tuning set
/// and 200 held-out rated pairs drawn with the full marker pool.
inline World make_world(std::uint64_t seed, std::size_t finetune_records, double marker_fraction) {
  const SyntheticSpec spec = world_spec();
  SyntheticSpec ft_spec = spec;
  ft_spec.marker_fraction = marker_fraction;
  const auto pt = synthesize_pretrain_corpus(60, spec, seed * 100);
  const auto ft = synthesize_ratings(finetune_records, ft_spec, seed * 100 + 1);
  const auto ev = synthesize_ratings(200, spec, seed * 100 + 2);
  World w;
  w.vocab = build_vocab(pt, 1);
  w.model = toy_model(w.vocab, seed);
  w.pretrain = encode_corpus(pt, w.vocab, w.model.max_seq_len);
  w.finetune = encode_corpus(ft, w.vocab, w.model.max_seq_len);
  w.eval = encode_corpus(ev, w.vocab, w.model.max_seq_len);
  return w;
}

inline constexpr std::uint64_t kSeeds[] = {1, 2, 3};

}  // namespace dcm::acceptance
