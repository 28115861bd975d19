#include "dcm/synthetic.hpp"

#include "dcm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dcm {
namespace {

std::string filler(std::mt19937_64& rng, int vocab) {
  std::uniform_int_distribution<int> pick(0, vocab - 1);
  return "w" + std::to_string(pick(rng));
}

Utterance utterance(std::mt19937_64& rng, const SyntheticSpec& spec) {
  std::uniform_int_distribution<int> len(spec.min_utterance_len, spec.max_utterance_len);
  const int n = len(rng);
  Utterance out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += filler(rng, spec.filler_vocab);
  }
  return out;
}

std::vector<Utterance> context(std::mt19937_64& rng, const SyntheticSpec& spec) {
  std::vector<Utterance> out;
  for (int i = 0; i < spec.context_utterances; ++i) out.push_back(utterance(rng, spec));
  return out;
}

/// Markers (one level each) shuffled among fillers.
Utterance response(std::mt19937_64& rng, const SyntheticSpec& spec, const std::vector<int>& marker_levels,
                   int pool_size) {
  std::vector<std::string> tokens;
  std::uniform_int_distribution<int> pick(0, pool_size - 1);
  for (int level : marker_levels) tokens.push_back(marker_token(level, pick(rng)));
  for (int i = 0; i < spec.fillers_per_response; ++i) tokens.push_back(filler(rng, spec.filler_vocab));
  std::shuffle(tokens.begin(), tokens.end(), rng);
  Utterance out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (num_levels < 2) throw ConfigError("synthetic corpus needs at least two levels");
  if (responses_per_level < 1 || markers_per_level < 1 || markers_per_response < 1 || filler_vocab < 1 ||
      context_utterances < 1 || min_utterance_len < 1 || max_utterance_len < min_utterance_len ||
      fillers_per_response < 0 || preferred_fillers < 0 || preferred_fillers > filler_vocab) {
    throw ConfigError("synthetic corpus sizes must be positive");
  }
  if (!(rating_noise >= 0.0)) throw ConfigError("rating_noise must be non-negative");
  if (!(marker_fraction > 0.0 && marker_fraction <= 1.0)) throw ConfigError("marker_fraction must lie in (0, 1]");
  if (!(scale.max > scale.min)) throw ConfigError("score scale must have max > min");
}

std::string marker_token(int level, int index) {
  return "m" + std::to_string(level) + "k" + std::to_string(index);
}

std::vector<MultiLevelExample> synthesize_pretrain_corpus(std::size_t n, const SyntheticSpec& spec,
                                                          std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<MultiLevelExample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    MultiLevelExample ex;
    ex.context = context(rng, spec);
    for (int j = 1; j <= spec.num_levels; ++j) {
      auto& level = ex.responses.emplace_back();
      const std::vector<int> markers(static_cast<std::size_t>(spec.markers_per_response), j);
      for (int k = 0; k < spec.responses_per_level; ++k) {
        level.push_back(response(rng, spec, markers, spec.markers_per_level));
      }
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<ScoredPair> synthesize_ratings(std::size_t n, const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const int pool = std::max(1, static_cast<int>(std::ceil(spec.marker_fraction * spec.markers_per_level)));
  const double top = static_cast<double>(spec.num_levels);
  std::uniform_real_distribution<double> latent(1.0, top);
  std::normal_distribution<double> jitter(0.0, 0.35);
  std::normal_distribution<double> noise(0.0, spec.rating_noise);

  std::vector<ScoredPair> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double q = latent(rng);
    std::vector<int> levels;
    double level_sum = 0.0;
    for (int m = 0; m < spec.markers_per_response; ++m) {
      const int level = std::clamp(static_cast<int>(std::lround(q + jitter(rng))), 1, spec.num_levels);
      levels.push_back(level);
      level_sum += level;
    }
    const double mean_level = level_sum / static_cast<double>(levels.size());
    ScoredPair pair;
    pair.context = context(rng, spec);
    pair.response = response(rng, spec, levels, pool);

    double human = spec.scale.min + (spec.scale.max - spec.scale.min) * (mean_level - 1.0) / (top - 1.0);
    for (const auto& token : BasicTokenizer{}.tokenize(pair.response)) {
      if (token[0] == 'w' && std::stoi(token.substr(1)) < spec.preferred_fillers) human += spec.preference_weight;
    }
    human = std::round(std::clamp(human + noise(rng), spec.scale.min, spec.scale.max));
    pair.human_score = human;
    pair.normalized_score = spec.scale.normalize(human);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace dcm
