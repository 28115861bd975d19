#pragma once

#include "dcm/corpus.hpp"

#include <cstdint>
#include <vector>

namespace dcm {

/// Generator for separable toy corpora. A level-j response contains marker
/// tokens "m{j}k{i}" drawn from a pool owned by level j; everything else is
/// filler "w{n}" shared across levels, so the level is recoverable from the
/// response alone.
struct SyntheticSpec {
  int num_levels = 3;
  int responses_per_level = 5;
  int markers_per_level = 6;
  int markers_per_response = 2;
  int filler_vocab = 40;
  int context_utterances = 2;
  int min_utterance_len = 4;
  int max_utterance_len = 7;
  int fillers_per_response = 3;
  /// Standard deviation of the rating noise, in Likert points.
  double rating_noise = 0.4;
  /// Rated responses draw markers only from the first
  /// ceil(marker_fraction * markers_per_level) entries of each pool.
  double marker_fraction = 1.0;
  /// Raters add preference_weight Likert points for every occurrence of a
  /// filler "w0" .. "w{preferred_fillers - 1}" in the response; pretraining
  /// levels ignore these tokens.
  int preferred_fillers = 0;
  double preference_weight = 0.0;
  ScoreScale scale{};

  /// Throws ConfigError on non-positive sizes or fractions outside (0, 1].
  void validate() const;
};

std::string marker_token(int level, int index);

std::vector<MultiLevelExample> synthesize_pretrain_corpus(std::size_t n, const SyntheticSpec& spec,
                                                          std::uint64_t seed);

/// Rated pairs: a latent quality q uniform on [1, L] picks the marker levels
/// (q rounded with jitter, per marker); the human score is the affine image of
/// the mean marker level on the Likert scale plus Gaussian noise, clipped and
/// rounded to an integer rating. Preferred fillers shift the score before
/// the noise is added.
std::vector<ScoredPair> synthesize_ratings(std::size_t n, const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace dcm
