#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dcm {

/// A single utterance; non-empty after trimming whitespace.
using Utterance = std::string;

/// One context with graded candidate responses. responses[j] holds the
/// responses of coherence level j + 1; higher levels are more coherent.
struct MultiLevelExample {
  std::vector<Utterance> context;
  std::vector<std::vector<Utterance>> responses;

  int num_levels() const { return static_cast<int>(responses.size()); }
};

/// A human-rated context/response pair.
struct ScoredPair {
  std::vector<Utterance> context;
  Utterance response;
  double human_score = 0.0;
  double normalized_score = 0.0;
};

/// Likert bounds used to map human scores onto [0, 1].
struct ScoreScale {
  double min = 1.0;
  double max = 5.0;

  double normalize(double human) const { return (human - min) / (max - min); }
  double denormalize(double unit) const { return min + unit * (max - min); }
};

// ---------------------------------------------------------------------------
// Tokenization

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
};

/// Lower-cases ASCII letters and splits on whitespace; every ASCII punctuation
/// character becomes its own token. The reserved literals [PAD], [UNK], [CLS]
/// and [SEP] are kept verbatim so decoded sequences re-encode identically.
class BasicTokenizer final : public Tokenizer {
 public:
  std::vector<std::string> tokenize(std::string_view text) const override;
};

// ---------------------------------------------------------------------------
// Vocabulary

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kNumReserved = 4;

  /// Reserved tokens only.
  Vocabulary();
  /// tokens[i] is the token with id i; the first four must be the reserved
  /// tokens in order and every token must be unique.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  int id(std::string_view token) const;
  const std::string& token(int id) const;
  bool contains(std::string_view token) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  static const std::vector<std::string>& reserved_tokens();

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Counts tokens over contexts and responses and keeps those with frequency
/// >= min_freq, ordered by frequency (descending) then lexicographically.
Vocabulary build_vocab(std::span<const MultiLevelExample> corpus, int min_freq,
                       const Tokenizer& tokenizer = BasicTokenizer{});
Vocabulary build_vocab(std::span<const MultiLevelExample> corpus,
                       std::span<const ScoredPair> extra, int min_freq,
                       const Tokenizer& tokenizer = BasicTokenizer{});

// ---------------------------------------------------------------------------
// Encoding

/// [CLS] context [SEP] response [SEP] followed by padding up to max_seq_len.
struct EncodedPair {
  std::vector<int> token_ids;
  std::vector<int> segment_ids;
  std::vector<int> attention_mask;
  /// Number of non-pad positions.
  int length = 0;

  std::size_t padded_size() const { return token_ids.size(); }
  /// Copy without trailing padding.
  EncodedPair trimmed() const;
  /// Copy padded (or trimmed) to exactly n positions; n >= length.
  EncodedPair padded_to(std::size_t n) const;
};

/// Context utterances are joined with a single space. Over-long inputs drop
/// context tokens from the front first, then response tokens from the end;
/// the response always keeps at least one token. Requires max_seq_len >= 8.
EncodedPair encode_pair(std::span<const Utterance> context, const Utterance& response,
                        const Vocabulary& vocab, int max_seq_len,
                        const Tokenizer& tokenizer = BasicTokenizer{});

struct DecodedPair {
  std::string context;
  std::string response;
};

/// Inverse of encode_pair up to tokenization: tokens joined with spaces.
DecodedPair decode_pair(const EncodedPair& pair, const Vocabulary& vocab);

/// Pre-encoded pretraining example: pairs[j][k] is response k of level j + 1.
struct EncodedExample {
  std::vector<std::vector<EncodedPair>> pairs;

  int num_levels() const { return static_cast<int>(pairs.size()); }
};

struct EncodedScoredPair {
  EncodedPair pair;
  double human_score = 0.0;
  double normalized_score = 0.0;
};

/// Encodes and strips trailing padding (the encoder is pad invariant).
std::vector<EncodedExample> encode_corpus(std::span<const MultiLevelExample> corpus,
                                          const Vocabulary& vocab, int max_seq_len,
                                          const Tokenizer& tokenizer = BasicTokenizer{});
std::vector<EncodedScoredPair> encode_corpus(std::span<const ScoredPair> corpus,
                                             const Vocabulary& vocab, int max_seq_len,
                                             const Tokenizer& tokenizer = BasicTokenizer{});

// ---------------------------------------------------------------------------
// Loading

/// One JSON object per line: {"context": [...], "responses": {"1": [...], ...}}.
/// Blank lines are skipped. Errors name the 1-based line number.
std::vector<MultiLevelExample> load_pretrain_corpus(const std::filesystem::path& path,
                                                    std::optional<int> expected_levels = {});
std::vector<MultiLevelExample> parse_pretrain_corpus(std::istream& in,
                                                     std::optional<int> expected_levels = {});

/// One JSON object per line: {"context": [...], "response": "...", "score": x}.
std::vector<ScoredPair> load_finetune_corpus(const std::filesystem::path& path,
                                             ScoreScale scale = {});
std::vector<ScoredPair> parse_finetune_corpus(std::istream& in, ScoreScale scale = {});

void write_pretrain_corpus(std::ostream& out, std::span<const MultiLevelExample> corpus);
void write_finetune_corpus(std::ostream& out, std::span<const ScoredPair> corpus);

/// Throws CorpusError if the example violates the MultiLevelExample invariants.
void validate(const MultiLevelExample& example);

}  // namespace dcm
