#include "dcm/corpus.hpp"

#include "dcm/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace dcm {
namespace {

using json = nlohmann::json;

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

bool is_ascii_punct(unsigned char c) { return c < 128 && std::ispunct(c) != 0; }

std::string line_prefix(std::size_t line) { return "line " + std::to_string(line) + ": "; }

std::vector<Utterance> read_utterances(const json& value, const char* field, std::size_t line) {
  if (!value.is_array()) {
    throw CorpusError(line_prefix(line) + "field '" + field + "' must be an array of strings");
  }
  std::vector<Utterance> out;
  out.reserve(value.size());
  for (const auto& item : value) {
    if (!item.is_string()) {
      throw CorpusError(line_prefix(line) + "field '" + field + "' must contain only strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

void check_utterance(const Utterance& u, std::size_t line, const char* what) {
  if (is_blank(u)) throw CorpusError(line_prefix(line) + "empty " + std::string(what));
}

int parse_level_key(const std::string& key, std::size_t line) {
  int level = 0;
  const auto* first = key.data();
  const auto* last = key.data() + key.size();
  auto [ptr, ec] = std::from_chars(first, last, level);
  if (ec != std::errc{} || ptr != last || level < 1) {
    throw CorpusError(line_prefix(line) + "invalid level key '" + key + "'");
  }
  return level;
}

MultiLevelExample parse_pretrain_record(const std::string& text, std::size_t line) {
  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CorpusError(line_prefix(line) + "malformed JSON (" + e.what() + ")");
  }
  if (!record.is_object() || !record.contains("context") || !record.contains("responses")) {
    throw CorpusError(line_prefix(line) + "expected object with 'context' and 'responses'");
  }
  MultiLevelExample ex;
  ex.context = read_utterances(record["context"], "context", line);

  const json& responses = record["responses"];
  if (!responses.is_object()) {
    throw CorpusError(line_prefix(line) + "'responses' must be an object keyed by level");
  }
  std::map<int, std::vector<Utterance>> by_level;
  for (const auto& [key, value] : responses.items()) {
    const int level = parse_level_key(key, line);
    if (by_level.count(level) != 0) {
      throw CorpusError(line_prefix(line) + "duplicate level " + std::to_string(level));
    }
    by_level[level] = read_utterances(value, "responses", line);
  }
  int expected = 1;
  for (auto& [level, list] : by_level) {
    if (level != expected) throw CorpusError(line_prefix(line) + "non-contiguous levels");
    ex.responses.push_back(std::move(list));
    ++expected;
  }
  try {
    validate(ex);
  } catch (const CorpusError& e) {
    throw CorpusError(line_prefix(line) + e.what());
  }
  return ex;
}

template <class Fn>
void for_each_line(std::istream& in, Fn&& fn) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (is_blank(text)) continue;
    fn(text, line);
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open " + path.string());
  return in;
}

void count_tokens(std::map<std::string, long>& counts, const Tokenizer& tokenizer,
                  std::string_view text) {
  for (auto& tok : tokenizer.tokenize(text)) ++counts[tok];
}

std::vector<int> to_ids(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

}  // namespace

void validate(const MultiLevelExample& example) {
  if (example.responses.size() < 2) {
    throw CorpusError("at least two coherence levels are required");
  }
  for (const auto& u : example.context) {
    if (is_blank(u)) throw CorpusError("empty context utterance");
  }
  for (std::size_t j = 0; j < example.responses.size(); ++j) {
    if (example.responses[j].empty()) {
      throw CorpusError("empty level " + std::to_string(j + 1));
    }
    for (const auto& r : example.responses[j]) {
      if (is_blank(r)) throw CorpusError("empty response at level " + std::to_string(j + 1));
    }
  }
}

// ---------------------------------------------------------------------------

std::vector<std::string> BasicTokenizer::tokenize(std::string_view text) const {
  static constexpr std::array<std::string_view, 4> kReserved = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == '[') {
      bool matched = false;
      for (auto r : kReserved) {
        if (text.substr(i, r.size()) == r) {
          flush();
          out.emplace_back(r);
          i += r.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (std::isspace(c)) {
      flush();
    } else if (is_ascii_punct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      current.push_back(c < 128 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
    }
    ++i;
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& Vocabulary::reserved_tokens() {
  static const std::vector<std::string> kTokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  return kTokens;
}

Vocabulary::Vocabulary() : Vocabulary(reserved_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  const auto& reserved = reserved_tokens();
  if (tokens_.size() < reserved.size() ||
      !std::equal(reserved.begin(), reserved.end(), tokens_.begin())) {
    throw CorpusError("vocabulary must start with [PAD], [UNK], [CLS], [SEP]");
  }
  ids_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) throw CorpusError("vocabulary contains an empty token");
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw CorpusError("duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
}

int Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw CorpusError("token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.count(std::string(token)) != 0;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary build_vocab(std::span<const MultiLevelExample> corpus, int min_freq,
                       const Tokenizer& tokenizer) {
  return build_vocab(corpus, {}, min_freq, tokenizer);
}

Vocabulary build_vocab(std::span<const MultiLevelExample> corpus, std::span<const ScoredPair> extra,
                       int min_freq, const Tokenizer& tokenizer) {
  if (corpus.empty() && extra.empty()) throw CorpusError("cannot build a vocabulary from an empty corpus");
  std::map<std::string, long> counts;
  for (const auto& ex : corpus) {
    for (const auto& u : ex.context) count_tokens(counts, tokenizer, u);
    for (const auto& level : ex.responses)
      for (const auto& r : level) count_tokens(counts, tokenizer, r);
  }
  for (const auto& p : extra) {
    for (const auto& u : p.context) count_tokens(counts, tokenizer, u);
    count_tokens(counts, tokenizer, p.response);
  }
  std::vector<std::pair<std::string, long>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq && !std::count(Vocabulary::reserved_tokens().begin(),
                                     Vocabulary::reserved_tokens().end(), tok)) {
      kept.emplace_back(tok, n);
    }
  }
  // std::map iteration is already lexicographic; stable sort keeps it for ties.
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = Vocabulary::reserved_tokens();
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary(std::move(tokens));
}

// ---------------------------------------------------------------------------

EncodedPair EncodedPair::trimmed() const { return padded_to(static_cast<std::size_t>(length)); }

EncodedPair EncodedPair::padded_to(std::size_t n) const {
  if (n < static_cast<std::size_t>(length)) throw CorpusError("padded_to: target shorter than content");
  EncodedPair out = *this;
  out.token_ids.resize(n, Vocabulary::kPad);
  out.segment_ids.resize(n, 0);
  out.attention_mask.resize(n, 0);
  return out;
}

EncodedPair encode_pair(std::span<const Utterance> context, const Utterance& response,
                        const Vocabulary& vocab, int max_seq_len, const Tokenizer& tokenizer) {
  if (max_seq_len < 8) throw CorpusError("max_seq_len must be at least 8");
  std::string joined;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i) joined += ' ';
    joined += context[i];
  }
  std::vector<int> ctx = to_ids(tokenizer.tokenize(joined), vocab);
  std::vector<int> rsp = to_ids(tokenizer.tokenize(response), vocab);

  const std::size_t budget = static_cast<std::size_t>(max_seq_len) - 3;
  if (rsp.size() > budget) rsp.resize(budget);
  const std::size_t ctx_budget = budget - rsp.size();
  if (ctx.size() > ctx_budget) ctx.erase(ctx.begin(), ctx.end() - static_cast<std::ptrdiff_t>(ctx_budget));

  EncodedPair out;
  out.token_ids.reserve(static_cast<std::size_t>(max_seq_len));
  out.token_ids.push_back(Vocabulary::kCls);
  out.token_ids.insert(out.token_ids.end(), ctx.begin(), ctx.end());
  out.token_ids.push_back(Vocabulary::kSep);
  const std::size_t first_segment = out.token_ids.size();
  out.token_ids.insert(out.token_ids.end(), rsp.begin(), rsp.end());
  out.token_ids.push_back(Vocabulary::kSep);
  out.length = static_cast<int>(out.token_ids.size());

  out.segment_ids.assign(out.token_ids.size(), 0);
  std::fill(out.segment_ids.begin() + static_cast<std::ptrdiff_t>(first_segment), out.segment_ids.end(), 1);
  out.attention_mask.assign(out.token_ids.size(), 1);
  return out.padded_to(static_cast<std::size_t>(max_seq_len));
}

DecodedPair decode_pair(const EncodedPair& pair, const Vocabulary& vocab) {
  DecodedPair out;
  int seps = 0;
  for (int i = 0; i < pair.length; ++i) {
    const int id = pair.token_ids[static_cast<std::size_t>(i)];
    if (id == Vocabulary::kCls && i == 0) continue;
    if (id == Vocabulary::kSep) {
      ++seps;
      continue;
    }
    std::string& dst = seps == 0 ? out.context : out.response;
    if (!dst.empty()) dst += ' ';
    dst += vocab.token(id);
  }
  return out;
}

std::vector<EncodedExample> encode_corpus(std::span<const MultiLevelExample> corpus,
                                          const Vocabulary& vocab, int max_seq_len,
                                          const Tokenizer& tokenizer) {
  std::vector<EncodedExample> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) {
    EncodedExample enc;
    for (const auto& level : ex.responses) {
      auto& dst = enc.pairs.emplace_back();
      for (const auto& r : level) {
        dst.push_back(encode_pair(ex.context, r, vocab, max_seq_len, tokenizer).trimmed());
      }
    }
    out.push_back(std::move(enc));
  }
  return out;
}

std::vector<EncodedScoredPair> encode_corpus(std::span<const ScoredPair> corpus,
                                             const Vocabulary& vocab, int max_seq_len,
                                             const Tokenizer& tokenizer) {
  std::vector<EncodedScoredPair> out;
  out.reserve(corpus.size());
  for (const auto& p : corpus) {
    out.push_back({encode_pair(p.context, p.response, vocab, max_seq_len, tokenizer).trimmed(),
                   p.human_score, p.normalized_score});
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<MultiLevelExample> parse_pretrain_corpus(std::istream& in,
                                                     std::optional<int> expected_levels) {
  std::vector<MultiLevelExample> out;
  for_each_line(in, [&](const std::string& text, std::size_t line) {
    auto ex = parse_pretrain_record(text, line);
    if (expected_levels && ex.num_levels() != *expected_levels) {
      throw CorpusError(line_prefix(line) + "expected " + std::to_string(*expected_levels) +
                        " levels, found " + std::to_string(ex.num_levels()));
    }
    out.push_back(std::move(ex));
  });
  return out;
}

std::vector<MultiLevelExample> load_pretrain_corpus(const std::filesystem::path& path,
                                                    std::optional<int> expected_levels) {
  std::ifstream in = open_or_throw(path);
  return parse_pretrain_corpus(in, expected_levels);
}

std::vector<ScoredPair> parse_finetune_corpus(std::istream& in, ScoreScale scale) {
  if (!(scale.max > scale.min)) throw CorpusError("score_max must exceed score_min");
  std::vector<ScoredPair> out;
  for_each_line(in, [&](const std::string& text, std::size_t line) {
    json record;
    try {
      record = json::parse(text);
    } catch (const json::parse_error& e) {
      throw CorpusError(line_prefix(line) + "malformed JSON (" + e.what() + ")");
    }
    if (!record.is_object() || !record.contains("context") || !record.contains("response") ||
        !record.contains("score")) {
      throw CorpusError(line_prefix(line) + "expected object with 'context', 'response', 'score'");
    }
    ScoredPair p;
    p.context = read_utterances(record["context"], "context", line);
    for (const auto& u : p.context) check_utterance(u, line, "context utterance");
    if (!record["response"].is_string()) throw CorpusError(line_prefix(line) + "'response' must be a string");
    p.response = record["response"].get<std::string>();
    check_utterance(p.response, line, "response");
    if (!record["score"].is_number()) throw CorpusError(line_prefix(line) + "'score' must be a number");
    p.human_score = record["score"].get<double>();
    if (!(p.human_score >= scale.min && p.human_score <= scale.max)) {
      std::ostringstream msg;
      msg << "record " << out.size() << " (" << line_prefix(line) << "score " << p.human_score
          << " outside [" << scale.min << ", " << scale.max << "])";
      throw CorpusError(msg.str());
    }
    p.normalized_score = scale.normalize(p.human_score);
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<ScoredPair> load_finetune_corpus(const std::filesystem::path& path, ScoreScale scale) {
  std::ifstream in = open_or_throw(path);
  return parse_finetune_corpus(in, scale);
}

void write_pretrain_corpus(std::ostream& out, std::span<const MultiLevelExample> corpus) {
  for (const auto& ex : corpus) {
    json record;
    record["context"] = ex.context;
    json responses = json::object();
    for (std::size_t j = 0; j < ex.responses.size(); ++j) {
      responses[std::to_string(j + 1)] = ex.responses[j];
    }
    record["responses"] = std::move(responses);
    out << record.dump() << '\n';
  }
}

void write_finetune_corpus(std::ostream& out, std::span<const ScoredPair> corpus) {
  for (const auto& p : corpus) {
    json record;
    record["context"] = p.context;
    record["response"] = p.response;
    record["score"] = p.human_score;
    out << record.dump() << '\n';
  }
}

}  // namespace dcm
