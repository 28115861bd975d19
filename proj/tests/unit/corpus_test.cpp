#include "dcm/corpus.hpp"
#include "dcm/errors.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <sstream>

namespace dcm {
namespace {

TEST(Tokenizer, LowercasesAndSplitsPunctuation) {
  const auto t = BasicTokenizer{}.tokenize("Hello,  World! [CLS] it's");
  const std::vector<std::string> want{"hello", ",", "world", "!", "[CLS]", "it", "'", "s"};
  EXPECT_EQ(t, want);
}

TEST(Tokenizer, WhitespaceOnlyYieldsNothing) { EXPECT_TRUE(BasicTokenizer{}.tokenize(" \t\n").empty()); }

TEST(Vocabulary, ReservedTokensComeFirst) {
  const Vocabulary v;
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.id("[PAD]"), Vocabulary::kPad);
  EXPECT_EQ(v.id("[UNK]"), Vocabulary::kUnk);
  EXPECT_EQ(v.id("[CLS]"), Vocabulary::kCls);
  EXPECT_EQ(v.id("[SEP]"), Vocabulary::kSep);
  EXPECT_EQ(v.id("unseen"), Vocabulary::kUnk);
}

TEST(Vocabulary, RejectsDuplicatesAndMissingReserved) {
  EXPECT_THROW(Vocabulary({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "a", "a"}), CorpusError);
  EXPECT_THROW(Vocabulary({"a", "[UNK]", "[CLS]", "[SEP]"}), CorpusError);
}

TEST(Vocabulary, OrderedByFrequencyThenLexicographic) {
  MultiLevelExample ex{{"b a b"}, {{"c b"}, {"a"}}};
  const std::vector<MultiLevelExample> corpus{ex};
  const Vocabulary v = build_vocab(corpus, 1);
  const std::vector<std::string> want{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "b", "a", "c"};
  EXPECT_EQ(v.tokens(), want);
  EXPECT_EQ(build_vocab(corpus, 2).size(), 6u);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  test::TempDir dir;
  const auto toy = test::make_toy();
  toy.vocab.save(dir / "v.txt");
  EXPECT_EQ(Vocabulary::load(dir / "v.txt").tokens(), toy.vocab.tokens());
}

TEST(Encoding, LayoutAndPadding) {
  const auto toy = test::make_toy();
  const std::vector<Utterance> ctx{"w1 w2", "w3"};
  const EncodedPair p = encode_pair(ctx, "w4 w5", toy.vocab, 16);
  ASSERT_EQ(p.padded_size(), 16u);
  EXPECT_EQ(p.length, 8);
  EXPECT_EQ(p.token_ids[0], Vocabulary::kCls);
  EXPECT_EQ(p.token_ids[4], Vocabulary::kSep);
  EXPECT_EQ(p.token_ids[7], Vocabulary::kSep);
  for (std::size_t i = 0; i < 16; ++i) {
    EXPECT_EQ(p.attention_mask[i], i < 8 ? 1 : 0);
    EXPECT_EQ(p.segment_ids[i], i >= 5 && i < 8 ? 1 : 0);
    if (i >= 8) EXPECT_EQ(p.token_ids[i], Vocabulary::kPad);
  }
  EXPECT_EQ(p.trimmed().padded_size(), 8u);
  EXPECT_EQ(p.trimmed().padded_to(16).token_ids, p.token_ids);
}

TEST(Encoding, DecodeRoundTrip) {
  const auto toy = test::make_toy();
  for (const auto& ex : toy.pretrain_raw) {
    const auto& r = ex.responses[0][0];
    const EncodedPair p = encode_pair(ex.context, r, toy.vocab, 64);
    const DecodedPair d = decode_pair(p, toy.vocab);
    std::string joined;
    for (const auto& c : ex.context) joined += (joined.empty() ? "" : " ") + c;
    EXPECT_EQ(d.context, joined);
    EXPECT_EQ(d.response, r);
    const EncodedPair again = encode_pair(std::vector<Utterance>{d.context}, d.response, toy.vocab, 64);
    EXPECT_EQ(again.token_ids, p.token_ids);
  }
}

TEST(Encoding, TruncatesContextFromTheFrontFirst) {
  const auto toy = test::make_toy();
  const std::vector<Utterance> ctx{"w1 w2 w3 w4 w5 w6"};
  const EncodedPair p = encode_pair(ctx, "w7 w8", toy.vocab, 8);
  EXPECT_EQ(p.length, 8);
  const DecodedPair d = decode_pair(p, toy.vocab);
  EXPECT_EQ(d.context, "w4 w5 w6");
  EXPECT_EQ(d.response, "w7 w8");
}

TEST(Encoding, ResponseKeepsOneTokenUnderExtremeTruncation) {
  const auto toy = test::make_toy();
  const std::vector<Utterance> ctx{"w1"};
  std::string long_response;
  for (int i = 0; i < 20; ++i) long_response += "w9 ";
  const EncodedPair p = encode_pair(ctx, long_response, toy.vocab, 8);
  EXPECT_EQ(p.length, 8);
  const DecodedPair d = decode_pair(p, toy.vocab);
  EXPECT_FALSE(d.response.empty());
  EXPECT_EQ(BasicTokenizer{}.tokenize(d.response).front(), "w9");
}

TEST(Encoding, RejectsTinyMaxLength) {
  const auto toy = test::make_toy();
  EXPECT_THROW(encode_pair(std::vector<Utterance>{"a"}, "b", toy.vocab, 7), CorpusError);
}

TEST(Loading, PretrainCorpusRoundTrip) {
  const auto toy = test::make_toy();
  std::stringstream ss;
  write_pretrain_corpus(ss, toy.pretrain_raw);
  const auto back = parse_pretrain_corpus(ss, 3);
  ASSERT_EQ(back.size(), toy.pretrain_raw.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].context, toy.pretrain_raw[i].context);
    EXPECT_EQ(back[i].responses, toy.pretrain_raw[i].responses);
  }
}

TEST(Loading, FinetuneCorpusNormalizesScores) {
  std::stringstream ss(R"({"context": ["hi"], "response": "yo", "score": 4}
)"
                       "\n"
                       R"({"context": ["a", "b"], "response": "c", "score": 1.0})");
  const auto c = parse_finetune_corpus(ss);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_DOUBLE_EQ(c[0].normalized_score, 0.75);
  EXPECT_DOUBLE_EQ(c[1].normalized_score, 0.0);
}

void expect_corpus_error(const std::string& text, const std::string& fragment) {
  std::stringstream ss(text);
  try {
    parse_pretrain_corpus(ss);
    FAIL() << "accepted: " << text;
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(Loading, RejectsInvalidPretrainRecordsWithLineNumbers) {
  const std::string ok = R"({"context": ["c"], "responses": {"1": ["a"], "2": ["b"]}})";
  expect_corpus_error(ok + "\nnot json", "line 2");
  expect_corpus_error(R"({"context": ["c"], "responses": {"1": ["a"]}})", "two");
  expect_corpus_error(R"({"context": ["c"], "responses": {"1": ["a"], "3": ["b"]}})", "non-contiguous");
  expect_corpus_error(R"({"context": ["c"], "responses": {"1": [], "2": ["b"]}})", "empty level");
  expect_corpus_error(R"({"context": ["  "], "responses": {"1": ["a"], "2": ["b"]}})", "empty");
  expect_corpus_error(R"({"context": ["c"], "responses": {"1": ["a"], "2": [" "]}})", "empty");
  expect_corpus_error(R"({"context": ["c"], "responses": {"x": ["a"], "2": ["b"]}})", "level key");
}

TEST(Loading, RejectsScoresOutsideTheScale) {
  std::stringstream ss(R"({"context": ["c"], "response": "r", "score": 7})");
  EXPECT_THROW(parse_finetune_corpus(ss), CorpusError);
}

TEST(Loading, ExpectedLevelCountIsEnforced) {
  std::stringstream ss(R"({"context": ["c"], "responses": {"1": ["a"], "2": ["b"]}})");
  EXPECT_THROW(parse_pretrain_corpus(ss, 3), CorpusError);
}

TEST(Loading, MissingFileNamesThePath) {
  try {
    load_pretrain_corpus("/nonexistent/x.jsonl");
    FAIL();
  } catch (const CorpusError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/x.jsonl"), std::string::npos);
  }
}

}  // namespace
}  // namespace dcm
