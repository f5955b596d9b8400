#include <gtest/gtest.h>

#include <filesystem>

#include "logsieve/vocab.hpp"

namespace {

using namespace logsieve;

EventSequence seq(std::vector<int> events, int label = 0) {
  EventSequence s;
  s.seq_id = "s";
  s.event_ids = std::move(events);
  s.label = label;
  return s;
}

TEST(Vocab, FirstAppearanceOrdering) {
  auto v = Vocabulary::build({seq({7, 3, 7, 9})});
  EXPECT_EQ(v.index_of(7), 4);
  EXPECT_EQ(v.index_of(3), 5);
  EXPECT_EQ(v.index_of(9), 6);
  EXPECT_EQ(v.size(), 7);
}

TEST(Vocab, SingleTemplate) {
  auto v = Vocabulary::build({seq({42})});
  EXPECT_EQ(v.size(), 5);
}

TEST(Vocab, RebuildIsIdentical) {
  std::vector<EventSequence> data = {seq({5, 1, 5}), seq({2, 5, 9})};
  auto a = Vocabulary::build(data);
  auto b = Vocabulary::build(data);
  EXPECT_EQ(a.hash(), b.hash());
  for (int t : {5, 1, 2, 9}) EXPECT_EQ(a.index_of(t), b.index_of(t));
}

TEST(Vocab, EmptyTrainingSetIsAnError) {
  EXPECT_THROW(Vocabulary::build({}), std::invalid_argument);
}

TEST(Vocab, UnknownTemplateMapsToUnk) {
  auto v = Vocabulary::build({seq({7})});
  EXPECT_EQ(v.index_of(999), Vocabulary::kUnk);
}

TEST(Encode, WorkedExample) {
  auto v = Vocabulary::build({seq({7, 3, 7, 9})});
  auto t = encode(seq({7, 3}), v, 5, /*with_cls=*/true);
  EXPECT_EQ(t.ids, (std::vector<TokenId>{Vocabulary::kCls, 4, 5, 0, 0}));
  EXPECT_EQ(t.attn_mask, (std::vector<uint8_t>{1, 1, 1, 0, 0}));
}

TEST(Encode, UnseenTemplateBecomesUnk) {
  auto v = Vocabulary::build({seq({7})});
  auto t = encode(seq({99}), v, 4, true);
  EXPECT_EQ(t.ids[1], Vocabulary::kUnk);
}

TEST(Encode, TruncationKeepsHead) {
  auto v = Vocabulary::build({seq({1, 2, 3, 4, 5, 6})});
  auto t = encode(seq({1, 2, 3, 4, 5, 6}), v, 4, true);
  ASSERT_EQ(t.ids.size(), 4u);
  EXPECT_EQ(t.ids, (std::vector<TokenId>{Vocabulary::kCls, 4, 5, 6}));
}

TEST(Encode, PadIffMaskZero) {
  auto v = Vocabulary::build({seq({1, 2})});
  auto t = encode(seq({1}), v, 6, true);
  for (size_t i = 0; i < t.ids.size(); ++i)
    EXPECT_EQ(t.ids[i] == Vocabulary::kPad, t.attn_mask[i] == 0);
}

TEST(Encode, RoundTripThroughDecode) {
  auto v = Vocabulary::build({seq({7, 3, 9})});
  // mixture of known and unknown templates, with truncation
  std::vector<int> events = {7, 99, 3, 9, 7, 3};
  auto t = encode(seq(events), v, 5, true);
  auto decoded = decode(t, v);
  ASSERT_EQ(decoded.size(), 4u);  // truncated to max_len - CLS
  EXPECT_EQ(decoded[0], 7);
  EXPECT_EQ(decoded[1], -1);  // UNK
  EXPECT_EQ(decoded[2], 3);
  EXPECT_EQ(decoded[3], 9);
}

TEST(VocabFile, RoundTripPreservesMapAndHash) {
  auto v = Vocabulary::build({seq({7, 3, 9, 3})});
  const auto dir = std::filesystem::temp_directory_path() / "logsieve_vocab_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "vocab.tsv").string();
  v.save(path);
  auto loaded = Vocabulary::load(path);
  EXPECT_EQ(loaded.hash(), v.hash());
  EXPECT_EQ(loaded.size(), v.size());
  for (int t : {7, 3, 9}) EXPECT_EQ(loaded.index_of(t), v.index_of(t));
  EXPECT_EQ(loaded.template_of(4), 7);
  std::filesystem::remove_all(dir);
}

TEST(VocabFile, MissingHeaderIsRejected) {
  const auto dir = std::filesystem::temp_directory_path() / "logsieve_vocab_test2";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "vocab.tsv").string();
  {
    std::ofstream out(path);
    out << "0\t[PAD]\n";
  }
  EXPECT_THROW(Vocabulary::load(path), std::runtime_error);
  std::filesystem::remove_all(dir);
}

}  // namespace
