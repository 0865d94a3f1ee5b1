#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "laqsum/bpe.hpp"
#include "laqsum/corpus.hpp"
#include "laqsum/errors.hpp"

namespace {

using laqsum::BpeSequence;
using laqsum::MergeTable;

std::vector<std::string> corpus_lines(int n, std::uint64_t seed) {
  laqsum::SyntheticSpec spec;
  spec.seed = seed;
  const auto c = laqsum::generate_synthetic(spec, n);
  std::vector<std::string> out;
  for (const auto& ex : c.generic) {
    out.push_back(ex.document);
    out.push_back(ex.summary);
  }
  return out;
}

TEST(BpeTrain, ZeroMergesKeepsCharacters) {
  const auto t = MergeTable::train({"abc cab"}, 0);
  EXPECT_TRUE(t.merges().empty());
  for (const auto& u : t.base_symbols()) EXPECT_EQ(laqsum::utf8::split(u).size(), 1u);
}

TEST(BpeTrain, MostFrequentPairFirst) {
  const auto t = MergeTable::train({"aaab", "aab"}, 1);
  ASSERT_EQ(t.merges().size(), 1u);
  EXPECT_EQ(t.merges()[0], (std::pair<std::string, std::string>{"a", "a"}));
}

TEST(BpeTrain, TiesBreakLexicographically) {
  const auto t = MergeTable::train({"ba", "dc"}, 1);
  EXPECT_EQ(t.merges()[0], (std::pair<std::string, std::string>{"b", "a"}));
}

TEST(BpeTrain, Deterministic) {
  const auto lines = corpus_lines(50, 3);
  EXPECT_EQ(MergeTable::train(lines, 200), MergeTable::train(lines, 200));
}

TEST(BpeTrain, InvalidArgumentsThrow) {
  EXPECT_THROW(MergeTable::train({}, 3), laqsum::ConfigError);
  EXPECT_THROW(MergeTable::train({"x"}, -1), laqsum::ConfigError);
}

TEST(BpeEncode, EmptyInput) {
  const auto t = MergeTable::train({"abc"}, 2);
  const auto s = t.encode("");
  EXPECT_TRUE(s.empty());
  EXPECT_EQ(laqsum::decode(s), "");
}

TEST(BpeEncode, AppliesRulesInOrder) {
  const auto t = MergeTable::train({"aaab", "aab"}, 1);
  const auto s = t.encode("aaab");
  EXPECT_EQ(s.surfaces, (std::vector<std::string>{"aa", "a", "b"}));
  EXPECT_EQ(laqsum::decode(s), "aaab");
}

TEST(BpeEncode, BoundaryMarkerOnSpacePrecededWords) {
  const auto t = MergeTable::train({" to be or not to be"}, 50);
  const auto s = t.encode("to be");
  ASSERT_FALSE(s.empty());
  EXPECT_EQ(s.surfaces.front().rfind(laqsum::kBoundaryMarker, 0), std::string::npos);
  EXPECT_EQ(s.surfaces.back(), std::string(laqsum::kBoundaryMarker) + "be");
  const auto p = t.encode_prefixed("to be");
  EXPECT_EQ(p.surfaces.front(), std::string(laqsum::kBoundaryMarker) + "to");
}

TEST(BpeEncode, RoundTripOnThousandLines) {
  const auto lines = corpus_lines(500, 5);
  const auto t = MergeTable::train(lines, 300);
  for (const auto& line : lines) {
    const auto s = t.encode(line);
    s.check();
    EXPECT_EQ(laqsum::decode(s), line);
  }
}

TEST(BpeEncode, RoundTripWithIrregularWhitespaceAndUnicode) {
  const auto t = MergeTable::train({"héllo wörld", "naïve  café\tau lait"}, 40);
  for (const std::string text : {"héllo  wörld", " café\n", "\t naïve", "unseen ✓ glyph", "a  b   c"}) {
    EXPECT_EQ(laqsum::decode(t.encode(text)), text) << text;
  }
}

TEST(BpeEncode, UnknownCharactersGetOverflowIds) {
  const auto t = MergeTable::train({"abc"}, 0);
  const auto s = t.encode("z");
  ASSERT_EQ(s.size(), 1u);
  EXPECT_GE(s.ids[0], t.size());
  EXPECT_EQ(t.surface(s.ids[0]), "z");
}

TEST(BpeEncode, MoreMergesNeverIncreaseUnitCount) {
  const auto lines = corpus_lines(100, 9);
  std::size_t prev = SIZE_MAX;
  for (int merges : {0, 10, 50, 100, 200, 400}) {
    const auto t = MergeTable::train(lines, merges);
    std::size_t total = 0;
    for (const auto& l : lines) total += t.encode(l).size();
    EXPECT_LE(total, prev) << merges;
    prev = total;
  }
}

TEST(BpeEncode, WordIndexNonDecreasing) {
  const auto lines = corpus_lines(30, 2);
  const auto t = MergeTable::train(lines, 100);
  for (const auto& l : lines) {
    const auto s = t.encode(l);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s.word_index[i - 1], s.word_index[i]);
  }
}

TEST(BpeDecode, InverseOfEncodeExample) {
  BpeSequence s;
  s.surfaces = {"aa", "a", "b"};
  s.ids = {0, 1, 2};
  s.word_index = {0, 0, 0};
  EXPECT_EQ(laqsum::decode(s), "aaab");
  EXPECT_EQ(laqsum::decode(BpeSequence{}), "");
}

TEST(BpeSerialize, RoundTrip) {
  const auto t = MergeTable::train({"the cat sat on the mat", "tab\tand  space"}, 30);
  const auto back = MergeTable::deserialize(t.serialize());
  EXPECT_EQ(back, t);
  EXPECT_EQ(back.encode("the mat").ids, t.encode("the mat").ids);
}

TEST(BpeSerialize, GarbageRejected) {
  EXPECT_THROW(MergeTable::deserialize("not a merge table"), laqsum::DataError);
}

TEST(Utf8, Validation) {
  EXPECT_TRUE(laqsum::utf8::valid("plain ascii"));
  EXPECT_TRUE(laqsum::utf8::valid("caf\xC3\xA9"));
  EXPECT_FALSE(laqsum::utf8::valid("bad \xC3"));
  EXPECT_FALSE(laqsum::utf8::valid("\xFF"));
}

}  // namespace
