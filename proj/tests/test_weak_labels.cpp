#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "laqsum/bpe.hpp"
#include "laqsum/errors.hpp"
#include "laqsum/weak_labels.hpp"
#include "support/oracles.hpp"

namespace {

using laqsum::BpeSequence;
using laqsum::MergeTable;

void for_all_sequences(int max_len, int alphabet, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> seq;
  std::function<void()> rec = [&] {
    fn(seq);
    if (static_cast<int>(seq.size()) == max_len) return;
    for (int a = 0; a < alphabet; ++a) {
      seq.push_back(a);
      rec();
      seq.pop_back();
    }
  };
  rec();
}

TEST(Lcs, HandExampleEarliestEmbedding) {
  EXPECT_EQ(laqsum::lcs_positions(std::vector<int>{0, 1, 2, 1}, std::vector<int>{1, 1}), (std::vector<int>{1, 3}));
  EXPECT_EQ(laqsum::lcs_positions(std::vector<int>{1, 1, 1}, std::vector<int>{1}), (std::vector<int>{0}));
}

TEST(Lcs, EmptyAndIdentical) {
  const std::vector<int> doc{3, 1, 2};
  EXPECT_TRUE(laqsum::lcs_positions(doc, std::vector<int>{}).empty());
  EXPECT_EQ(laqsum::lcs_positions(doc, doc), (std::vector<int>{0, 1, 2}));
}

// Exhaustive over short pairs; random pairs up to length 10 on both sides.
TEST(Lcs, MatchesBruteForceExhaustiveShort) {
  std::vector<std::vector<int>> seqs;
  for_all_sequences(5, 4, [&](const std::vector<int>& s) { seqs.push_back(s); });
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < seqs.size(); i += 3) {
    for (std::size_t j = 0; j < seqs.size(); j += 7) {
      const auto want = laqsum::testing::brute_force_lcs(seqs[i], seqs[j]);
      ASSERT_EQ(laqsum::lcs_positions(seqs[i], seqs[j]), want);
      ++pairs;
    }
  }
  EXPECT_GT(pairs, 10000u);
}

TEST(Lcs, MatchesBruteForceRandomUpToTen) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(0, 10), sym(0, 3);
  for (int k = 0; k < 20000; ++k) {
    std::vector<int> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
    for (auto& x : a) x = sym(rng);
    for (auto& x : b) x = sym(rng);
    const auto want = laqsum::testing::brute_force_lcs(a, b);
    ASSERT_EQ(laqsum::lcs_positions(a, b), want);
    ASSERT_EQ(laqsum::lcs_length(a, b), static_cast<int>(want.size()));
    ASSERT_EQ(laqsum::lcs_length(b, a), laqsum::lcs_length(a, b));
  }
}

BpeSequence seq_of(const std::vector<int>& ids) {
  BpeSequence s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    s.ids.push_back(ids[i]);
    s.surfaces.push_back(std::string(1, static_cast<char>('a' + ids[i])));
    s.word_index.push_back(static_cast<int>(i));
  }
  return s;
}

TEST(LcsAlign, LabelsFollowPositions) {
  const auto labels = laqsum::lcs_align(seq_of({0, 1, 2, 1}), seq_of({1, 1}));
  EXPECT_EQ(labels.labels, (std::vector<int>{0, 1, 0, 1}));
  EXPECT_EQ(labels.positive_count, 2);
  EXPECT_EQ(laqsum::lcs_align(seq_of({0, 1}), BpeSequence{}).labels, (std::vector<int>{0, 0}));
  EXPECT_EQ(laqsum::lcs_align(seq_of({2, 0, 1}), seq_of({2, 0, 1})).labels, (std::vector<int>{1, 1, 1}));
}

TEST(LcsAlign, MarkerAndBareUnitsDoNotMatch) {
  const auto t = MergeTable::train({" feat", "feat"}, 20);
  const auto doc = t.encode("feat");
  const auto sum = t.encode_prefixed("feat");
  ASSERT_NE(doc.ids, sum.ids);
  EXPECT_EQ(laqsum::lcs_align(doc, sum).positive_count, 0);
}

TEST(WordBaseline, IdenticalWordsAllPositive) {
  const std::vector<std::string> w{"a", "b", "c"};
  EXPECT_EQ(laqsum::lcs_word(w, w).labels, (std::vector<int>{1, 1, 1}));
}

TEST(Projection, AnyPositiveUnitMarksTheWord) {
  BpeSequence s;
  s.ids = {0, 1, 2, 3};
  s.surfaces = {"x", "y", "z", "w"};
  s.word_index = {0, 0, 0, 1};
  EXPECT_EQ(laqsum::project_to_words(laqsum::WeakLabels::from_positions(4, {1}), s), (std::vector<int>{1, 0}));
  EXPECT_EQ(laqsum::project_to_words(laqsum::WeakLabels::from_positions(4, {}), s), (std::vector<int>{0, 0}));
  EXPECT_THROW(laqsum::project_to_words(laqsum::WeakLabels::from_positions(3, {}), s), laqsum::InvariantError);
}

// Sentences after the Type I / Type II examples of the error analysis.
const std::string kTypeISummary = "Real Madrid slump to defeat against Athletic Bilbao.";
const std::string kTypeIDocument = "at the Parc de Princes.";
const std::string kTypeIISummary =
    "A man in suburban Boston is selling snow online to customers in warmer states.";
const std::string kTypeIIDocument =
    "For $89, self-styled entrepreneur Kyle Waring will ship you 6 pounds of Boston-area snow in an insulated "
    "Styrofoam box";

std::size_t word_at(const std::vector<std::string>& words, const std::string& w) {
  for (std::size_t i = 0; i < words.size(); ++i)
    if (words[i] == w) return i;
  ADD_FAILURE() << "missing word " << w;
  return 0;
}

TEST(ErrorTypes, TypeTwoWordBaselineMissesBpeRecovers) {
  const auto table = MergeTable::train({" " + kTypeISummary, " " + kTypeIISummary}, 1000);
  const auto words = laqsum::split_words(kTypeIIDocument);
  const auto idx = word_at(words, "Boston-area");
  EXPECT_EQ(laqsum::lcs_word(words, laqsum::split_words(kTypeIISummary)).labels[idx], 0);

  const auto doc = table.encode_prefixed(kTypeIIDocument);
  const auto labels = laqsum::lcs_align(doc, table.encode_prefixed(kTypeIISummary));
  bool boston_unit_positive = false;
  for (std::size_t u = 0; u < doc.size(); ++u)
    if (doc.word_index[u] == static_cast<int>(idx) && doc.surfaces[u] == std::string(laqsum::kBoundaryMarker) + "Boston")
      boston_unit_positive = labels.labels[u] == 1;
  EXPECT_TRUE(boston_unit_positive);
}

TEST(ErrorTypes, TypeOneCharacterBaselineFiresBpeDoesNot) {
  const auto table = MergeTable::train({" " + kTypeISummary, " " + kTypeIISummary}, 1000);
  const auto words = laqsum::split_words(kTypeIDocument);
  const auto idx = word_at(words, "de");
  EXPECT_EQ(laqsum::lcs_char(words, kTypeISummary).labels[idx], 1);

  const auto doc = table.encode_prefixed(kTypeIDocument);
  const auto bpe_words = laqsum::project_to_words(laqsum::lcs_align(doc, table.encode_prefixed(kTypeISummary)), doc);
  EXPECT_EQ(bpe_words[idx], 0);
}

TEST(ErrorTypes, DiffReportFlagsBothCases) {
  const auto table = MergeTable::train({" " + kTypeISummary, " " + kTypeIISummary}, 1000);
  const auto report1 = laqsum::label_diff_report(kTypeIDocument, kTypeISummary, table);
  EXPECT_NE(report1.find("de\t1\t0\t0\ttype_I_candidate"), std::string::npos) << report1;
  const auto report2 = laqsum::label_diff_report(kTypeIIDocument, kTypeIISummary, table);
  EXPECT_NE(report2.find("Boston-area\t"), std::string::npos);
  EXPECT_NE(report2.find("type_II_candidate"), std::string::npos) << report2;
}

}  // namespace
