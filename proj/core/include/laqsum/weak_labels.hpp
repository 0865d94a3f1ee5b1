#pragma once

#include <span>
#include <string>
#include <vector>

#include "laqsum/bpe.hpp"

namespace laqsum {

// Binary annotation over the positions of one sequence.
struct WeakLabels {
  std::vector<int> labels;
  int positive_count = 0;

  std::size_t size() const { return labels.size(); }
  static WeakLabels from_positions(std::size_t length, const std::vector<int>& positions);
};

// Longest common subsequence between `doc` and `target`. Among all maximal
// embeddings returns the doc positions that are lexicographically smallest
// (the earliest embedding). O(|doc| * |target|) time and memory.
std::vector<int> lcs_positions(std::span<const int> doc, std::span<const int> target);
int lcs_length(std::span<const int> doc, std::span<const int> target);

// BPE-LCS: labels document units on the earliest LCS with the target units.
// Matching is on unit ids, so marker-prefixed and bare units never match.
WeakLabels lcs_align(const BpeSequence& doc, const BpeSequence& target);

// Word-level baseline: whitespace words matched verbatim.
WeakLabels lcs_word(const std::vector<std::string>& doc_words, const std::vector<std::string>& summary_words);

// Character-level baseline: the summary is a character sequence (whitespace
// dropped) and a document word is positive when every one of its characters
// lies on the character LCS.
WeakLabels lcs_char(const std::vector<std::string>& doc_words, const std::string& summary);

// A word is positive iff any of its units is positive.
std::vector<int> project_to_words(const WeakLabels& unit_labels, const BpeSequence& from);

std::vector<std::string> split_words(std::string_view text);

// Tab-separated per-word comparison of the three schemes with Type I/II
// candidate flags, one header line first.
std::string label_diff_report(const std::string& document, const std::string& summary, const MergeTable& table);

}  // namespace laqsum
