#include "laqsum/weak_labels.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "laqsum/errors.hpp"

namespace laqsum {

namespace {

// suffix[i][j] = LCS length of doc[i:] and target[j:], stored row-major.
std::vector<int> suffix_table(std::span<const int> doc, std::span<const int> target) {
  const std::size_t m = doc.size(), t = target.size();
  std::vector<int> table((m + 1) * (t + 1), 0);
  auto at = [&](std::size_t i, std::size_t j) -> int& { return table[i * (t + 1) + j]; };
  for (std::size_t i = m; i-- > 0;) {
    for (std::size_t j = t; j-- > 0;) {
      at(i, j) = doc[i] == target[j] ? at(i + 1, j + 1) + 1 : std::max(at(i + 1, j), at(i, j + 1));
    }
  }
  return table;
}

std::vector<int> intern(const std::vector<std::string>& items, std::unordered_map<std::string, int>& ids) {
  std::vector<int> out;
  out.reserve(items.size());
  for (const auto& s : items) out.push_back(ids.emplace(s, static_cast<int>(ids.size())).first->second);
  return out;
}

}  // namespace

WeakLabels WeakLabels::from_positions(std::size_t length, const std::vector<int>& positions) {
  WeakLabels w;
  w.labels.assign(length, 0);
  for (int p : positions) w.labels.at(static_cast<std::size_t>(p)) = 1;
  w.positive_count = static_cast<int>(positions.size());
  return w;
}

std::vector<int> lcs_positions(std::span<const int> doc, std::span<const int> target) {
  const std::size_t m = doc.size(), t = target.size();
  if (m == 0 || t == 0) return {};
  const auto table = suffix_table(doc, target);
  auto at = [&](std::size_t i, std::size_t j) { return table[i * (t + 1) + j]; };

  std::unordered_map<int, std::vector<int>> occurrences;
  for (std::size_t j = 0; j < t; ++j) occurrences[target[j]].push_back(static_cast<int>(j));

  // Walk the document once. A document position is taken whenever it can
  // open an optimal completion; pairing it with the earliest usable target
  // position keeps the most options for later positions.
  std::vector<int> positions;
  std::size_t j = 0;
  int remaining = at(0, 0);
  for (std::size_t i = 0; i < m && remaining > 0; ++i) {
    auto it = occurrences.find(doc[i]);
    if (it == occurrences.end()) continue;
    const auto& occ = it->second;
    auto jt = std::lower_bound(occ.begin(), occ.end(), static_cast<int>(j));
    if (jt == occ.end()) continue;
    const auto jp = static_cast<std::size_t>(*jt);
    if (1 + at(i + 1, jp + 1) == remaining) {
      positions.push_back(static_cast<int>(i));
      j = jp + 1;
      --remaining;
    }
  }
  return positions;
}

int lcs_length(std::span<const int> doc, std::span<const int> target) {
  if (doc.empty() || target.empty()) return 0;
  // Two-row forward DP; only the length is needed.
  std::vector<int> prev(target.size() + 1, 0), cur(target.size() + 1, 0);
  for (int d : doc) {
    for (std::size_t j = 1; j <= target.size(); ++j)
      cur[j] = d == target[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev.back();
}

WeakLabels lcs_align(const BpeSequence& doc, const BpeSequence& target) {
  return WeakLabels::from_positions(doc.size(), lcs_positions(doc.ids, target.ids));
}

WeakLabels lcs_word(const std::vector<std::string>& doc_words, const std::vector<std::string>& summary_words) {
  std::unordered_map<std::string, int> ids;
  const auto d = intern(doc_words, ids);
  const auto s = intern(summary_words, ids);
  return WeakLabels::from_positions(doc_words.size(), lcs_positions(d, s));
}

WeakLabels lcs_char(const std::vector<std::string>& doc_words, const std::string& summary) {
  std::vector<int> doc_chars, owner;
  for (std::size_t w = 0; w < doc_words.size(); ++w) {
    for (const auto& ch : utf8::split(doc_words[w])) {
      doc_chars.push_back(static_cast<int>(utf8::codepoint(ch)));
      owner.push_back(static_cast<int>(w));
    }
  }
  std::vector<int> summary_chars;
  for (const auto& ch : utf8::split(summary)) {
    if (ch == " " || ch == "\t" || ch == "\n" || ch == "\r") continue;
    summary_chars.push_back(static_cast<int>(utf8::codepoint(ch)));
  }
  std::vector<int> matched_per_word(doc_words.size(), 0), length_per_word(doc_words.size(), 0);
  for (int o : owner) ++length_per_word[static_cast<std::size_t>(o)];
  for (int p : lcs_positions(doc_chars, summary_chars)) ++matched_per_word[static_cast<std::size_t>(owner[p])];
  std::vector<int> positives;
  for (std::size_t w = 0; w < doc_words.size(); ++w)
    if (length_per_word[w] > 0 && matched_per_word[w] == length_per_word[w]) positives.push_back(static_cast<int>(w));
  return WeakLabels::from_positions(doc_words.size(), positives);
}

std::vector<int> project_to_words(const WeakLabels& unit_labels, const BpeSequence& from) {
  from.check();
  if (unit_labels.size() != from.size()) {
    throw InvariantError("project_to_words: " + std::to_string(unit_labels.size()) + " labels for " +
                         std::to_string(from.size()) + " units");
  }
  const int words = from.empty() ? 0 : from.word_index.back() + 1;
  std::vector<int> out(static_cast<std::size_t>(words), 0);
  for (std::size_t u = 0; u < from.size(); ++u)
    if (unit_labels.labels[u]) out[static_cast<std::size_t>(from.word_index[u])] = 1;
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !space(text[j])) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string label_diff_report(const std::string& document, const std::string& summary, const MergeTable& table) {
  const auto doc_words = split_words(document);
  const auto char_labels = lcs_char(doc_words, summary);
  const auto word_labels = lcs_word(doc_words, split_words(summary));
  const auto doc_units = table.encode_prefixed(document);
  const auto bpe_words = project_to_words(lcs_align(doc_units, table.encode_prefixed(summary)), doc_units);

  std::ostringstream os;
  os << "index\tword\tchar_lcs\tword_lcs\tbpe_lcs\tflag\n";
  for (std::size_t w = 0; w < doc_words.size(); ++w) {
    const int c = char_labels.labels[w], wl = word_labels.labels[w];
    const int b = w < bpe_words.size() ? bpe_words[w] : 0;
    std::string flag = "-";
    if (c == 1 && b == 0) flag = "type_I_candidate";
    if (wl == 0 && b == 1) flag = "type_II_candidate";
    os << w << '\t' << doc_words[w] << '\t' << c << '\t' << wl << '\t' << b << '\t' << flag << '\n';
  }
  return os.str();
}

}  // namespace laqsum
