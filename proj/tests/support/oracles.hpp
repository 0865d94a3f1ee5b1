#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace laqsum::testing {

// Every index subset of `doc` whose symbols spell a subsequence of `target`
// is enumerated; the longest wins, ties go to the lexicographically smallest
// index vector. Exponential; meant for lengths up to about 12.
inline std::vector<int> brute_force_lcs(const std::vector<int>& doc, const std::vector<int>& target) {
  const std::size_t n = doc.size();
  std::vector<int> best;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    std::vector<int> pos;
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) pos.push_back(static_cast<int>(i));
    if (pos.size() < best.size()) continue;
    std::size_t t = 0;
    bool ok = true;
    for (int p : pos) {
      while (t < target.size() && target[t] != doc[static_cast<std::size_t>(p)]) ++t;
      if (t == target.size()) {
        ok = false;
        break;
      }
      ++t;
    }
    if (ok && (pos.size() > best.size() || pos < best)) best = pos;
  }
  return best;
}

// Multiset of unigrams plus ordered word pairs at most `max_gap` words apart.
inline std::map<std::vector<std::string>, int> skip_bigram_units(const std::vector<std::string>& words, int max_gap) {
  std::map<std::vector<std::string>, int> units;
  for (std::size_t i = 0; i < words.size(); ++i) {
    ++units[{words[i]}];
    for (std::size_t j = i + 1; j < words.size(); ++j)
      if (static_cast<int>(j - i - 1) <= max_gap) ++units[{words[i], words[j]}];
  }
  return units;
}

struct PrfOracle {
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

inline PrfOracle brute_force_su4(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                                 int max_gap = 4) {
  const auto c = skip_bigram_units(cand, max_gap), r = skip_bigram_units(ref, max_gap);
  double overlap = 0.0, ct = 0.0, rt = 0.0;
  for (const auto& [u, k] : c) {
    ct += k;
    if (auto it = r.find(u); it != r.end()) overlap += std::min(k, it->second);
  }
  for (const auto& [u, k] : r) rt += k;
  PrfOracle o;
  if (ct > 0) o.precision = overlap / ct;
  if (rt > 0) o.recall = overlap / rt;
  if (o.precision + o.recall > 0) o.f1 = 2 * o.precision * o.recall / (o.precision + o.recall);
  return o;
}

// Longest common subsequence length of two word lists by exhaustive search
// over subsets of the shorter one.
inline int brute_force_lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const auto& s = a.size() <= b.size() ? a : b;
  const auto& l = a.size() <= b.size() ? b : a;
  int best = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << s.size()); ++mask) {
    std::size_t t = 0;
    int len = 0;
    bool ok = true;
    for (std::size_t i = 0; i < s.size() && ok; ++i) {
      if (!(mask & (std::size_t{1} << i))) continue;
      while (t < l.size() && l[t] != s[i]) ++t;
      if (t == l.size()) ok = false;
      else {
        ++t;
        ++len;
      }
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

}  // namespace laqsum::testing
