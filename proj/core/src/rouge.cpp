#include "laqsum/rouge.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <unordered_map>

#include "laqsum/errors.hpp"
#include "laqsum/weak_labels.hpp"

namespace laqsum {

namespace {

using Gram = std::vector<int>;

std::map<Gram, int> count_ngrams(const std::vector<int>& ids, int n) {
  std::map<Gram, int> counts;
  for (std::size_t i = 0; i + n <= ids.size(); ++i) ++counts[Gram(ids.begin() + static_cast<std::ptrdiff_t>(i), ids.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

std::map<Gram, int> count_su4_units(const std::vector<int>& ids) {
  std::map<Gram, int> counts;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    ++counts[{ids[i]}];
    for (std::size_t j = i + 1; j < ids.size() && j - i - 1 <= static_cast<std::size_t>(kSu4MaxGap); ++j) {
      ++counts[{ids[i], ids[j]}];
    }
  }
  return counts;
}

long clipped_overlap(const std::map<Gram, int>& cand, const std::map<Gram, int>& ref) {
  long overlap = 0;
  for (const auto& [gram, c] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  return overlap;
}

long total(const std::map<Gram, int>& counts) {
  long n = 0;
  for (const auto& kv : counts) n += kv.second;
  return n;
}

void intern_pair(const std::vector<std::string>& a, const std::vector<std::string>& b, std::vector<int>& ia,
                 std::vector<int>& ib) {
  std::unordered_map<std::string, int> ids;
  for (const auto& w : a) ia.push_back(ids.emplace(w, static_cast<int>(ids.size())).first->second);
  for (const auto& w : b) ib.push_back(ids.emplace(w, static_cast<int>(ids.size())).first->second);
}

}  // namespace

std::string to_string(RougeVariant v) {
  switch (v) {
    case RougeVariant::R1: return "R1";
    case RougeVariant::R2: return "R2";
    case RougeVariant::RL: return "RL";
    case RougeVariant::RSU4: return "RSU4";
  }
  return "?";
}

RougeVariant parse_rouge_variant(std::string_view name) {
  std::string up;
  for (char c : name) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "R1") return RougeVariant::R1;
  if (up == "R2") return RougeVariant::R2;
  if (up == "RL") return RougeVariant::RL;
  if (up == "RSU4") return RougeVariant::RSU4;
  throw ConfigError("unknown ROUGE variant '" + std::string(name) + "'");
}

RougeScore RougeScore::from_counts(double overlap, double candidate_total, double reference_total, RougeVariant v) {
  RougeScore s;
  s.variant = v;
  if (candidate_total <= 0 || reference_total <= 0) return s;
  s.precision = overlap / candidate_total;
  s.recall = overlap / reference_total;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

std::vector<std::string> rouge_tokenize(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (u < 0x80 && std::ispunct(u)) continue;
    cleaned += u < 0x80 ? static_cast<char>(std::tolower(u)) : c;
  }
  return split_words(cleaned);
}

RougeScore rouge_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference, int n) {
  if (n < 1) throw ConfigError("rouge_n: n must be >= 1");
  const RougeVariant v = n == 1 ? RougeVariant::R1 : RougeVariant::R2;
  std::vector<int> c, r;
  intern_pair(candidate, reference, c, r);
  const auto cc = count_ngrams(c, n), rc = count_ngrams(r, n);
  return RougeScore::from_counts(clipped_overlap(cc, rc), total(cc), total(rc), v);
}

RougeScore rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
  std::vector<int> c, r;
  intern_pair(candidate, reference, c, r);
  return RougeScore::from_counts(lcs_length(c, r), c.size(), r.size(), RougeVariant::RL);
}

RougeScore rouge_su4(const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
  std::vector<int> c, r;
  intern_pair(candidate, reference, c, r);
  const auto cc = count_su4_units(c), rc = count_su4_units(r);
  return RougeScore::from_counts(clipped_overlap(cc, rc), total(cc), total(rc), RougeVariant::RSU4);
}

RougeScore rouge(RougeVariant v, const std::vector<std::string>& candidate, const std::vector<std::string>& reference) {
  switch (v) {
    case RougeVariant::R1: return rouge_n(candidate, reference, 1);
    case RougeVariant::R2: return rouge_n(candidate, reference, 2);
    case RougeVariant::RL: return rouge_l(candidate, reference);
    case RougeVariant::RSU4: return rouge_su4(candidate, reference);
  }
  return {};
}

RougeScore rouge_multi(RougeVariant v, const std::vector<std::string>& candidate,
                       const std::vector<std::vector<std::string>>& references) {
  RougeScore best;
  best.variant = v;
  for (const auto& ref : references) {
    auto s = rouge(v, candidate, ref);
    if (s.f1 > best.f1) best = s;
  }
  return best;
}

double posterior_auc(const std::vector<double>& scores, const std::vector<int>& gold_mask) {
  if (scores.size() != gold_mask.size()) {
    throw InvariantError("posterior_auc: " + std::to_string(scores.size()) + " scores for " +
                         std::to_string(gold_mask.size()) + " mask entries");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double positives = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gold_mask[i]) {
      positives += 1;
      rank_sum += rank[i];
    }
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0 || negatives == 0) throw InvariantError("posterior_auc: mask must contain both classes");
  return (rank_sum - positives * (positives + 1) / 2.0) / (positives * negatives);
}

}  // namespace laqsum
