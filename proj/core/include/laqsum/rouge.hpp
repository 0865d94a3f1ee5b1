#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace laqsum {

enum class RougeVariant { R1, R2, RL, RSU4 };

std::string to_string(RougeVariant v);
// Accepts R1, R2, RL, RSU4 (case-insensitive). Throws ConfigError otherwise.
RougeVariant parse_rouge_variant(std::string_view name);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  RougeVariant variant = RougeVariant::R1;

  static RougeScore from_counts(double overlap, double candidate_total, double reference_total, RougeVariant v);
};

// Metric tokenization: ASCII-lowercased, punctuation removed, split on
// whitespace. No stemming and no stopword removal.
std::vector<std::string> rouge_tokenize(std::string_view text);

// Clipped n-gram overlap.
RougeScore rouge_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference, int n);
// LCS-based F-measure.
RougeScore rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
// Unigrams plus ordered pairs with at most four words between them.
RougeScore rouge_su4(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

RougeScore rouge(RougeVariant v, const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
// Best F1 over several references.
RougeScore rouge_multi(RougeVariant v, const std::vector<std::string>& candidate,
                       const std::vector<std::vector<std::string>>& references);

inline constexpr int kSu4MaxGap = 4;

// Area under the ROC curve of `scores` against a binary mask, computed from
// the Mann-Whitney rank statistic with tied scores sharing the average rank.
// Throws InvariantError when lengths differ or the mask lacks a class.
double posterior_auc(const std::vector<double>& scores, const std::vector<int>& gold_mask);

}  // namespace laqsum
