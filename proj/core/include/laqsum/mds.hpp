#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "laqsum/bpe.hpp"
#include "laqsum/corpus.hpp"
#include "laqsum/model.hpp"

namespace laqsum {

inline constexpr int kDefaultBudgetTokens = 250;

struct Cluster {
  std::vector<BpeSequence> documents;
  BpeSequence query;
  int budget_tokens = kDefaultBudgetTokens;

  // Throws ConfigError without documents or with a non-positive budget.
  void validate() const;
};

// Tokenizes every document and the query with the model's tokenizer.
Cluster make_cluster(const ClusterInput& input, const MergeTable& tokenizer, int budget_tokens = kDefaultBudgetTokens);

// Documents by descending count of units that occur in the query. Stable.
std::vector<std::size_t> rank_documents(const Cluster& cluster);

// Anything that turns one document and a query into summary text.
class DocumentSummarizer {
 public:
  virtual ~DocumentSummarizer() = default;
  virtual std::string summarize(const BpeSequence& document, const BpeSequence& query) const = 0;
};

class ModelSummarizer final : public DocumentSummarizer {
 public:
  ModelSummarizer(const SummarizerModel& model, DecodeConfig decode) : model_(model), decode_(decode) {}
  std::string summarize(const BpeSequence& document, const BpeSequence& query) const override;

 private:
  const SummarizerModel& model_;
  DecodeConfig decode_;
};

struct MdsOptions {
  double redundancy_threshold = 0.7;  // content-word unigram F1
};

struct MdsResult {
  std::string text;
  std::vector<std::string> sentences;  // accepted, in output order
  std::vector<std::size_t> order;      // document ranking used
  std::vector<std::string> warnings;   // one per skipped document
};

// Splits after '.', '!' or '?' when followed by whitespace or the end.
std::vector<std::string> split_sentences(std::string_view text);

// Whitespace-delimited words; the unit of the token budget.
std::vector<std::string> budget_tokens(std::string_view text);

// Unigram F1 between the content words (non-stopword normalized tokens) of
// two sentences.
double content_overlap(std::string_view a, std::string_view b);

// True for an exact normalized match or overlap at or above the threshold.
bool is_redundant(std::string_view sentence, const std::vector<std::string>& accepted, double threshold);

// Summarizes each document in rank order with the cluster query and
// composes the non-redundant sentences under the token budget. A failing
// document is skipped and reported in warnings.
MdsResult iterative_summarize(const Cluster& cluster, const DocumentSummarizer& summarizer,
                              const MdsOptions& options = {});

}  // namespace laqsum
