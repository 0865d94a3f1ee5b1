#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "laqsum/bpe.hpp"

namespace laqsum {

struct SummarizationExample {
  std::string id;
  std::string document;
  std::optional<std::string> query;  // absent for generic summarization
  std::string summary;
  // Optional word-level ground-truth query mask (synthetic data only).
  std::vector<int> mask;

  bool operator==(const SummarizationExample&) const = default;
};

struct ClusterInput {
  std::string id;
  std::vector<std::string> documents;
  std::string query;
};

struct LoadOptions {
  bool strict = false;           // abort on the first malformed row
  bool require_summary = false;  // training data must carry summaries
};

struct LoadReport {
  std::size_t rows = 0;
  std::vector<std::string> warnings;
};

// Throws DataError on an empty document, a missing required summary, or
// invalid UTF-8 in any text field.
void validate_example(const SummarizationExample& ex, bool require_summary);

// JSONL rows {"id", "document", "query"?, "summary"?, "mask"?}. Malformed
// rows are reported with their line number and skipped unless strict.
std::vector<SummarizationExample> load_jsonl(const std::string& path, const LoadOptions& options = {},
                                             LoadReport* report = nullptr);
std::string to_jsonl(const std::vector<SummarizationExample>& examples);
void write_jsonl(const std::string& path, const std::vector<SummarizationExample>& examples);

// Either a JSONL file of {"id"?, "documents": [...], "query": "..."} rows or a
// directory holding one subdirectory per cluster (document files plus
// query.txt).
std::vector<ClusterInput> load_clusters(const std::string& path, LoadReport* report = nullptr);

std::string read_text_file(const std::string& path);
// Writes to a temporary sibling, then renames into place.
void write_file_atomic(const std::string& path, const std::string& content);

struct SyntheticSpec {
  int vocab_size = 48;       // content words
  int min_doc_words = 34;
  int max_doc_words = 44;
  int marked_spans = 2;      // spans forming the generic summary
  int cued_spans = 3;        // spans preceded by the cue word; the summary picks marked_spans of them
  int query_spans = 2;       // spans named by each synthetic query
  int min_span_words = 2;    // content words after the marker
  int max_span_words = 3;
  double noise_rate = 0.0;   // chance each summary content word is replaced
  std::uint64_t seed = 1;

  // Throws ConfigError when spans cannot fit in the shortest document.
  void validate() const;
};

struct SyntheticSpan {
  int begin = 0;  // word index of the marker
  int end = 0;    // one past the last content word
  bool cued = false;
};

struct SyntheticDocument {
  std::string id;
  std::vector<std::string> words;
  std::vector<SyntheticSpan> spans;

  std::string text() const;
  // Words of the given spans in document order.
  std::string span_text(const std::vector<int>& span_indices) const;
  std::vector<int> span_mask(const std::vector<int>& span_indices) const;
};

struct SyntheticCorpus {
  std::vector<SyntheticDocument> documents;
  // Generic split: no query; summary = marked_spans of the cued spans.
  std::vector<SummarizationExample> generic;
  // Query split: two examples per document, each naming `query_spans`
  // uncued spans by their markers; the reference holds those spans.
  std::vector<SummarizationExample> qfs;
};

inline constexpr const char* kCueWord = "key";

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, int n);

// Unit-level mask from a word-level one.
std::vector<int> word_mask_to_units(const std::vector<int>& word_mask, const BpeSequence& seq);

}  // namespace laqsum
