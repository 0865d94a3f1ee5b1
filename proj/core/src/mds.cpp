#include "laqsum/mds.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <set>

#include "laqsum/errors.hpp"
#include "laqsum/rouge.hpp"

namespace laqsum {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",   "and",  "are",   "as",   "at",   "be",    "been", "but",  "by",   "for",  "from",
      "had",  "has",  "have", "he",    "her",  "his",  "i",     "in",   "is",   "it",   "its",  "of",
      "on",   "or",   "she",  "that",  "the",  "their", "then", "there", "they", "this", "to",  "was",
      "we",   "were", "which", "who",  "will", "with", "would", "you"};
  return words;
}

std::vector<std::string> content_words(std::string_view text) {
  auto tokens = rouge_tokenize(text);
  std::erase_if(tokens, [](const std::string& t) { return stopwords().contains(t); });
  return tokens;
}

std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

void Cluster::validate() const {
  if (documents.empty()) throw ConfigError("cluster has no documents");
  if (budget_tokens <= 0) throw ConfigError("cluster budget must be > 0, got " + std::to_string(budget_tokens));
}

Cluster make_cluster(const ClusterInput& input, const MergeTable& tokenizer, int budget_tokens) {
  Cluster c;
  for (const auto& d : input.documents) c.documents.push_back(tokenizer.encode_prefixed(d));
  if (!input.query.empty()) c.query = tokenizer.encode_prefixed(input.query);
  c.budget_tokens = budget_tokens;
  c.validate();
  return c;
}

std::vector<std::size_t> rank_documents(const Cluster& cluster) {
  const std::set<int> query_units(cluster.query.ids.begin(), cluster.query.ids.end());
  std::vector<std::size_t> score(cluster.documents.size(), 0);
  for (std::size_t i = 0; i < cluster.documents.size(); ++i)
    for (int id : cluster.documents[i].ids) score[i] += query_units.contains(id) ? 1 : 0;
  std::vector<std::size_t> order(cluster.documents.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
  return order;
}

std::string ModelSummarizer::summarize(const BpeSequence& document, const BpeSequence& query) const {
  const auto result = model_.generate(model_.clip_source(document), query, decode_);
  return model_.detokenize(result.ids);
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < text.size(); ++i) {
    current += text[i];
    const char c = text[i];
    const bool terminal = c == '.' || c == '!' || c == '?';
    if (terminal && (i + 1 == text.size() || is_space(text[i + 1]))) {
      out.push_back(current);
      current.clear();
    }
  }
  out.push_back(current);
  std::vector<std::string> trimmed;
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) continue;
    const auto e = s.find_last_not_of(" \t\r\n");
    trimmed.push_back(s.substr(b, e - b + 1));
  }
  return trimmed;
}

std::vector<std::string> budget_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t b = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > b) out.emplace_back(text.substr(b, i - b));
  }
  return out;
}

double content_overlap(std::string_view a, std::string_view b) {
  const auto wa = content_words(a), wb = content_words(b);
  if (wa.empty() || wb.empty()) return 0.0;
  std::map<std::string, int> ca, cb;
  for (const auto& w : wa) ++ca[w];
  for (const auto& w : wb) ++cb[w];
  int hit = 0;
  for (const auto& [w, n] : ca) {
    const auto it = cb.find(w);
    if (it != cb.end()) hit += std::min(n, it->second);
  }
  if (hit == 0) return 0.0;
  const double p = static_cast<double>(hit) / static_cast<double>(wa.size());
  const double r = static_cast<double>(hit) / static_cast<double>(wb.size());
  return 2.0 * p * r / (p + r);
}

bool is_redundant(std::string_view sentence, const std::vector<std::string>& accepted, double threshold) {
  const auto norm = rouge_tokenize(sentence);
  for (const auto& prior : accepted) {
    if (norm == rouge_tokenize(prior)) return true;
    if (content_overlap(sentence, prior) >= threshold) return true;
  }
  return false;
}

MdsResult iterative_summarize(const Cluster& cluster, const DocumentSummarizer& summarizer,
                              const MdsOptions& options) {
  cluster.validate();
  if (options.redundancy_threshold < 0.0 || options.redundancy_threshold > 1.0) {
    throw ConfigError("redundancy threshold must lie in [0,1]");
  }
  MdsResult result;
  result.order = rank_documents(cluster);
  int used = 0;
  for (std::size_t idx : result.order) {
    if (used >= cluster.budget_tokens) break;
    std::string summary;
    try {
      summary = summarizer.summarize(cluster.documents[idx], cluster.query);
    } catch (const std::exception& e) {
      result.warnings.push_back("document " + std::to_string(idx) + " skipped: " + e.what());
      continue;
    }
    for (auto& sentence : split_sentences(summary)) {
      if (used >= cluster.budget_tokens) break;
      auto words = budget_tokens(sentence);
      const int room = cluster.budget_tokens - used;
      if (static_cast<int>(words.size()) > room) {
        words.resize(static_cast<std::size_t>(room));
        sentence = join_words(words);
      }
      if (is_redundant(sentence, result.sentences, options.redundancy_threshold)) continue;
      used += static_cast<int>(words.size());
      result.sentences.push_back(std::move(sentence));
    }
  }
  result.text = join_words(result.sentences);
  return result;
}

}  // namespace laqsum
