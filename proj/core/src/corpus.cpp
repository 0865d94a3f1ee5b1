#include "laqsum/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <nlohmann/json.hpp>

#include "laqsum/errors.hpp"

namespace laqsum {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string>& marker_words() {
  static const std::vector<std::string> words = {
      "one",     "two",     "three",    "four",     "five",    "six",       "seven",
      "eight",   "nine",    "ten",      "eleven",   "twelve",  "thirteen",  "fourteen",
      "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty"};
  return words;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {"the", "and", "of", "with", "then"};
  return words;
}

std::vector<std::string> content_words(int n) {
  static const std::string consonants = "bdfgklmnprstvz";
  static const std::string vowels = "aeiou";
  std::vector<std::string> syllables;
  for (char c : consonants)
    for (char v : vowels) syllables.push_back(std::string{c, v});
  std::set<std::string> taken(marker_words().begin(), marker_words().end());
  taken.insert(filler_words().begin(), filler_words().end());
  taken.insert(kCueWord);
  std::vector<std::string> out;
  const auto s = syllables.size();
  for (std::size_t i = 0; out.size() < static_cast<std::size_t>(n); ++i) {
    auto w = syllables[(i * 7) % s] + syllables[(i * 13 + 3) % s];
    if (i >= s * s) w += syllables[i % s];
    if (taken.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

void validate_example(const SummarizationExample& ex, bool require_summary) {
  if (ex.document.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw DataError("example '" + ex.id + "': document is empty");
  }
  if (require_summary && ex.summary.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw DataError("example '" + ex.id + "': summary is empty");
  }
  auto check = [&](const std::string& field, const std::string& text) {
    if (!utf8::valid(text)) throw DataError("example '" + ex.id + "': " + field + " is not valid UTF-8");
  };
  check("document", ex.document);
  check("summary", ex.summary);
  if (ex.query) check("query", *ex.query);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

std::vector<SummarizationExample> load_jsonl(const std::string& path, const LoadOptions& options,
                                             LoadReport* report) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  std::vector<SummarizationExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    ++rep.rows;
    try {
      if (!utf8::valid(line)) throw DataError("invalid UTF-8");
      const auto row = json::parse(line);
      if (!row.is_object()) throw DataError("row is not a JSON object");
      SummarizationExample ex;
      ex.id = row.contains("id") ? (row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump())
                                 : std::to_string(line_no);
      if (!row.contains("document") || !row["document"].is_string()) throw DataError("missing string field 'document'");
      ex.document = row["document"].get<std::string>();
      if (row.contains("query") && !row["query"].is_null()) ex.query = row["query"].get<std::string>();
      if (row.contains("summary") && !row["summary"].is_null()) ex.summary = row["summary"].get<std::string>();
      if (row.contains("mask")) ex.mask = row["mask"].get<std::vector<int>>();
      validate_example(ex, options.require_summary);
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      const std::string msg = path + ":" + std::to_string(line_no) + ": " + e.what();
      if (options.strict) throw DataError(msg);
      rep.warnings.push_back(msg);
    }
  }
  if (rep.rows == 0) rep.warnings.push_back(path + ": no examples");
  return out;
}

std::string to_jsonl(const std::vector<SummarizationExample>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    json row{{"id", ex.id}, {"document", ex.document}, {"summary", ex.summary}};
    if (ex.query) row["query"] = *ex.query;
    if (!ex.mask.empty()) row["mask"] = ex.mask;
    out += row.dump() + '\n';
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<SummarizationExample>& examples) {
  write_file_atomic(path, to_jsonl(examples));
}

std::vector<ClusterInput> load_clusters(const std::string& path, LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  std::vector<ClusterInput> out;
  if (fs::is_directory(path)) {
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_directory()) dirs.push_back(entry.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      ClusterInput c;
      c.id = dir.filename().string();
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().filename() != "query.txt") files.push_back(entry.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        auto text = read_text_file(f.string());
        if (!utf8::valid(text)) throw DataError(f.string() + ": invalid UTF-8");
        c.documents.push_back(std::move(text));
      }
      if (fs::exists(dir / "query.txt")) {
        c.query = read_text_file((dir / "query.txt").string());
        while (!c.query.empty() && (c.query.back() == '\n' || c.query.back() == '\r')) c.query.pop_back();
      }
      ++rep.rows;
      if (c.documents.empty()) {
        rep.warnings.push_back(dir.string() + ": cluster has no documents");
        continue;
      }
      out.push_back(std::move(c));
    }
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++rep.rows;
    try {
      if (!utf8::valid(line)) throw DataError("invalid UTF-8");
      const auto row = json::parse(line);
      ClusterInput c;
      c.id = row.contains("id") ? row["id"].get<std::string>() : std::to_string(line_no);
      c.documents = row.at("documents").get<std::vector<std::string>>();
      if (row.contains("query") && !row["query"].is_null()) c.query = row["query"].get<std::string>();
      if (c.documents.empty()) throw DataError("cluster has no documents");
      out.push_back(std::move(c));
    } catch (const std::exception& e) {
      rep.warnings.push_back(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (vocab_size < 1) throw ConfigError("synthetic spec: vocab_size must be >= 1");
  if (marked_spans < 0 || query_spans < 1) throw ConfigError("synthetic spec: need marked_spans >= 0, query_spans >= 1");
  if (cued_spans < marked_spans) throw ConfigError("synthetic spec: cued_spans must be >= marked_spans");
  if (min_span_words < 0 || max_span_words < min_span_words) {
    throw ConfigError("synthetic spec: invalid span length range");
  }
  if (min_doc_words < 1 || max_doc_words < min_doc_words) throw ConfigError("synthetic spec: invalid document length range");
  if (noise_rate < 0.0 || noise_rate > 1.0) throw ConfigError("synthetic spec: noise_rate must lie in [0,1]");
  const int spans = cued_spans + 2 * query_spans;
  if (spans > static_cast<int>(marker_words().size())) {
    throw ConfigError("synthetic spec: at most " + std::to_string(marker_words().size()) + " spans per document");
  }
  const int needed = spans * (1 + max_span_words) + cued_spans;
  if (needed > min_doc_words) {
    throw ConfigError("synthetic spec: spans need up to " + std::to_string(needed) +
                      " words but documents may be as short as " + std::to_string(min_doc_words));
  }
}

std::string SyntheticDocument::text() const { return join(words); }

std::string SyntheticDocument::span_text(const std::vector<int>& span_indices) const {
  std::vector<std::string> out;
  for (int s : span_indices) {
    const auto& sp = spans.at(static_cast<std::size_t>(s));
    for (int w = sp.begin; w < sp.end; ++w) out.push_back(words[static_cast<std::size_t>(w)]);
  }
  return join(out);
}

std::vector<int> SyntheticDocument::span_mask(const std::vector<int>& span_indices) const {
  std::vector<int> mask(words.size(), 0);
  for (int s : span_indices) {
    const auto& sp = spans.at(static_cast<std::size_t>(s));
    for (int w = sp.begin; w < sp.end; ++w) mask[static_cast<std::size_t>(w)] = 1;
  }
  return mask;
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, int n) {
  spec.validate();
  if (n < 1) throw ConfigError("generate_synthetic: n must be >= 1");
  const auto vocab = content_words(spec.vocab_size);
  const auto& markers = marker_words();
  const auto& fillers = filler_words();
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  SyntheticCorpus corpus;
  const int span_count = spec.cued_spans + 2 * spec.query_spans;
  for (int i = 0; i < n; ++i) {
    SyntheticDocument doc;
    doc.id = "syn-" + std::to_string(i);
    const int target_len = uniform(spec.min_doc_words, spec.max_doc_words);

    std::vector<int> lengths(static_cast<std::size_t>(span_count));
    for (auto& l : lengths) l = uniform(spec.min_span_words, spec.max_span_words);
    std::vector<int> order(static_cast<std::size_t>(span_count));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> cued(static_cast<std::size_t>(span_count), false);
    for (int k = 0; k < spec.cued_spans; ++k) cued[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;

    int used = spec.cued_spans;
    for (int l : lengths) used += 1 + l;
    std::vector<int> gaps(static_cast<std::size_t>(span_count + 1), 0);
    for (int f = used; f < target_len; ++f) ++gaps[static_cast<std::size_t>(uniform(0, span_count))];

    std::vector<std::string> chosen_markers = markers;
    std::shuffle(chosen_markers.begin(), chosen_markers.end(), rng);
    auto add_fillers = [&](int count) {
      for (int f = 0; f < count; ++f)
        doc.words.push_back(fillers[static_cast<std::size_t>(uniform(0, static_cast<int>(fillers.size()) - 1))]);
    };
    for (int s = 0; s < span_count; ++s) {
      add_fillers(gaps[static_cast<std::size_t>(s)]);
      if (cued[static_cast<std::size_t>(s)]) doc.words.emplace_back(kCueWord);
      SyntheticSpan span;
      span.begin = static_cast<int>(doc.words.size());
      span.cued = cued[static_cast<std::size_t>(s)];
      doc.words.push_back(chosen_markers[static_cast<std::size_t>(s)]);
      for (int w = 0; w < lengths[static_cast<std::size_t>(s)]; ++w)
        doc.words.push_back(vocab[static_cast<std::size_t>(uniform(0, spec.vocab_size - 1))]);
      span.end = static_cast<int>(doc.words.size());
      doc.spans.push_back(span);
    }
    add_fillers(gaps.back());

    std::vector<int> cued_idx, open_idx;
    for (int s = 0; s < span_count; ++s) (doc.spans[static_cast<std::size_t>(s)].cued ? cued_idx : open_idx).push_back(s);

    std::vector<int> chosen = cued_idx;
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(static_cast<std::size_t>(spec.marked_spans));
    std::sort(chosen.begin(), chosen.end());

    SummarizationExample generic;
    generic.id = doc.id;
    generic.document = doc.text();
    generic.mask = doc.span_mask(chosen);
    std::vector<std::string> summary;
    for (int s : chosen) {
      const auto& sp = doc.spans[static_cast<std::size_t>(s)];
      for (int w = sp.begin; w < sp.end; ++w) {
        const bool noisy = w > sp.begin && std::bernoulli_distribution(spec.noise_rate)(rng);
        summary.push_back(noisy ? vocab[static_cast<std::size_t>(uniform(0, spec.vocab_size - 1))]
                                : doc.words[static_cast<std::size_t>(w)]);
      }
    }
    generic.summary = join(summary);
    corpus.generic.push_back(std::move(generic));

    std::shuffle(open_idx.begin(), open_idx.end(), rng);
    for (int q = 0; q < 2; ++q) {
      std::vector<int> pick(open_idx.begin() + q * spec.query_spans, open_idx.begin() + (q + 1) * spec.query_spans);
      std::sort(pick.begin(), pick.end());
      std::vector<std::string> query_words;
      for (int s : pick) query_words.push_back(doc.words[static_cast<std::size_t>(doc.spans[static_cast<std::size_t>(s)].begin)]);
      SummarizationExample ex;
      ex.id = doc.id + (q == 0 ? "-a" : "-b");
      ex.document = doc.text();
      ex.query = join(query_words);
      ex.summary = doc.span_text(pick);
      ex.mask = doc.span_mask(pick);
      corpus.qfs.push_back(std::move(ex));
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

std::vector<int> word_mask_to_units(const std::vector<int>& word_mask, const BpeSequence& seq) {
  seq.check();
  std::vector<int> out(seq.size(), 0);
  for (std::size_t u = 0; u < seq.size(); ++u) {
    const auto w = static_cast<std::size_t>(seq.word_index[u]);
    if (w >= word_mask.size()) throw InvariantError("word_mask_to_units: mask shorter than the word count");
    out[u] = word_mask[w];
  }
  return out;
}

}  // namespace laqsum
