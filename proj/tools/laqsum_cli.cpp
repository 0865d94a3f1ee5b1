#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "laqsum/corpus.hpp"
#include "laqsum/errors.hpp"
#include "laqsum/latent_query.hpp"
#include "laqsum/mds.hpp"
#include "laqsum/model.hpp"
#include "laqsum/rouge.hpp"
#include "laqsum/trainer.hpp"
#include "laqsum/weak_labels.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace laqsum;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("laqsum");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("LAQ_LOG_LEVEL")) {
    const auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only "off" itself should silence.
    if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
    else spdlog::warn("LAQ_LOG_LEVEL='{}' not recognised, keeping info", env);
  }
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") std::cout << text << std::flush;
  else write_file_atomic(path, text);
}

std::map<std::string, std::string> overrides(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

DecodeConfig decode_config(const std::string& strategy, int beam_width, int max_length, double length_penalty) {
  DecodeConfig dc;
  if (strategy == "greedy") dc.strategy = DecodeConfig::Strategy::greedy;
  else if (strategy == "beam") dc.strategy = DecodeConfig::Strategy::beam;
  else throw ConfigError("unknown decode strategy '" + strategy + "'");
  if (beam_width < 1) throw ConfigError("--beam-width must be >= 1");
  if (max_length < 0) throw ConfigError("--max-length must be >= 0");
  dc.beam_width = beam_width;
  dc.max_target_length = max_length;
  dc.length_penalty = length_penalty;
  return dc;
}

std::vector<SummarizationExample> load_examples(const std::string& path, bool strict, bool require_summary) {
  LoadReport report;
  auto rows = load_jsonl(path, LoadOptions{strict, require_summary}, &report);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  spdlog::info("loaded {} of {} rows from {}", rows.size(), report.rows, path);
  return rows;
}

SummarizerModel load_model(const std::string& path) {
  if (!fs::exists(path)) throw DataError("checkpoint '" + path + "' does not exist");
  return SummarizerModel::load(load_checkpoint(path));
}

// {"id": ..., "summary": ...} rows keyed by id; "references" may hold a list.
std::map<std::string, std::vector<std::string>> load_summaries(const std::string& path) {
  const auto text = read_text_file(path);
  std::map<std::string, std::vector<std::string>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto row = json::parse(line);
      if (!row.contains("id")) throw DataError("missing 'id'");
      const auto id = row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump();
      std::vector<std::string> texts;
      if (row.contains("references")) texts = row["references"].get<std::vector<std::string>>();
      else if (row.contains("summary")) texts.push_back(row["summary"].get<std::string>());
      else throw DataError("missing 'summary'");
      auto& slot = out[id];
      slot.insert(slot.end(), texts.begin(), texts.end());
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

struct TrainArgs {
  std::string config, corpus, output_dir, metrics, resume, preset;
  std::vector<std::string> sets;
  bool strict = false;
};

int run_train(const TrainArgs& a) {
  auto kv = a.preset.empty() ? std::map<std::string, std::string>{} : config_preset(a.preset);
  if (!a.config.empty()) {
    for (const auto& [k, v] : parse_key_values(read_text_file(a.config))) kv[k] = v;
  }
  for (const auto& [k, v] : overrides(a.sets)) kv[k] = v;
  if (!a.output_dir.empty()) kv["output_dir"] = a.output_dir;
  if (!a.metrics.empty()) kv["metrics_path"] = a.metrics;
  if (!a.resume.empty()) kv["resume_from"] = a.resume;
  auto cfg = TrainConfig::from_map(kv);
  if (cfg.output_dir.empty()) throw ConfigError("train needs --output-dir (or output_dir in the config)");
  if (cfg.metrics_path.empty()) cfg.metrics_path = (fs::path(cfg.output_dir) / "metrics.csv").string();

  const auto examples = load_examples(a.corpus, a.strict, true);
  if (examples.empty()) throw DataError("no usable training examples in '" + a.corpus + "'");
  std::optional<SummarizerModel> model;
  if (!cfg.resume_from.empty()) {
    model.emplace(load_model(cfg.resume_from));
  } else {
    model.emplace(cfg.model, train_tokenizer(examples, cfg.bpe_merges), cfg.seed);
  }
  spdlog::info("{} units, {} parameters", model->tokenizer().size(), model->params().total_elements());
  const auto prepared = prepare_examples(*model, examples);
  const int every = std::max(1, cfg.total_steps / 20);
  const auto result = train_loop(*model, prepared, cfg, [&](const StepMetrics& m) {
    if (m.step % every == 0 || m.step + 1 == cfg.total_steps) {
      spdlog::info("step {} l_lm {:.4f} l_query {:.4f} delta {:.3f} lr {:.2e}", m.step, m.l_lm, m.l_query, m.delta,
                   m.lr);
    }
  });
  std::cout << result.final_checkpoint << '\n';
  return kExitOk;
}

int run_tag(const std::string& corpus, const std::string& model_path, int merges, const std::string& output,
            bool strict) {
  const auto examples = load_examples(corpus, strict, true);
  const MergeTable table = model_path.empty() ? train_tokenizer(examples, merges) : load_model(model_path).tokenizer();
  std::string out;
  for (const auto& ex : examples) {
    const auto doc = table.encode_prefixed(ex.document);
    const auto labels = lcs_align(doc, table.encode_prefixed(ex.summary));
    json row{{"id", ex.id}, {"units", doc.surfaces}, {"labels", labels.labels}};
    out += row.dump() + '\n';
  }
  emit(out, output);
  return kExitOk;
}

struct SummarizeArgs {
  std::string model, input, query, cluster, output;
  std::string strategy = "greedy";
  int beam_width = 4;
  int max_length = 0;
  double length_penalty = 1.0;
  int budget = kDefaultBudgetTokens;
};

int run_summarize(const SummarizeArgs& a) {
  if (a.input.empty() == a.cluster.empty()) throw ConfigError("summarize needs exactly one of --input or --cluster");
  const auto model = load_model(a.model);
  const auto dc = decode_config(a.strategy, a.beam_width, a.max_length, a.length_penalty);
  const auto& tok = model.tokenizer();
  if (!a.input.empty()) {
    const auto text = read_text_file(a.input);
    if (!utf8::valid(text)) throw DataError(a.input + ": invalid UTF-8");
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw DataError(a.input + ": document is empty");
    const auto doc = model.clip_source(tok.encode_prefixed(text));
    const auto query = a.query.empty() ? BpeSequence{} : tok.encode_prefixed(a.query);
    emit(model.detokenize(model.generate(doc, query, dc).ids) + '\n', a.output);
    return kExitOk;
  }
  LoadReport report;
  auto clusters = load_clusters(a.cluster, &report);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  if (clusters.empty()) throw DataError("no clusters in '" + a.cluster + "'");
  const ModelSummarizer summarizer(model, dc);
  std::string out;
  for (auto& c : clusters) {
    if (!a.query.empty()) c.query = a.query;
    const auto result = iterative_summarize(make_cluster(c, tok, a.budget), summarizer);
    for (const auto& w : result.warnings) spdlog::warn("cluster {}: {}", c.id, w);
    out += json{{"id", c.id}, {"query", c.query}, {"summary", result.text}}.dump() + '\n';
  }
  emit(out, a.output);
  return kExitOk;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

int run_evaluate(const std::string& candidates, const std::string& references, const std::string& variants_arg,
                 const std::string& output) {
  std::vector<RougeVariant> variants;
  std::stringstream ss(variants_arg);
  for (std::string v; std::getline(ss, v, ',');)
    if (!v.empty()) variants.push_back(parse_rouge_variant(v));
  if (variants.empty()) throw ConfigError("--variants names no metric");
  const auto cand = load_summaries(candidates);
  const auto refs = load_summaries(references);
  std::ostringstream csv;
  csv << "example_id,variant,precision,recall,f1\n";
  std::map<RougeVariant, RougeScore> sums;
  std::size_t n = 0;
  for (const auto& [id, texts] : cand) {
    const auto it = refs.find(id);
    if (it == refs.end()) throw DataError("no reference for candidate '" + id + "'");
    std::vector<std::vector<std::string>> ref_tokens;
    for (const auto& r : it->second) ref_tokens.push_back(rouge_tokenize(r));
    const auto tokens = rouge_tokenize(texts.front());
    for (auto v : variants) {
      const auto s = rouge_multi(v, tokens, ref_tokens);
      csv << csv_field(id) << ',' << to_string(v) << ',' << s.precision << ',' << s.recall << ',' << s.f1 << '\n';
      auto& acc = sums[v];
      acc.precision += s.precision;
      acc.recall += s.recall;
      acc.f1 += s.f1;
    }
    ++n;
  }
  if (n == 0) throw DataError("no candidates in '" + candidates + "'");
  for (auto v : variants) {
    const auto& acc = sums[v];
    const double d = static_cast<double>(n);
    csv << "mean," << to_string(v) << ',' << acc.precision / d << ',' << acc.recall / d << ',' << acc.f1 / d << '\n';
  }
  emit(csv.str(), output);
  return kExitOk;
}

struct SynthArgs {
  SyntheticSpec spec;
  int n = 100;
  std::string split = "generic";
  std::string output;
};

int run_synth(const SynthArgs& a) {
  const auto corpus = generate_synthetic(a.spec, a.n);
  if (a.split == "generic") emit(to_jsonl(corpus.generic), a.output);
  else if (a.split == "qfs") emit(to_jsonl(corpus.qfs), a.output);
  else throw ConfigError("--split must be generic or qfs");
  return kExitOk;
}

int run_inspect(const std::string& model_path, const std::string& input, const std::string& query,
                const std::string& summary, const std::string& output) {
  const auto model = load_model(model_path);
  const auto& tok = model.tokenizer();
  const auto text = read_text_file(input);
  if (!utf8::valid(text)) throw DataError(input + ": invalid UTF-8");
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw DataError(input + ": document is empty");
  const auto doc = model.clip_source(tok.encode_prefixed(text));
  const auto q = query.empty() ? BpeSequence{} : tok.encode_prefixed(query);
  ad::NoGradGuard guard;
  const auto enc = model.encode(doc);
  const auto belief = model.infer_belief(enc, doc, q);
  std::vector<int> labels;
  if (!summary.empty()) labels = lcs_align(doc, tok.encode_prefixed(summary)).labels;
  emit(belief_dump_jsonl(doc, belief.values(), labels), output);
  const auto v = belief.values();
  spdlog::info("source {} entropy {:.4f}", to_string(belief.source), belief_entropy(v));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Latent-query summarization: training, tagging, generation and evaluation"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a summarizer on a JSONL corpus");
  train_cmd->add_option("--corpus", train.corpus, "Training JSONL with document and summary")->required();
  train_cmd->add_option("--preset", train.preset, "Base configuration: desk or full_scale")
      ->check(CLI::IsMember({"desk", "full_scale"}));
  train_cmd->add_option("--config", train.config, "key=value configuration file")->check(CLI::ExistingFile);
  train_cmd->add_option("--set", train.sets, "Override a configuration key (key=value)");
  train_cmd->add_option("--output-dir", train.output_dir, "Checkpoint directory");
  train_cmd->add_option("--metrics", train.metrics, "Metrics CSV (default: <output-dir>/metrics.csv)");
  train_cmd->add_option("--resume", train.resume, "Checkpoint to continue from");
  train_cmd->add_flag("--strict", train.strict, "Abort on the first malformed row");

  std::string tag_corpus, tag_model, tag_output;
  int tag_merges = 500;
  bool tag_strict = false;
  auto* tag_cmd = app.add_subcommand("tag", "Write BPE-LCS weak labels for a corpus");
  tag_cmd->add_option("--corpus", tag_corpus, "JSONL with document and summary")->required();
  tag_cmd->add_option("--model", tag_model, "Take the tokenizer from this checkpoint");
  tag_cmd->add_option("--merges", tag_merges, "Merges when training a tokenizer on the corpus");
  tag_cmd->add_option("--output,-o", tag_output, "Output JSONL (default stdout)");
  tag_cmd->add_flag("--strict", tag_strict, "Abort on the first malformed row");

  SummarizeArgs sum;
  auto* sum_cmd = app.add_subcommand("summarize", "Generate a summary, optionally query-focused");
  sum_cmd->add_option("--model", sum.model, "Checkpoint")->required();
  sum_cmd->add_option("--input", sum.input, "Document text file");
  sum_cmd->add_option("--cluster", sum.cluster, "Cluster directory or JSONL for multi-document mode");
  sum_cmd->add_option("--query", sum.query, "Query text; empty for generic summaries");
  sum_cmd->add_option("--strategy", sum.strategy, "greedy or beam")->check(CLI::IsMember({"greedy", "beam"}));
  sum_cmd->add_option("--beam-width", sum.beam_width, "Beam width");
  sum_cmd->add_option("--max-length", sum.max_length, "Maximum summary units (0: model limit)");
  sum_cmd->add_option("--length-penalty", sum.length_penalty, "Beam length penalty exponent");
  sum_cmd->add_option("--budget", sum.budget, "Token budget per cluster summary");
  sum_cmd->add_option("--output,-o", sum.output, "Output file (default stdout)");

  std::string ev_cand, ev_ref, ev_variants = "R1,R2,RL,RSU4", ev_output;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score candidate summaries with ROUGE");
  ev_cmd->add_option("--candidates", ev_cand, "JSONL {id, summary}")->required();
  ev_cmd->add_option("--references", ev_ref, "JSONL {id, summary} or {id, references}")->required();
  ev_cmd->add_option("--variants", ev_variants, "Comma-separated list of R1,R2,RL,RSU4");
  ev_cmd->add_option("--output,-o", ev_output, "CSV output (default stdout)");

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "Generate the synthetic query-copy corpus");
  syn_cmd->add_option("-n,--count", syn.n, "Number of documents");
  syn_cmd->add_option("--split", syn.split, "generic or qfs")->check(CLI::IsMember({"generic", "qfs"}));
  syn_cmd->add_option("--seed", syn.spec.seed, "Random seed");
  syn_cmd->add_option("--vocab-size", syn.spec.vocab_size, "Content words");
  syn_cmd->add_option("--min-doc-words", syn.spec.min_doc_words, "Shortest document");
  syn_cmd->add_option("--max-doc-words", syn.spec.max_doc_words, "Longest document");
  syn_cmd->add_option("--marked-spans", syn.spec.marked_spans, "Spans in the generic summary");
  syn_cmd->add_option("--cued-spans", syn.spec.cued_spans, "Spans preceded by the cue word");
  syn_cmd->add_option("--query-spans", syn.spec.query_spans, "Spans named by each query");
  syn_cmd->add_option("--min-span-words", syn.spec.min_span_words, "Shortest span content");
  syn_cmd->add_option("--max-span-words", syn.spec.max_span_words, "Longest span content");
  syn_cmd->add_option("--noise-rate", syn.spec.noise_rate, "Chance a summary content word is replaced");
  syn_cmd->add_option("--output,-o", syn.output, "Output JSONL (default stdout)");

  std::string ib_model, ib_input, ib_query, ib_summary, ib_output;
  auto* ib_cmd = app.add_subcommand("inspect-belief", "Dump the per-unit query belief for a document");
  ib_cmd->add_option("--model", ib_model, "Checkpoint")->required();
  ib_cmd->add_option("--input", ib_input, "Document text file")->required();
  ib_cmd->add_option("--query", ib_query, "Query text; calibrates the belief");
  ib_cmd->add_option("--summary", ib_summary, "Reference summary; adds weak labels to the dump");
  ib_cmd->add_option("--output,-o", ib_output, "Output JSONL (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*tag_cmd) return run_tag(tag_corpus, tag_model, tag_merges, tag_output, tag_strict);
    if (*sum_cmd) return run_summarize(sum);
    if (*ev_cmd) return run_evaluate(ev_cand, ev_ref, ev_variants, ev_output);
    if (*syn_cmd) return run_synth(syn);
    if (*ib_cmd) return run_inspect(ib_model, ib_input, ib_query, ib_summary, ib_output);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}
