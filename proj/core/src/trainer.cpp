#include "laqsum/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "laqsum/errors.hpp"
#include "laqsum/rouge.hpp"

namespace laqsum {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& kv : ModelConfig{}.to_map()) k.push_back(kv.first);
    return k;
  }();
  return keys;
}

bool is_decode_key(const std::string& k) {
  return k == "strategy" || k == "beam_width" || k == "length_penalty";
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used == v.size()) return i;
  } catch (const std::exception&) {
  }
  throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::mt19937_64 example_rng(std::uint64_t seed, int step, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(index), 0x51A7u};
  return std::mt19937_64(seq);
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

void TrainConfig::validate() const {
  if (beta < 0.0 || omega < 0.0) throw ConfigError("train config: beta and omega must be >= 0");
  if (!(delta_end >= 0.0 && delta_end <= delta_start && delta_start <= 1.0)) {
    throw ConfigError("train config: need 0 <= delta_end <= delta_start <= 1");
  }
  if (!(lr > 0.0)) throw ConfigError("train config: lr must be > 0");
  if (warmup_steps < 0) throw ConfigError("train config: warmup_steps must be >= 0");
  if (total_steps < 1) throw ConfigError("train config: total_steps must be >= 1");
  if (batch_size < 1 || accumulation_steps < 1) throw ConfigError("train config: batch_size and accumulation_steps must be >= 1");
  if (clip_norm < 0.0) throw ConfigError("train config: clip_norm must be >= 0");
  if (bpe_merges < 0) throw ConfigError("train config: bpe_merges must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train config: checkpoint_every must be >= 0");
  model.validate();
}

TrainConfig TrainConfig::from_map(const std::map<std::string, std::string>& kv) {
  TrainConfig c;
  std::map<std::string, std::string> model_kv;
  for (const auto& [k, v] : kv) {
    if (k == "beta") c.beta = to_double(k, v);
    else if (k == "omega") c.omega = to_double(k, v);
    else if (k == "delta_start") c.delta_start = to_double(k, v);
    else if (k == "delta_end") c.delta_end = to_double(k, v);
    else if (k == "dropout_granularity") {
      if (v == "per_example") c.dropout_granularity = DropoutGranularity::per_example;
      else if (v == "per_token") c.dropout_granularity = DropoutGranularity::per_token;
      else throw ConfigError("config key 'dropout_granularity': expected per_example or per_token");
    } else if (k == "lr") c.lr = to_double(k, v);
    else if (k == "warmup_steps") c.warmup_steps = static_cast<int>(to_int(k, v));
    else if (k == "total_steps") c.total_steps = static_cast<int>(to_int(k, v));
    else if (k == "batch_size") c.batch_size = static_cast<int>(to_int(k, v));
    else if (k == "accumulation_steps") c.accumulation_steps = static_cast<int>(to_int(k, v));
    else if (k == "clip_norm") c.clip_norm = to_double(k, v);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(to_int(k, v));
    else if (k == "bpe_merges") c.bpe_merges = static_cast<int>(to_int(k, v));
    else if (k == "checkpoint_every") c.checkpoint_every = static_cast<int>(to_int(k, v));
    else if (k == "output_dir") c.output_dir = v;
    else if (k == "metrics_path") c.metrics_path = v;
    else if (k == "resume_from") c.resume_from = v;
    else if (std::find(model_keys().begin(), model_keys().end(), k) != model_keys().end()) model_kv[k] = v;
    else if (!is_decode_key(k)) throw ConfigError("unknown config key '" + k + "'");
  }
  c.model = ModelConfig::from_map(model_kv);
  c.validate();
  return c;
}

std::map<std::string, std::string> config_preset(const std::string& name) {
  if (name == "desk") {
    return {{"lr", "0.0005"},      {"warmup_steps", "300"}, {"total_steps", "3000"}, {"batch_size", "8"},
            {"clip_norm", "1"},    {"bpe_merges", "500"},   {"d_model", "64"},       {"num_heads", "4"},
            {"ff_dim", "256"},     {"shared_layers", "2"},  {"decoder_layers", "2"}, {"max_source_length", "128"}};
  }
  if (name == "full_scale") {
    return {{"lr", "0.00003"},       {"warmup_steps", "500"},  {"total_steps", "20000"},
            {"batch_size", "8"},     {"accumulation_steps", "32"}, {"d_model", "1024"},
            {"num_heads", "16"},     {"ff_dim", "4096"},       {"shared_layers", "11"},
            {"document_layers", "1"}, {"query_layers", "1"},   {"decoder_layers", "12"},
            {"max_source_length", "640"}};
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk or full_scale)");
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_map(parse_key_values(ss.str()));
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  auto m = model.to_map();
  m["beta"] = fmt(beta);
  m["omega"] = fmt(omega);
  m["delta_start"] = fmt(delta_start);
  m["delta_end"] = fmt(delta_end);
  m["dropout_granularity"] = dropout_granularity == DropoutGranularity::per_example ? "per_example" : "per_token";
  m["lr"] = fmt(lr);
  m["warmup_steps"] = std::to_string(warmup_steps);
  m["total_steps"] = std::to_string(total_steps);
  m["batch_size"] = std::to_string(batch_size);
  m["accumulation_steps"] = std::to_string(accumulation_steps);
  m["clip_norm"] = fmt(clip_norm);
  m["seed"] = std::to_string(seed);
  m["bpe_merges"] = std::to_string(bpe_merges);
  m["checkpoint_every"] = std::to_string(checkpoint_every);
  return m;
}

std::vector<TrainExample> prepare_examples(const SummarizerModel& model,
                                           const std::vector<SummarizationExample>& examples) {
  std::vector<TrainExample> out;
  out.reserve(examples.size());
  const auto& tok = model.tokenizer();
  for (const auto& ex : examples) {
    validate_example(ex, true);
    TrainExample t;
    t.id = ex.id;
    t.document = model.clip_source(tok.encode_prefixed(ex.document));
    t.summary = tok.encode_prefixed(ex.summary);
    t.labels = lcs_align(t.document, t.summary);
    if (!ex.mask.empty()) t.unit_mask = word_mask_to_units(ex.mask, t.document);
    out.push_back(std::move(t));
  }
  return out;
}

Trainer::Trainer(SummarizerModel& model, TrainConfig config)
    : model_(model), config_(std::move(config)), optimizer_([&] {
        AdamConfig a;
        a.lr = config_.lr;
        a.warmup_steps = config_.warmup_steps;
        a.clip_norm = config_.clip_norm;
        return a;
      }()) {
  config_.validate();
}

std::vector<std::size_t> Trainer::batch_indices(std::size_t corpus_size) const {
  if (corpus_size == 0) throw ConfigError("batch_indices: corpus is empty");
  const std::size_t per_step = static_cast<std::size_t>(config_.batch_size) * config_.accumulation_steps;
  std::vector<std::size_t> out;
  out.reserve(per_step);
  std::size_t cached_epoch = static_cast<std::size_t>(-1);
  std::vector<std::size_t> perm(corpus_size);
  for (std::size_t j = 0; j < per_step; ++j) {
    const std::size_t p = static_cast<std::size_t>(step_) * per_step + j;
    const std::size_t epoch = p / corpus_size;
    if (epoch != cached_epoch) {
      std::iota(perm.begin(), perm.end(), 0);
      std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                        static_cast<std::uint32_t>(epoch), 0xE90Cu};
      std::mt19937_64 rng(seq);
      std::shuffle(perm.begin(), perm.end(), rng);
      cached_epoch = epoch;
    }
    out.push_back(perm[p % corpus_size]);
  }
  return out;
}

StepMetrics Trainer::train_step(std::span<const TrainExample> batch) {
  const std::size_t per_step = static_cast<std::size_t>(config_.batch_size) * config_.accumulation_steps;
  if (batch.size() != per_step) {
    throw ConfigError("train_step: expected " + std::to_string(per_step) + " examples, got " +
                      std::to_string(batch.size()));
  }
  const int s = step_;
  StepMetrics metrics;
  metrics.step = s;
  metrics.delta = anneal_delta(std::min(s, config_.total_steps - 1), config_.total_steps - 1, config_.delta_start,
                               config_.delta_end);
  const auto omega = static_cast<float>(config_.omega), beta = static_cast<float>(config_.beta);
  const auto tau = static_cast<float>(model_.config().tau);
  const float norm = 1.0f / static_cast<float>(per_step);

  auto& params = model_.params();
  params.zero_grad();
  for (int micro = 0; micro < config_.accumulation_steps; ++micro) {
    Tensor<float> micro_loss;
    for (int k = 0; k < config_.batch_size; ++k) {
      const std::size_t j = static_cast<std::size_t>(micro) * config_.batch_size + k;
      const auto& ex = batch[j];
      auto rng = example_rng(config_.seed, s, j);

      const auto enc = model_.encode(ex.document);
      const auto belief = posterior(enc.logits, tau, PosteriorMode::train, rng);
      const auto ql = query_loss(belief, ex.labels, omega, beta);
      const auto fed = posterior_dropout(belief, ex.labels, metrics.delta, rng, config_.dropout_granularity);
      const auto [input, target] = model_.teacher_forcing(ex.summary);
      const auto logits = model_.decoder_forward(input, model_.views(enc, fed));
      const auto lm = ad::cross_entropy(logits, target);

      const double lm_v = lm.item(), tag_v = ql.tag.item(), ent_v = ql.entropy.item();
      if (!std::isfinite(lm_v)) throw NonFiniteError("non-finite l_lm on example '" + ex.id + "' at step " + std::to_string(s));
      if (!std::isfinite(tag_v) || !std::isfinite(ent_v)) {
        throw NonFiniteError("non-finite l_query on example '" + ex.id + "' at step " + std::to_string(s));
      }
      metrics.l_lm += lm_v / static_cast<double>(per_step);
      metrics.l_tag += tag_v / static_cast<double>(per_step);
      metrics.l_entropy += ent_v / static_cast<double>(per_step);
      metrics.l_query += static_cast<double>(ql.total.item()) / static_cast<double>(per_step);

      const auto example_loss = ad::scale(ad::add(lm, ql.total), norm);
      micro_loss = micro_loss.defined() ? ad::add(micro_loss, example_loss) : example_loss;
    }
    micro_loss.backward();
  }
  metrics.total = metrics.l_lm + metrics.l_query;
  optimizer_.step(params, s + 1);
  metrics.lr = optimizer_.last_lr();
  ++step_;
  return metrics;
}

void Trainer::save(const std::string& path) const {
  Checkpoint ckpt;
  model_.save(ckpt);
  optimizer_.save_state(ckpt, model_.params());
  ckpt.meta["train.step"] = std::to_string(step_);
  for (const auto& [k, v] : config_.to_map()) ckpt.meta["train." + k] = v;
  save_checkpoint(path, ckpt);
}

void Trainer::resume(const Checkpoint& ckpt) {
  auto it = ckpt.meta.find("train.step");
  if (it == ckpt.meta.end()) throw DataError("checkpoint has no training state");
  ckpt.load_params(model_.params(), "model/");
  optimizer_.load_state(ckpt, model_.params());
  step_ = std::stoi(it->second);
}

std::string metrics_csv_header() { return "step,l_lm,l_tag,l_entropy,delta,lr"; }

std::string metrics_csv_row(const StepMetrics& m) {
  std::ostringstream os;
  os.precision(9);
  os << m.step << ',' << m.l_lm << ',' << m.l_tag << ',' << m.l_entropy << ',' << m.delta << ',' << m.lr;
  return os.str();
}

TrainResult train_loop(SummarizerModel& model, const std::vector<TrainExample>& corpus, const TrainConfig& config,
                       const StepCallback& on_step) {
  if (corpus.empty()) throw ConfigError("train_loop: corpus is empty");
  config.validate();
  Trainer trainer(model, config);
  if (!config.resume_from.empty()) trainer.resume(load_checkpoint(config.resume_from));

  std::ofstream csv;
  if (!config.metrics_path.empty()) {
    const fs::path p(config.metrics_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const bool append = trainer.completed_steps() > 0 && fs::exists(p);
    csv.open(p, append ? std::ios::app : std::ios::trunc);
    if (!csv) throw DataError("cannot write metrics log '" + config.metrics_path + "'");
    if (!append) csv << metrics_csv_header() << '\n';
  }
  if (!config.output_dir.empty()) fs::create_directories(config.output_dir);

  TrainResult result;
  std::vector<TrainExample> batch;
  while (trainer.completed_steps() < config.total_steps) {
    batch.clear();
    for (auto i : trainer.batch_indices(corpus.size())) batch.push_back(corpus[i]);
    const auto m = trainer.train_step(batch);
    result.metrics.push_back(m);
    if (csv.is_open()) csv << metrics_csv_row(m) << '\n' << std::flush;
    if (on_step) on_step(m);
    const int done = trainer.completed_steps();
    if (!config.output_dir.empty() && config.checkpoint_every > 0 && done % config.checkpoint_every == 0 &&
        done < config.total_steps) {
      std::ostringstream name;
      name << "step-" << done << ".ckpt";
      trainer.save((fs::path(config.output_dir) / name.str()).string());
    }
  }
  if (!config.output_dir.empty()) {
    result.final_checkpoint = (fs::path(config.output_dir) / "final.ckpt").string();
    trainer.save(result.final_checkpoint);
  }
  return result;
}

MergeTable train_tokenizer(const std::vector<SummarizationExample>& examples, int merges) {
  std::vector<std::string> texts;
  texts.reserve(examples.size() * 2);
  for (const auto& ex : examples) {
    texts.push_back(" " + ex.document);
    if (!ex.summary.empty()) texts.push_back(" " + ex.summary);
  }
  return MergeTable::train(texts, merges);
}

double mean_posterior_auc(const SummarizerModel& model, std::span<const TrainExample> examples) {
  ad::NoGradGuard no_grad;
  double total = 0.0;
  int counted = 0;
  for (const auto& ex : examples) {
    if (ex.unit_mask.size() != ex.document.size()) continue;
    const auto positives = std::count(ex.unit_mask.begin(), ex.unit_mask.end(), 1);
    if (positives == 0 || positives == static_cast<long>(ex.unit_mask.size())) continue;
    const auto enc = model.encode(ex.document);
    const auto belief = model.infer_belief(enc, ex.document, BpeSequence{});
    total += posterior_auc(belief.values(), ex.unit_mask);
    ++counted;
  }
  if (counted == 0) throw InvariantError("mean_posterior_auc: no example carries a two-class mask");
  return total / counted;
}

}  // namespace laqsum
