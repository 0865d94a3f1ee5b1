#include "laqsum/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "laqsum/errors.hpp"

namespace laqsum {

namespace {

constexpr std::uint64_t kQueryStream = 0x9E3779B97F4A7C15ULL;

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](const char* name, int v) {
    if (v <= 0) throw ConfigError(std::string("model config: ") + name + " must be > 0, got " + std::to_string(v));
  };
  positive("d_model", d_model);
  positive("num_heads", num_heads);
  positive("ff_dim", ff_dim);
  positive("document_layers", document_layers);
  positive("query_layers", query_layers);
  positive("decoder_layers", decoder_layers);
  positive("max_source_length", max_source_length);
  positive("max_target_length", max_target_length);
  if (shared_layers < 0) throw ConfigError("model config: shared_layers must be >= 0");
  if (d_model % num_heads != 0) {
    throw ConfigError("model config: d_model " + std::to_string(d_model) + " is not divisible by num_heads " +
                      std::to_string(num_heads));
  }
  if (!(tau > 0.0)) throw ConfigError("model config: tau must be > 0");
  if (!(ln_eps > 0.0)) throw ConfigError("model config: ln_eps must be > 0");
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {
      {"d_model", std::to_string(d_model)},
      {"num_heads", std::to_string(num_heads)},
      {"ff_dim", std::to_string(ff_dim)},
      {"shared_layers", std::to_string(shared_layers)},
      {"document_layers", std::to_string(document_layers)},
      {"query_layers", std::to_string(query_layers)},
      {"decoder_layers", std::to_string(decoder_layers)},
      {"max_source_length", std::to_string(max_source_length)},
      {"max_target_length", std::to_string(max_target_length)},
      {"tau", fmt(tau)},
      {"ln_eps", fmt(ln_eps)},
      {"dual_view", dual_view ? "true" : "false"},
      {"cross_order", cross_order == CrossOrder::query_first ? "query_first" : "document_first"},
      {"cross_every_layer", cross_every_layer ? "true" : "false"},
  };
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
  ModelConfig c;
  for (const auto& [k, v] : kv) {
    if (k == "d_model") c.d_model = parse_int(k, v);
    else if (k == "num_heads") c.num_heads = parse_int(k, v);
    else if (k == "ff_dim") c.ff_dim = parse_int(k, v);
    else if (k == "shared_layers") c.shared_layers = parse_int(k, v);
    else if (k == "document_layers") c.document_layers = parse_int(k, v);
    else if (k == "query_layers") c.query_layers = parse_int(k, v);
    else if (k == "decoder_layers") c.decoder_layers = parse_int(k, v);
    else if (k == "max_source_length") c.max_source_length = parse_int(k, v);
    else if (k == "max_target_length") c.max_target_length = parse_int(k, v);
    else if (k == "tau") c.tau = parse_double(k, v);
    else if (k == "ln_eps") c.ln_eps = parse_double(k, v);
    else if (k == "dual_view") c.dual_view = parse_bool(k, v);
    else if (k == "cross_every_layer") c.cross_every_layer = parse_bool(k, v);
    else if (k == "cross_order") {
      if (v == "query_first") c.cross_order = CrossOrder::query_first;
      else if (v == "document_first") c.cross_order = CrossOrder::document_first;
      else throw ConfigError("config key 'cross_order': expected query_first or document_first, got '" + v + "'");
    }
  }
  c.validate();
  return c;
}

template <typename T>
Summarizer<T>::Summarizer(ModelConfig config, MergeTable tokenizer, std::uint64_t seed)
    : config_(config), tokenizer_(std::move(tokenizer)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::mt19937_64 query_rng(seed ^ kQueryStream);
  const int d = config_.d_model;
  const int positions = std::max(config_.max_source_length, config_.max_target_length);

  embedding_ = params_.add_uniform("embedding", {vocab_size(), d}, static_cast<T>(std::sqrt(3.0 / d)), rng);
  output_bias_ = params_.add_constant("output.bias", {vocab_size()}, T(0));
  positions_ = nn::sinusoidal_positions<T>(positions, d);

  for (int i = 0; i < config_.shared_layers; ++i) shared_.push_back(make_encoder_layer("shared." + std::to_string(i), rng));
  for (int i = 0; i < config_.document_layers; ++i)
    document_.push_back(make_encoder_layer("document." + std::to_string(i), rng));
  for (int i = 0; i < config_.query_layers; ++i)
    query_.push_back(make_encoder_layer("query." + std::to_string(i), query_rng));
  scorer_ = InferenceNet<T>::create(params_, "scorer", d, query_rng);

  const auto eps = static_cast<T>(config_.ln_eps);
  for (int i = 0; i < config_.decoder_layers; ++i) {
    const std::string name = "decoder." + std::to_string(i);
    DecoderLayer layer;
    layer.self_attn = nn::AttentionParams<T>::create(params_, name + ".self", d, rng);
    layer.ln_self = nn::LayerNorm<T>::create(params_, name + ".ln_self", d, eps);
    layer.has_cross = config_.cross_every_layer || i == config_.decoder_layers - 1;
    if (layer.has_cross) {
      layer.q_attn = nn::AttentionParams<T>::create(params_, name + ".cross_q", d, rng);
      layer.ln_q = nn::LayerNorm<T>::create(params_, name + ".ln_q", d, eps);
      if (config_.dual_view) {
        layer.d_attn = nn::AttentionParams<T>::create(params_, name + ".cross_d", d, rng);
        layer.ln_d = nn::LayerNorm<T>::create(params_, name + ".ln_d", d, eps);
      }
    }
    layer.ff = nn::FeedForward<T>::create(params_, name + ".ff", d, config_.ff_dim, rng);
    layer.ln_ff = nn::LayerNorm<T>::create(params_, name + ".ln_ff", d, eps);
    decoder_.push_back(std::move(layer));
  }
}

template <typename T>
typename Summarizer<T>::EncoderLayer Summarizer<T>::make_encoder_layer(const std::string& name, std::mt19937_64& rng) {
  const int d = config_.d_model;
  const auto eps = static_cast<T>(config_.ln_eps);
  EncoderLayer layer;
  layer.attn = nn::AttentionParams<T>::create(params_, name + ".attn", d, rng);
  layer.ln1 = nn::LayerNorm<T>::create(params_, name + ".ln1", d, eps);
  layer.ff = nn::FeedForward<T>::create(params_, name + ".ff", d, config_.ff_dim, rng);
  layer.ln2 = nn::LayerNorm<T>::create(params_, name + ".ln2", d, eps);
  return layer;
}

template <typename T>
Tensor<T> Summarizer<T>::run_encoder(const Tensor<T>& x, const EncoderLayer& layer) const {
  auto h = layer.ln1(ad::add(x, nn::multi_head_attention(x, x, x, layer.attn, config_.num_heads)));
  return layer.ln2(ad::add(h, layer.ff(h)));
}

template <typename T>
Tensor<T> Summarizer<T>::embed(const std::vector<int>& ids) const {
  const auto n = static_cast<int>(ids.size());
  auto tokens = ad::scale(ad::embedding(embedding_, ids), static_cast<T>(std::sqrt(config_.d_model)));
  return ad::add(tokens, ad::slice_rows(positions_, 0, n));
}

template <typename T>
BpeSequence Summarizer<T>::clip_source(const BpeSequence& doc) const {
  doc.check();
  if (doc.size() <= static_cast<std::size_t>(config_.max_source_length)) return doc;
  BpeSequence out;
  const auto n = static_cast<std::ptrdiff_t>(config_.max_source_length);
  out.ids.assign(doc.ids.begin(), doc.ids.begin() + n);
  out.surfaces.assign(doc.surfaces.begin(), doc.surfaces.begin() + n);
  out.word_index.assign(doc.word_index.begin(), doc.word_index.begin() + n);
  return out;
}

template <typename T>
std::vector<int> Summarizer<T>::model_ids(const std::vector<int>& ids) const {
  std::vector<int> out(ids.size());
  std::transform(ids.begin(), ids.end(), out.begin(),
                 [&](int id) { return id >= 0 && id < tokenizer_.size() ? id : unk_id(); });
  return out;
}

template <typename T>
Encoding<T> Summarizer<T>::encode(const BpeSequence& doc) const {
  if (doc.empty()) throw DataError("encode: empty document, nothing to summarize");
  const auto clipped = clip_source(doc);
  auto h = embed(model_ids(clipped.ids));
  for (const auto& layer : shared_) h = run_encoder(h, layer);
  auto d = h;
  for (const auto& layer : document_) d = run_encoder(d, layer);
  auto hq = h;
  for (const auto& layer : query_) hq = run_encoder(hq, layer);
  return Encoding<T>{d, hq, scorer_.score(hq)};
}

template <typename T>
DualView<T> Summarizer<T>::views(const Encoding<T>& enc, const QueryBelief<T>& belief) const {
  DualView<T> v;
  v.q = query_focused_view(belief, enc.hq);
  v.d = enc.document;
  v.pad_mask.assign(static_cast<std::size_t>(enc.document.rows()), 0);
  return v;
}

template <typename T>
Tensor<T> Summarizer<T>::decoder_forward(const std::vector<int>& prefix, const DualView<T>& views) const {
  if (prefix.empty() || prefix.front() != bos_id()) {
    throw InvariantError("decoder_forward: prefix must start with the begin sentinel");
  }
  if (prefix.size() > static_cast<std::size_t>(config_.max_target_length)) {
    throw InvariantError("decoder_forward: prefix length " + std::to_string(prefix.size()) + " exceeds " +
                         std::to_string(config_.max_target_length));
  }
  if (views.q.shape() != views.d.shape()) {
    throw ShapeError("decoder_forward: Q " + ad::shape_str(views.q.shape()) + " and D " +
                     ad::shape_str(views.d.shape()) + " differ");
  }
  const int t = static_cast<int>(prefix.size());
  const auto causal = ad::Mask::causal(t);
  const bool padded = std::any_of(views.pad_mask.begin(), views.pad_mask.end(), [](auto b) { return b != 0; });
  const auto cross_mask = ad::Mask::key_padding(t, views.pad_mask);
  const ad::Mask* cm = padded ? &cross_mask : nullptr;
  const int heads = config_.num_heads;

  auto h = embed(prefix);
  for (const auto& layer : decoder_) {
    h = layer.ln_self(ad::add(h, nn::multi_head_attention(h, h, h, layer.self_attn, heads, &causal)));
    if (layer.has_cross) {
      auto attend_q = [&] { h = layer.ln_q(ad::add(h, nn::multi_head_attention(h, views.q, views.q, layer.q_attn, heads, cm))); };
      auto attend_d = [&] { h = layer.ln_d(ad::add(h, nn::multi_head_attention(h, views.d, views.d, layer.d_attn, heads, cm))); };
      if (!config_.dual_view) {
        attend_q();
      } else if (config_.cross_order == CrossOrder::query_first) {
        attend_q();
        attend_d();
      } else {
        attend_d();
        attend_q();
      }
    }
    h = layer.ln_ff(ad::add(h, layer.ff(h)));
  }
  return ad::add_row(ad::matmul_nt(h, embedding_), output_bias_);
}

template <typename T>
std::pair<std::vector<int>, std::vector<int>> Summarizer<T>::teacher_forcing(const BpeSequence& summary) const {
  auto ids = model_ids(summary.ids);
  const auto keep = std::min(ids.size(), static_cast<std::size_t>(config_.max_target_length - 1));
  ids.resize(keep);
  std::vector<int> input{bos_id()};
  input.insert(input.end(), ids.begin(), ids.end());
  std::vector<int> target = ids;
  target.push_back(eos_id());
  return {input, target};
}

template <typename T>
QueryBelief<T> Summarizer<T>::infer_belief(const Encoding<T>& enc, const BpeSequence& doc,
                                           const BpeSequence& query) const {
  std::mt19937_64 unused(0);
  auto belief = posterior(enc.logits, static_cast<T>(config_.tau), PosteriorMode::infer, unused);
  return calibrate(belief, clip_source(doc), query);
}

namespace {

template <typename T>
std::vector<double> log_softmax_row(const Tensor<T>& logits, int row, int banned) {
  const int v = logits.cols();
  std::vector<double> out(static_cast<std::size_t>(v));
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < v; ++j) {
    out[j] = j == banned ? -std::numeric_limits<double>::infinity() : static_cast<double>(logits.at(row, j));
    mx = std::max(mx, out[j]);
  }
  double z = 0.0;
  for (int j = 0; j < v; ++j) z += std::exp(out[j] - mx);
  const double lz = mx + std::log(z);
  for (auto& x : out) x -= lz;
  return out;
}

}  // namespace

template <typename T>
GenerationResult Summarizer<T>::generate(const BpeSequence& doc, const BpeSequence& query,
                                         const DecodeConfig& decode) const {
  if (doc.empty()) throw DataError("generate: empty document, nothing to summarize");
  ad::NoGradGuard no_grad;
  const auto enc = encode(doc);
  const auto belief = infer_belief(enc, doc, query);
  const auto v = views(enc, belief);
  const int limit = decode.max_target_length > 0 ? std::min(decode.max_target_length, config_.max_target_length)
                                                 : config_.max_target_length;

  GenerationResult result;
  result.belief = belief.values();

  if (decode.strategy == DecodeConfig::Strategy::greedy) {
    std::vector<int> prefix{bos_id()};
    while (static_cast<int>(prefix.size()) <= limit) {
      const auto logits = decoder_forward(prefix, v);
      const auto lp = log_softmax_row(logits, logits.rows() - 1, bos_id());
      const int next = static_cast<int>(std::max_element(lp.begin(), lp.end()) - lp.begin());
      if (next == eos_id()) {
        result.finished = true;
        break;
      }
      if (static_cast<int>(prefix.size()) == limit) break;
      prefix.push_back(next);
    }
    result.ids.assign(prefix.begin() + 1, prefix.end());
    return result;
  }

  if (decode.beam_width <= 0) throw ConfigError("generate: beam_width must be > 0");
  struct Hyp {
    std::vector<int> prefix;
    double score = 0.0;
  };
  auto normalized = [&](const Hyp& h, std::size_t len) {
    return h.score / std::pow(static_cast<double>(std::max<std::size_t>(len, 1)), decode.length_penalty);
  };
  std::vector<Hyp> beams{{{bos_id()}, 0.0}};
  std::vector<std::pair<Hyp, double>> finished;
  while (!beams.empty()) {
    std::vector<Hyp> candidates;
    for (const auto& hyp : beams) {
      const auto logits = decoder_forward(hyp.prefix, v);
      const auto lp = log_softmax_row(logits, logits.rows() - 1, bos_id());
      std::vector<int> order(lp.size());
      for (std::size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(decode.beam_width), order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](int a, int b) { return lp[a] > lp[b] || (lp[a] == lp[b] && a < b); });
      for (std::size_t r = 0; r < k; ++r) {
        Hyp next = hyp;
        next.score += lp[order[r]];
        next.prefix.push_back(order[r]);
        candidates.push_back(std::move(next));
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Hyp& a, const Hyp& b) { return a.score > b.score; });
    beams.clear();
    for (auto& c : candidates) {
      if (static_cast<int>(beams.size() + finished.size()) >= decode.beam_width * 2) break;
      const bool ended = c.prefix.back() == eos_id();
      if (ended || static_cast<int>(c.prefix.size()) >= limit) {
        const double score = normalized(c, c.prefix.size() - 1);
        finished.emplace_back(std::move(c), score);
      } else if (static_cast<int>(beams.size()) < decode.beam_width) {
        beams.push_back(std::move(c));
      }
    }
    if (static_cast<int>(finished.size()) >= decode.beam_width) break;
  }
  const auto best = std::max_element(finished.begin(), finished.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  const auto& p = best->first.prefix;
  result.finished = p.back() == eos_id();
  result.ids.assign(p.begin() + 1, result.finished ? p.end() - 1 : p.end());
  return result;
}

template <typename T>
std::string Summarizer<T>::detokenize(const std::vector<int>& ids) const {
  BpeSequence seq;
  for (int id : ids) {
    if (id == bos_id() || id == eos_id()) continue;
    seq.ids.push_back(id);
    seq.surfaces.push_back(id == unk_id() ? "<unk>" : tokenizer_.surface(id));
    seq.word_index.push_back(0);
  }
  auto text = decode(seq);
  const auto first = text.find_first_not_of(' ');
  if (first == std::string::npos) return "";
  const auto last = text.find_last_not_of(' ');
  return text.substr(first, last - first + 1);
}

template <typename T>
void Summarizer<T>::save(Checkpoint& ckpt) const {
  ckpt.meta["format"] = "laqsum-model";
  ckpt.meta["tokenizer"] = tokenizer_.serialize();
  for (const auto& [k, v] : config_.to_map()) ckpt.meta["model." + k] = v;
  ckpt.put_params(params_, "model/");
}

template <typename T>
Summarizer<T> Summarizer<T>::load(const Checkpoint& ckpt) {
  auto fmt_it = ckpt.meta.find("format");
  if (fmt_it == ckpt.meta.end() || fmt_it->second != "laqsum-model") {
    throw DataError("checkpoint does not hold a summarizer model");
  }
  auto tok = ckpt.meta.find("tokenizer");
  if (tok == ckpt.meta.end()) throw DataError("checkpoint lacks the tokenizer");
  std::map<std::string, std::string> kv;
  for (const auto& [k, v] : ckpt.meta)
    if (k.rfind("model.", 0) == 0) kv[k.substr(6)] = v;
  Summarizer model(ModelConfig::from_map(kv), MergeTable::deserialize(tok->second), 0);
  ckpt.load_params(model.params_, "model/");
  return model;
}

template class Summarizer<float>;
template class Summarizer<double>;

}  // namespace laqsum
