#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "laqsum/bpe.hpp"
#include "laqsum/latent_query.hpp"
#include "laqsum/nn.hpp"
#include "laqsum/params.hpp"

namespace laqsum {

enum class CrossOrder { query_first, document_first };

struct ModelConfig {
  int d_model = 64;
  int num_heads = 4;
  int ff_dim = 256;
  int shared_layers = 2;
  int document_layers = 1;
  int query_layers = 1;
  int decoder_layers = 2;
  int max_source_length = 128;
  int max_target_length = 64;
  double tau = 0.9;
  double ln_eps = 1e-5;
  // Decoder reads both views; when false it attends to Q only.
  bool dual_view = true;
  CrossOrder cross_order = CrossOrder::query_first;
  // When false only the last decoder layer carries the cross-attention block.
  bool cross_every_layer = true;

  // Throws ConfigError on non-positive sizes or indivisible head counts.
  void validate() const;
  std::map<std::string, std::string> to_map() const;
  static ModelConfig from_map(const std::map<std::string, std::string>& kv);
};

template <typename T>
struct DualView {
  Tensor<T> q;
  Tensor<T> d;
  // Nonzero entries are excluded from cross-attention.
  std::vector<std::uint8_t> pad_mask;
};

template <typename T>
struct Encoding {
  Tensor<T> document;  // D [M, d]
  Tensor<T> hq;        // H_q [M, d]
  Tensor<T> logits;    // scorer output [M, 2]
};

struct DecodeConfig {
  enum class Strategy { greedy, beam };
  Strategy strategy = Strategy::greedy;
  int beam_width = 4;
  int max_target_length = 0;  // 0 uses the model limit
  double length_penalty = 1.0;
};

// Unit ids of a generated summary, without the sentinels.
struct GenerationResult {
  std::vector<int> ids;
  std::vector<double> belief;
  bool finished = false;  // end sentinel produced before the length limit
};

// Conditional summarizer: shared encoder branching into document and query
// encoders, the latent query network, and a decoder with sequential
// cross-attention over the two views. Token embeddings are tied with the
// output projection.
template <typename T>
class Summarizer {
 public:
  Summarizer(ModelConfig config, MergeTable tokenizer, std::uint64_t seed);
  Summarizer(const Summarizer&) = delete;
  Summarizer& operator=(const Summarizer&) = delete;
  Summarizer(Summarizer&&) noexcept = default;
  Summarizer& operator=(Summarizer&&) noexcept = default;

  const ModelConfig& config() const { return config_; }
  const MergeTable& tokenizer() const { return tokenizer_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }

  int vocab_size() const { return tokenizer_.size() + 3; }
  int bos_id() const { return tokenizer_.size(); }
  int eos_id() const { return tokenizer_.size() + 1; }
  int unk_id() const { return tokenizer_.size() + 2; }

  // Truncates to max_source_length units.
  BpeSequence clip_source(const BpeSequence& doc) const;
  // Maps tokenizer ids into the model vocabulary (overflow ids become UNK).
  std::vector<int> model_ids(const std::vector<int>& ids) const;

  // Throws DataError for an empty document.
  Encoding<T> encode(const BpeSequence& doc) const;
  DualView<T> views(const Encoding<T>& enc, const QueryBelief<T>& belief) const;
  // Logits [prefix.size(), vocab]. The prefix must start with the begin sentinel.
  Tensor<T> decoder_forward(const std::vector<int>& prefix, const DualView<T>& views) const;

  // Teacher-forcing pair: decoder input (begin sentinel first) and targets
  // (end sentinel last), clipped to max_target_length.
  std::pair<std::vector<int>, std::vector<int>> teacher_forcing(const BpeSequence& summary) const;

  // Infer-mode belief, calibrated when `query` is non-empty.
  QueryBelief<T> infer_belief(const Encoding<T>& enc, const BpeSequence& doc, const BpeSequence& query) const;
  GenerationResult generate(const BpeSequence& doc, const BpeSequence& query, const DecodeConfig& decode) const;
  std::string detokenize(const std::vector<int>& ids) const;

  void save(Checkpoint& ckpt) const;
  static Summarizer load(const Checkpoint& ckpt);

 private:
  struct EncoderLayer {
    nn::AttentionParams<T> attn;
    nn::LayerNorm<T> ln1;
    nn::FeedForward<T> ff;
    nn::LayerNorm<T> ln2;
  };
  struct DecoderLayer {
    nn::AttentionParams<T> self_attn;
    nn::LayerNorm<T> ln_self;
    bool has_cross = false;
    nn::AttentionParams<T> q_attn;
    nn::LayerNorm<T> ln_q;
    nn::AttentionParams<T> d_attn;
    nn::LayerNorm<T> ln_d;
    nn::FeedForward<T> ff;
    nn::LayerNorm<T> ln_ff;
  };

  EncoderLayer make_encoder_layer(const std::string& name, std::mt19937_64& rng);
  Tensor<T> run_encoder(const Tensor<T>& x, const EncoderLayer& layer) const;
  Tensor<T> embed(const std::vector<int>& ids) const;

  ModelConfig config_;
  MergeTable tokenizer_;
  ModelParams<T> params_;
  Tensor<T> embedding_;
  Tensor<T> output_bias_;
  Tensor<T> positions_;
  std::vector<EncoderLayer> shared_;
  std::vector<EncoderLayer> document_;
  std::vector<EncoderLayer> query_;
  InferenceNet<T> scorer_;
  std::vector<DecoderLayer> decoder_;
};

using SummarizerModel = Summarizer<float>;

}  // namespace laqsum
