#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "laqsum/adam.hpp"
#include "laqsum/corpus.hpp"
#include "laqsum/latent_query.hpp"
#include "laqsum/model.hpp"

namespace laqsum {

struct TrainConfig {
  double beta = 0.1;   // entropy weight
  double omega = 10.0; // tag weight
  double delta_start = 1.0;
  double delta_end = 0.5;
  DropoutGranularity dropout_granularity = DropoutGranularity::per_example;
  double lr = 1e-3;
  int warmup_steps = 100;
  int total_steps = 3000;
  int batch_size = 8;
  int accumulation_steps = 1;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
  std::uint64_t seed = 1;
  int bpe_merges = 500;
  int checkpoint_every = 0;  // 0 keeps only the final checkpoint
  std::string output_dir;    // checkpoints go here when non-empty
  std::string metrics_path;  // CSV log when non-empty
  std::string resume_from;   // checkpoint to continue from
  ModelConfig model;

  // Throws ConfigError when a field is out of range.
  void validate() const;
  // Flat key=value pairs. Model keys (d_model, num_heads, ...) are accepted
  // alongside trainer keys; unknown keys throw ConfigError.
  static TrainConfig from_map(const std::map<std::string, std::string>& kv);
  static TrainConfig from_file(const std::string& path);
  std::map<std::string, std::string> to_map() const;
};

// Named starting points: "desk" (small model, a few thousand steps on one
// CPU core) and "full_scale" (large encoder-decoder, 20k steps, 640-unit
// sources). Throws ConfigError for other names.
std::map<std::string, std::string> config_preset(const std::string& name);

// key=value lines; '#' starts a comment. Throws ConfigError on a line
// without '='.
std::map<std::string, std::string> parse_key_values(const std::string& text);

// A training example after tokenization and weak labeling.
struct TrainExample {
  std::string id;
  BpeSequence document;  // clipped to the model's source limit
  WeakLabels labels;
  BpeSequence summary;
  std::vector<int> unit_mask;  // ground truth when the corpus carries one
};

std::vector<TrainExample> prepare_examples(const SummarizerModel& model,
                                           const std::vector<SummarizationExample>& examples);

struct StepMetrics {
  int step = 0;  // zero-based optimizer step
  double l_lm = 0.0;
  double l_tag = 0.0;
  double l_entropy = 0.0;
  double l_query = 0.0;
  double total = 0.0;
  double delta = 0.0;
  double lr = 0.0;
};

// Owns the optimizer state and the step counter for one model.
class Trainer {
 public:
  Trainer(SummarizerModel& model, TrainConfig config);

  // Forward, backward and one optimizer update over `batch`, split into
  // accumulation_steps micro-batches of equal size. Throws NonFiniteError
  // naming the loss component and example when a loss is not finite.
  StepMetrics train_step(std::span<const TrainExample> batch);

  // Next batch drawn from a per-epoch shuffle determined by the seed.
  std::vector<std::size_t> batch_indices(std::size_t corpus_size) const;

  int completed_steps() const { return step_; }
  const TrainConfig& config() const { return config_; }

  void save(const std::string& path) const;
  // Restores model weights, optimizer moments and the step counter.
  void resume(const Checkpoint& ckpt);

 private:
  SummarizerModel& model_;
  TrainConfig config_;
  Adam<float> optimizer_;
  int step_ = 0;
};

struct TrainResult {
  std::vector<StepMetrics> metrics;
  std::string final_checkpoint;
};

using StepCallback = std::function<void(const StepMetrics&)>;

// Full loop over a prepared corpus. Writes the metrics CSV and checkpoints
// when the config names their locations. Throws ConfigError on an empty
// corpus.
TrainResult train_loop(SummarizerModel& model, const std::vector<TrainExample>& corpus, const TrainConfig& config,
                       const StepCallback& on_step = {});

// Trains a merge table on documents and summaries of `examples`.
MergeTable train_tokenizer(const std::vector<SummarizationExample>& examples, int merges);

std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);

// Mean posterior AUC of infer-mode beliefs against unit_mask over examples
// whose mask holds both classes.
double mean_posterior_auc(const SummarizerModel& model, std::span<const TrainExample> examples);

}  // namespace laqsum
