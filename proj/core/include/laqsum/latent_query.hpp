#pragma once

#include <random>
#include <string>
#include <vector>

#include "laqsum/bpe.hpp"
#include "laqsum/nn.hpp"
#include "laqsum/weak_labels.hpp"

namespace laqsum {

enum class BeliefSource { estimated, weak_supervision, calibrated };
std::string to_string(BeliefSource s);

// Per-unit probability that the unit belongs to the latent query. `probs` is a
// vector [M] and stays attached to the graph when it was estimated in
// training mode.
template <typename T>
struct QueryBelief {
  Tensor<T> probs;
  BeliefSource source = BeliefSource::estimated;

  std::size_t size() const { return probs.defined() ? probs.numel() : 0; }
  std::vector<double> values() const;
  // Throws InvariantError when an entry leaves [0,1], or when a
  // weak-supervision belief holds anything other than 0 or 1.
  void check() const;

  static QueryBelief constant(const std::vector<double>& values, BeliefSource source);
};

struct CalibrationDelta {
  std::vector<double> increments;

  static CalibrationDelta from_alignment(const BpeSequence& doc, const BpeSequence& query);
};

// Two-layer scoring MLP producing class logits [M, 2].
template <typename T>
struct InferenceNet {
  nn::Linear<T> hidden;  // W_h, b_h
  nn::Linear<T> output;  // W_s, b_s

  static InferenceNet create(ModelParams<T>& params, const std::string& name, int dim, std::mt19937_64& rng);
  static InferenceNet bind(ModelParams<T>& params, const std::string& name);
  Tensor<T> score(const Tensor<T>& hq) const;
};

enum class PosteriorMode { train, infer };

// Gumbel-softmax relaxation over the two classes; class-1 column returned.
// Infer mode uses zero noise. Throws ConfigError when tau <= 0.
template <typename T>
QueryBelief<T> posterior(const Tensor<T>& logits, T tau, PosteriorMode mode, std::mt19937_64& rng);

// Row i of H_q scaled by belief i.
template <typename T>
Tensor<T> query_focused_view(const QueryBelief<T>& belief, const Tensor<T>& hq);

template <typename T>
struct QueryLoss {
  Tensor<T> total;    // -omega * tag + beta * entropy
  Tensor<T> tag;      // sum of z log q1 + (1 - z) log q0
  Tensor<T> entropy;  // sum of q log q over both classes (negative entropy)
};

inline constexpr double kProbEpsilon = 1e-7;

template <typename T>
QueryLoss<T> query_loss(const QueryBelief<T>& belief, const WeakLabels& labels, T omega, T beta);

enum class DropoutGranularity { per_example, per_token };

// With probability delta the estimated belief is replaced by the weak labels.
// Per-token granularity draws once per position and keeps the estimated
// source label unless every position was replaced.
template <typename T>
QueryBelief<T> posterior_dropout(const QueryBelief<T>& belief, const WeakLabels& labels, double delta,
                                 std::mt19937_64& rng,
                                 DropoutGranularity granularity = DropoutGranularity::per_example);

double anneal_delta(int step, int total_steps, double delta_start, double delta_end);

// Raises beliefs to 1 where the query aligns with the document. An empty
// query returns the input unchanged.
template <typename T>
QueryBelief<T> calibrate(const QueryBelief<T>& belief, const BpeSequence& doc, const BpeSequence& query);

// Binary entropy summed over positions, in nats.
double belief_entropy(const std::vector<double>& probs);
// KL divergence from the uniform prior over {0,1}, summed over positions.
double kl_from_uniform(const std::vector<double>& probs);

// One JSON object per line: {"unit", "prob", "label"}. `labels` may be empty.
std::string belief_dump_jsonl(const BpeSequence& doc, const std::vector<double>& probs,
                              const std::vector<int>& labels);

}  // namespace laqsum
