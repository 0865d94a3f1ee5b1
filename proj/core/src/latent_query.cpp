#include "laqsum/latent_query.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "laqsum/errors.hpp"

namespace laqsum {

std::string to_string(BeliefSource s) {
  switch (s) {
    case BeliefSource::estimated: return "estimated";
    case BeliefSource::weak_supervision: return "weak_supervision";
    case BeliefSource::calibrated: return "calibrated";
  }
  return "?";
}

template <typename T>
std::vector<double> QueryBelief<T>::values() const {
  if (!probs.defined()) return {};
  const auto d = probs.data();
  return {d.begin(), d.end()};
}

template <typename T>
void QueryBelief<T>::check() const {
  const auto v = values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      throw InvariantError("query belief at position " + std::to_string(i) + " is " + std::to_string(v[i]) +
                           ", outside [0,1]");
    }
    if (source == BeliefSource::weak_supervision && v[i] != 0.0 && v[i] != 1.0) {
      throw InvariantError("weak-supervision belief at position " + std::to_string(i) + " is not 0 or 1");
    }
  }
}

template <typename T>
QueryBelief<T> QueryBelief<T>::constant(const std::vector<double>& values, BeliefSource source) {
  std::vector<T> v(values.begin(), values.end());
  const int n = static_cast<int>(v.size());
  return QueryBelief{Tensor<T>::from({n}, std::move(v)), source};
}

CalibrationDelta CalibrationDelta::from_alignment(const BpeSequence& doc, const BpeSequence& query) {
  CalibrationDelta d;
  d.increments.assign(doc.size(), 0.0);
  for (int p : lcs_positions(doc.ids, query.ids)) d.increments[static_cast<std::size_t>(p)] = 1.0;
  return d;
}

template <typename T>
InferenceNet<T> InferenceNet<T>::create(ModelParams<T>& params, const std::string& name, int dim,
                                        std::mt19937_64& rng) {
  return InferenceNet{nn::Linear<T>::create(params, name + ".hidden", dim, dim, rng),
                      nn::Linear<T>::create(params, name + ".score", dim, 2, rng)};
}

template <typename T>
InferenceNet<T> InferenceNet<T>::bind(ModelParams<T>& params, const std::string& name) {
  return InferenceNet{nn::Linear<T>::bind(params, name + ".hidden"), nn::Linear<T>::bind(params, name + ".score")};
}

template <typename T>
Tensor<T> InferenceNet<T>::score(const Tensor<T>& hq) const {
  if (hq.rank() != 2 || hq.cols() != hidden.weight.dim(0)) {
    throw ShapeError("score: H_q " + ad::shape_str(hq.shape()) + " does not match W_h " +
                     ad::shape_str(hidden.weight.shape()));
  }
  return output(ad::relu(hidden(hq)));
}

template <typename T>
QueryBelief<T> posterior(const Tensor<T>& logits, T tau, PosteriorMode mode, std::mt19937_64& rng) {
  if (!(tau > T(0))) throw ConfigError("posterior: temperature must be > 0, got " + std::to_string(tau));
  if (logits.rank() != 2 || logits.cols() != 2) {
    throw ShapeError("posterior: expected logits [M,2], got " + ad::shape_str(logits.shape()));
  }
  Tensor<T> noisy = logits;
  if (mode == PosteriorMode::train) {
    std::uniform_real_distribution<double> uniform(std::numeric_limits<double>::min(), 1.0);
    std::vector<T> g(logits.numel());
    for (auto& x : g) x = static_cast<T>(-std::log(-std::log(uniform(rng))));
    noisy = ad::add(logits, Tensor<T>::from(logits.shape(), std::move(g)));
  }
  const auto probs = ad::softmax_rows(noisy, tau);
  return QueryBelief<T>{ad::reshape(ad::slice_cols(probs, 1, 1), {logits.rows()}), BeliefSource::estimated};
}

template <typename T>
Tensor<T> query_focused_view(const QueryBelief<T>& belief, const Tensor<T>& hq) {
  if (belief.size() != static_cast<std::size_t>(hq.rows())) {
    throw InvariantError("query_focused_view: belief has " + std::to_string(belief.size()) + " entries, H_q has " +
                         std::to_string(hq.rows()) + " rows");
  }
  return ad::scale_rows(hq, belief.probs);
}

template <typename T>
QueryLoss<T> query_loss(const QueryBelief<T>& belief, const WeakLabels& labels, T omega, T beta) {
  if (omega < T(0) || beta < T(0)) throw ConfigError("query_loss: omega and beta must be >= 0");
  if (belief.source != BeliefSource::estimated) {
    throw InvariantError("query_loss: belief must be estimated, got " + to_string(belief.source));
  }
  if (belief.size() != labels.size()) {
    throw InvariantError("query_loss: " + std::to_string(belief.size()) + " beliefs for " +
                         std::to_string(labels.size()) + " labels");
  }
  const T eps = static_cast<T>(kProbEpsilon);
  const auto n = static_cast<int>(labels.size());
  const auto q1 = ad::clamp(belief.probs, eps, T(1) - eps);
  const auto q0 = ad::clamp(ad::add_scalar(ad::scale(belief.probs, T(-1)), T(1)), eps, T(1) - eps);
  const auto log_q1 = ad::log(q1), log_q0 = ad::log(q0);

  std::vector<T> z(labels.labels.begin(), labels.labels.end()), not_z(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) not_z[i] = T(1) - z[i];
  const auto zt = Tensor<T>::from({n}, std::move(z));
  const auto nzt = Tensor<T>::from({n}, std::move(not_z));

  QueryLoss<T> out;
  out.tag = ad::sum(ad::add(ad::mul(zt, log_q1), ad::mul(nzt, log_q0)));
  out.entropy = ad::sum(ad::add(ad::mul(q1, log_q1), ad::mul(q0, log_q0)));
  out.total = ad::add(ad::scale(out.tag, -omega), ad::scale(out.entropy, beta));
  return out;
}

template <typename T>
QueryBelief<T> posterior_dropout(const QueryBelief<T>& belief, const WeakLabels& labels, double delta,
                                 std::mt19937_64& rng, DropoutGranularity granularity) {
  if (delta < 0.0 || delta > 1.0) throw ConfigError("posterior_dropout: delta must lie in [0,1]");
  if (belief.size() != labels.size()) {
    throw InvariantError("posterior_dropout: " + std::to_string(belief.size()) + " beliefs for " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::vector<double> label_values(labels.labels.begin(), labels.labels.end());
  std::bernoulli_distribution replace(delta);
  if (granularity == DropoutGranularity::per_example) {
    if (replace(rng)) return QueryBelief<T>::constant(label_values, BeliefSource::weak_supervision);
    return belief;
  }
  const auto n = static_cast<int>(labels.size());
  std::vector<T> keep(labels.size()), fill(labels.size());
  bool all_replaced = true;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool r = replace(rng);
    all_replaced = all_replaced && r;
    keep[i] = r ? T(0) : T(1);
    fill[i] = r ? static_cast<T>(label_values[i]) : T(0);
  }
  if (all_replaced) return QueryBelief<T>::constant(label_values, BeliefSource::weak_supervision);
  auto mixed = ad::add(ad::mul(belief.probs, Tensor<T>::from({n}, std::move(keep))),
                       Tensor<T>::from({n}, std::move(fill)));
  return QueryBelief<T>{mixed, belief.source};
}

double anneal_delta(int step, int total_steps, double delta_start, double delta_end) {
  if (total_steps <= 0) return delta_end;
  if (step < 0 || step > total_steps) {
    throw ConfigError("anneal_delta: step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) +
                      "]");
  }
  if (step == total_steps) return delta_end;
  return delta_start + (delta_end - delta_start) * static_cast<double>(step) / static_cast<double>(total_steps);
}

template <typename T>
QueryBelief<T> calibrate(const QueryBelief<T>& belief, const BpeSequence& doc, const BpeSequence& query) {
  if (query.empty()) return belief;
  if (belief.size() != doc.size()) {
    throw InvariantError("calibrate: belief has " + std::to_string(belief.size()) + " entries for " +
                         std::to_string(doc.size()) + " document units");
  }
  const auto delta = CalibrationDelta::from_alignment(doc, query);
  auto v = belief.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::min(1.0, v[i] + delta.increments[i]);
  return QueryBelief<T>::constant(v, BeliefSource::calibrated);
}

double belief_entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double q : probs) {
    if (q > 0.0) h -= q * std::log(q);
    if (q < 1.0) h -= (1.0 - q) * std::log(1.0 - q);
  }
  return h;
}

double kl_from_uniform(const std::vector<double>& probs) {
  double kl = 0.0;
  for (double q : probs) {
    if (q > 0.0) kl += q * std::log(q / 0.5);
    if (q < 1.0) kl += (1.0 - q) * std::log((1.0 - q) / 0.5);
  }
  return kl;
}

std::string belief_dump_jsonl(const BpeSequence& doc, const std::vector<double>& probs,
                              const std::vector<int>& labels) {
  if (probs.size() != doc.size() || (!labels.empty() && labels.size() != doc.size())) {
    throw InvariantError("belief_dump_jsonl: lengths differ");
  }
  std::string out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    nlohmann::json row{{"unit", doc.surfaces[i]}, {"prob", probs[i]}};
    row["label"] = labels.empty() ? nlohmann::json(nullptr) : nlohmann::json(labels[i]);
    out += row.dump() + '\n';
  }
  return out;
}

#define LAQSUM_INSTANTIATE_LQ(T)                                                                            \
  template struct QueryBelief<T>;                                                                           \
  template struct InferenceNet<T>;                                                                          \
  template QueryBelief<T> posterior(const Tensor<T>&, T, PosteriorMode, std::mt19937_64&);                 \
  template Tensor<T> query_focused_view(const QueryBelief<T>&, const Tensor<T>&);                           \
  template QueryLoss<T> query_loss(const QueryBelief<T>&, const WeakLabels&, T, T);                         \
  template QueryBelief<T> posterior_dropout(const QueryBelief<T>&, const WeakLabels&, double,               \
                                            std::mt19937_64&, DropoutGranularity);                          \
  template QueryBelief<T> calibrate(const QueryBelief<T>&, const BpeSequence&, const BpeSequence&);

LAQSUM_INSTANTIATE_LQ(float)
LAQSUM_INSTANTIATE_LQ(double)

}  // namespace laqsum
