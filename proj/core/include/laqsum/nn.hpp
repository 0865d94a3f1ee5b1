#pragma once

#include <random>
#include <string>

#include "laqsum/ops.hpp"
#include "laqsum/params.hpp"

namespace laqsum::nn {

using ad::Mask;

template <typename T>
struct Linear {
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]

  // Glorot-uniform weights, zero bias.
  static Linear create(ModelParams<T>& params, const std::string& name, int in, int out, std::mt19937_64& rng);
  static Linear bind(ModelParams<T>& params, const std::string& name);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

template <typename T>
struct LayerNorm {
  Tensor<T> gain;
  Tensor<T> bias;
  T eps = T(1e-5);

  static LayerNorm create(ModelParams<T>& params, const std::string& name, int dim, T eps);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

template <typename T>
struct AttentionParams {
  Linear<T> query;
  Linear<T> key;
  Linear<T> value;
  Linear<T> output;

  static AttentionParams create(ModelParams<T>& params, const std::string& name, int dim, std::mt19937_64& rng);
};

// Scaled dot-product attention over num_heads slices of the projected inputs,
// heads concatenated and projected back to the model dimension.
// queries: [Tq, d], keys/values: [Tk, d], mask: [Tq, Tk] or null.
template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& queries, const Tensor<T>& keys, const Tensor<T>& values,
                               const AttentionParams<T>& params, int num_heads, const Mask* mask = nullptr);

template <typename T>
struct FeedForward {
  Linear<T> inner;
  Linear<T> outer;

  static FeedForward create(ModelParams<T>& params, const std::string& name, int dim, int hidden,
                            std::mt19937_64& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

// Fixed sinusoidal position table [length, dim].
template <typename T>
Tensor<T> sinusoidal_positions(int length, int dim);

}  // namespace laqsum::nn
