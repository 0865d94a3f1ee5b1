#include "laqsum/nn.hpp"

#include <cmath>

#include "laqsum/errors.hpp"

namespace laqsum::nn {

template <typename T>
Linear<T> Linear<T>::create(ModelParams<T>& params, const std::string& name, int in, int out,
                            std::mt19937_64& rng) {
  const T bound = static_cast<T>(std::sqrt(6.0 / (in + out)));
  Linear l;
  l.weight = params.add_uniform(name + ".weight", {in, out}, bound, rng);
  l.bias = params.add_constant(name + ".bias", {out}, T(0));
  return l;
}

template <typename T>
Linear<T> Linear<T>::bind(ModelParams<T>& params, const std::string& name) {
  return Linear{params.get(name + ".weight"), params.get(name + ".bias")};
}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  return ad::add_row(ad::matmul(x, weight), bias);
}

template <typename T>
LayerNorm<T> LayerNorm<T>::create(ModelParams<T>& params, const std::string& name, int dim, T eps) {
  LayerNorm ln;
  ln.gain = params.add_constant(name + ".gain", {dim}, T(1));
  ln.bias = params.add_constant(name + ".bias", {dim}, T(0));
  ln.eps = eps;
  return ln;
}

template <typename T>
Tensor<T> LayerNorm<T>::operator()(const Tensor<T>& x) const {
  return ad::layer_norm(x, gain, bias, eps);
}

template <typename T>
AttentionParams<T> AttentionParams<T>::create(ModelParams<T>& params, const std::string& name, int dim,
                                              std::mt19937_64& rng) {
  AttentionParams a;
  a.query = Linear<T>::create(params, name + ".q", dim, dim, rng);
  a.key = Linear<T>::create(params, name + ".k", dim, dim, rng);
  a.value = Linear<T>::create(params, name + ".v", dim, dim, rng);
  a.output = Linear<T>::create(params, name + ".o", dim, dim, rng);
  return a;
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& queries, const Tensor<T>& keys, const Tensor<T>& values,
                               const AttentionParams<T>& params, int num_heads, const Mask* mask) {
  const int dim = queries.cols();
  if (num_heads <= 0 || dim % num_heads != 0) {
    throw ConfigError("multi_head_attention: model dimension " + std::to_string(dim) +
                      " is not divisible by " + std::to_string(num_heads) + " heads");
  }
  if (keys.rows() != values.rows()) {
    throw ShapeError("multi_head_attention: keys " + ad::shape_str(keys.shape()) + " and values " +
                     ad::shape_str(values.shape()) + " differ in length");
  }
  if (mask && (mask->rows != queries.rows() || mask->cols != keys.rows())) {
    throw ShapeError("multi_head_attention: mask [" + std::to_string(mask->rows) + "," +
                     std::to_string(mask->cols) + "] does not match scores [" + std::to_string(queries.rows()) +
                     "," + std::to_string(keys.rows()) + "]");
  }
  const int head_dim = dim / num_heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(head_dim));
  const Tensor<T> q = params.query(queries);
  const Tensor<T> k = params.key(keys);
  const Tensor<T> v = params.value(values);
  if (num_heads == 1) {
    auto weights = ad::softmax_rows(ad::scale(ad::matmul_nt(q, k), scale), T(1), mask);
    return params.output(ad::matmul(weights, v));
  }
  std::vector<Tensor<T>> heads;
  heads.reserve(num_heads);
  for (int h = 0; h < num_heads; ++h) {
    const int off = h * head_dim;
    auto qh = ad::slice_cols(q, off, head_dim);
    auto kh = ad::slice_cols(k, off, head_dim);
    auto vh = ad::slice_cols(v, off, head_dim);
    auto weights = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), scale), T(1), mask);
    heads.push_back(ad::matmul(weights, vh));
  }
  return params.output(ad::concat_cols(heads));
}

template <typename T>
FeedForward<T> FeedForward<T>::create(ModelParams<T>& params, const std::string& name, int dim, int hidden,
                                      std::mt19937_64& rng) {
  return FeedForward{Linear<T>::create(params, name + ".inner", dim, hidden, rng),
                     Linear<T>::create(params, name + ".outer", hidden, dim, rng)};
}

template <typename T>
Tensor<T> FeedForward<T>::operator()(const Tensor<T>& x) const {
  return outer(ad::relu(inner(x)));
}

template <typename T>
Tensor<T> sinusoidal_positions(int length, int dim) {
  std::vector<T> table(static_cast<std::size_t>(length) * dim);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      const double angle = pos * rate;
      table[static_cast<std::size_t>(pos) * dim + i] = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor<T>::from({length, dim}, std::move(table));
}

template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct AttentionParams<float>;
template struct AttentionParams<double>;
template struct FeedForward<float>;
template struct FeedForward<double>;
template Tensor<float> multi_head_attention(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                                            const AttentionParams<float>&, int, const Mask*);
template Tensor<double> multi_head_attention(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                             const AttentionParams<double>&, int, const Mask*);
template Tensor<float> sinusoidal_positions(int, int);
template Tensor<double> sinusoidal_positions(int, int);

}  // namespace laqsum::nn
