#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "laqsum/tensor.hpp"

namespace laqsum::ad {

// Boolean [rows, cols] matrix; a nonzero entry removes that score from the
// softmax (probability exactly 0).
struct Mask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> blocked;

  static Mask none(int rows, int cols);
  static Mask causal(int n);
  // Blocks every column j with key_padding[j] != 0, for all rows.
  static Mask key_padding(int rows, const std::vector<std::uint8_t>& key_padding);
  bool is_blocked(int r, int c) const { return blocked[static_cast<std::size_t>(r) * cols + c] != 0; }
};

// [m,k] x [k,n] -> [m,n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// [m,k] x [n,k]^T -> [m,n]
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
// [m,n] + [n] broadcast over rows.
template <typename T>
Tensor<T> add_row(const Tensor<T>& a, const Tensor<T>& bias);
// Row i of [m,n] multiplied by factors[i]; factors has m entries.
template <typename T>
Tensor<T> scale_rows(const Tensor<T>& a, const Tensor<T>& factors);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset);

template <typename T>
Tensor<T> relu(const Tensor<T>& a);
template <typename T>
Tensor<T> log(const Tensor<T>& a);
// Gradient passes only where lo < x < hi.
template <typename T>
Tensor<T> clamp(const Tensor<T>& a, T lo, T hi);

// Row-wise softmax of a / temperature. Fully blocked rows produce zeros.
template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& a, T temperature = T(1), const Mask* mask = nullptr);

// Normalizes each row to zero mean / unit variance, then applies gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& a, const Tensor<T>& gain, const Tensor<T>& bias, T eps);

// Gathers rows of table [V,d] -> [ids.size(), d].
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids);

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& a, int start, int len);
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& a, int start, int len);

// Same values under a new shape with equal element count.
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, const Shape& shape);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);
template <typename T>
Tensor<T> mean(const Tensor<T>& a);

// Mean negative log-likelihood of targets under row-wise softmax(logits).
// Rows whose target equals ignore_index are excluded; returns 0 when all are.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets,
                        int ignore_index = -1);

// Inverted dropout. Identity when rate == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, T rate, std::mt19937_64& rng);

}  // namespace laqsum::ad
