#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "laqsum/tensor.hpp"

namespace laqsum {

using ad::Shape;
using ad::Tensor;

// Named, insertion-ordered collection of trainable leaves. Holds both the
// conditional language model weights and the inference network weights.
template <typename T>
class ModelParams {
 public:
  // Registers a new parameter. Names must be unique.
  Tensor<T>& add(const std::string& name, Tensor<T> value);
  Tensor<T>& add_uniform(const std::string& name, const Shape& shape, T bound, std::mt19937_64& rng);
  Tensor<T>& add_constant(const std::string& name, const Shape& shape, T value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor<T>& get(const std::string& name);
  const Tensor<T>& get(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t total_elements() const;

  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

struct StoredTensor {
  std::string name;
  Shape shape;
  DType dtype = DType::f32;
  std::vector<std::uint8_t> bytes;

  template <typename T>
  static StoredTensor from_values(const std::string& name, const Shape& shape, std::span<const T> values);
  template <typename T>
  std::vector<T> values() const;
};

// Versioned binary container: metadata strings plus named tensors.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<StoredTensor> tensors;

  const StoredTensor* find(const std::string& name) const;

  template <typename T>
  void put_params(const ModelParams<T>& params, const std::string& prefix = "");
  // Overwrites values of every parameter in `params` from tensors named
  // prefix + name. Missing tensors or shape mismatches throw DataError.
  template <typename T>
  void load_params(ModelParams<T>& params, const std::string& prefix = "") const;
};

// Written to a temporary sibling, then renamed into place.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace laqsum
