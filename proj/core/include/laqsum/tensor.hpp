#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace laqsum::ad {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// One vertex of the dynamically built computation graph. Values are written
// once by the op that creates the node; gradients accumulate during backward.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool active();

 private:
  bool previous_;
};

// Dense row-major tensor with reverse-mode gradient support. Copies share the
// underlying node, so a Tensor behaves like a handle.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, T value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int dim(std::size_t axis) const { return node_->shape.at(axis); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  // Leading extent of a matrix; 1 for vectors and scalars.
  int rows() const;
  // Trailing extent; 1 for scalars.
  int cols() const;
  std::size_t numel() const { return node_->value.size(); }

  std::span<const T> data() const { return node_->value; }
  std::span<const T> grad() const { return node_->grad; }
  T item() const;
  T at(int r, int c) const { return node_->value[static_cast<std::size_t>(r) * cols() + c]; }

  bool requires_grad() const { return node_->requires_grad; }

  // Parameter access: only leaves owned by an optimizer or loader should be
  // mutated in place.
  std::span<T> mutable_data() { return node_->value; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad();

  // Runs reverse-mode accumulation from this scalar into every reachable
  // node that requires a gradient.
  void backward() const;

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

namespace detail {

// Creates the output node of an op. Parents are only retained when the output
// participates in a gradient computation.
template <typename T>
std::shared_ptr<Node<T>> make_node(const char* op, Shape shape,
                                   std::initializer_list<const Tensor<T>*> parents);

template <typename T>
std::shared_ptr<Node<T>> make_node(const char* op, Shape shape,
                                   const std::vector<Tensor<T>>& parents);

}  // namespace detail

}  // namespace laqsum::ad
