#include "laqsum/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "laqsum/errors.hpp"

namespace laqsum::ad {

namespace {
thread_local bool g_no_grad = false;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, T(0), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& shape, T value, bool requires_grad) {
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value.assign(shape_numel(shape), value);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::from(const Shape& shape, std::vector<T> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("Tensor::from: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

template <typename T>
int Tensor<T>::rows() const {
  return node_->shape.size() >= 2 ? node_->shape[0] : 1;
}

template <typename T>
int Tensor<T>::cols() const {
  return node_->shape.empty() ? 1 : node_->shape.back();
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad.assign(node_->value.size(), T(0));
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) throw ShapeError("backward() requires a scalar, got " + shape_str(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> visited;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
}

namespace detail {

template <typename T>
std::shared_ptr<Node<T>> make_node(const char* op, Shape shape,
                                   std::initializer_list<const Tensor<T>*> parents) {
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->value.assign(shape_numel(shape), T(0));
  node->shape = std::move(shape);
  if (!g_no_grad) {
    for (const Tensor<T>* p : parents) {
      if (p->requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
      for (const Tensor<T>* p : parents) node->parents.push_back(p->node_ptr());
    }
  }
  return node;
}

template <typename T>
std::shared_ptr<Node<T>> make_node(const char* op, Shape shape,
                                   const std::vector<Tensor<T>>& parents) {
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->value.assign(shape_numel(shape), T(0));
  node->shape = std::move(shape);
  if (!g_no_grad) {
    for (const auto& p : parents) {
      if (p.requires_grad()) node->requires_grad = true;
    }
    if (node->requires_grad) {
      for (const auto& p : parents) node->parents.push_back(p.node_ptr());
    }
  }
  return node;
}

template std::shared_ptr<Node<float>> make_node(const char*, Shape,
                                                std::initializer_list<const Tensor<float>*>);
template std::shared_ptr<Node<double>> make_node(const char*, Shape,
                                                 std::initializer_list<const Tensor<double>*>);
template std::shared_ptr<Node<float>> make_node(const char*, Shape,
                                                const std::vector<Tensor<float>>&);
template std::shared_ptr<Node<double>> make_node(const char*, Shape,
                                                 const std::vector<Tensor<double>>&);

}  // namespace detail

template class Tensor<float>;
template class Tensor<double>;

}  // namespace laqsum::ad
