#include "laqsum/adam.hpp"

#include <cmath>

#include "laqsum/errors.hpp"

namespace laqsum {

double warmup_lr(int step, double peak, int warmup_steps) {
  if (warmup_steps <= 0 || step >= warmup_steps) return peak;
  return peak * static_cast<double>(step) / warmup_steps;
}

template <typename T>
void Adam<T>::step(ModelParams<T>& params, int step) {
  if (step < 1) throw ConfigError("Adam::step: step must be >= 1");
  double sq_norm = 0.0;
  for (const auto& name : params.names()) {
    for (T g : params.get(name).grad()) {
      if (!std::isfinite(static_cast<double>(g))) throw NonFiniteError("non-finite gradient in parameter '" + name + "'");
      sq_norm += static_cast<double>(g) * g;
    }
  }
  double clip = 1.0;
  if (config_.clip_norm > 0.0) {
    const double norm = std::sqrt(sq_norm);
    if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
  }

  const double lr = warmup_lr(step, config_.lr, config_.warmup_steps);
  last_lr_ = lr;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, step);
  const double correction2 = 1.0 - std::pow(b2, step);
  for (const auto& name : params.names()) {
    auto& tensor = params.get(name);
    auto& mom = moments_[name];
    if (mom.m.size() != tensor.numel()) {
      mom.m.assign(tensor.numel(), T(0));
      mom.v.assign(tensor.numel(), T(0));
    }
    auto values = tensor.mutable_data();
    auto grads = tensor.mutable_grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = static_cast<double>(grads[i]) * clip;
      const double m = b1 * mom.m[i] + (1.0 - b1) * g;
      const double v = b2 * mom.v[i] + (1.0 - b2) * g * g;
      mom.m[i] = static_cast<T>(m);
      mom.v[i] = static_cast<T>(v);
      const double m_hat = m / correction1;
      const double v_hat = v / correction2;
      values[i] = static_cast<T>(values[i] - lr * m_hat / (std::sqrt(v_hat) + config_.epsilon));
    }
  }
}

template <typename T>
void Adam<T>::save_state(Checkpoint& ckpt, const ModelParams<T>& params) const {
  for (const auto& name : params.names()) {
    auto it = moments_.find(name);
    if (it == moments_.end()) continue;
    const auto& shape = params.get(name).shape();
    ckpt.tensors.push_back(StoredTensor::from_values<T>("adam.m/" + name, shape, it->second.m));
    ckpt.tensors.push_back(StoredTensor::from_values<T>("adam.v/" + name, shape, it->second.v));
  }
}

template <typename T>
void Adam<T>::load_state(const Checkpoint& ckpt, const ModelParams<T>& params) {
  moments_.clear();
  for (const auto& name : params.names()) {
    const StoredTensor* m = ckpt.find("adam.m/" + name);
    const StoredTensor* v = ckpt.find("adam.v/" + name);
    if (!m || !v) continue;
    moments_[name] = Moments{m->values<T>(), v->values<T>()};
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace laqsum
