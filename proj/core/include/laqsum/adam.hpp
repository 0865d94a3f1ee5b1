#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "laqsum/params.hpp"

namespace laqsum {

struct AdamConfig {
  double lr = 1e-3;  // peak learning rate reached at the end of warmup
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int warmup_steps = 0;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

// Linear warmup from 0 to peak over warmup_steps, constant afterwards.
// `step` counts optimizer updates starting at 1.
double warmup_lr(int step, double peak, int warmup_steps);

template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // Applies one update from the gradients currently stored on `params`.
  // Throws NonFiniteError naming the first parameter with a NaN/Inf gradient;
  // in that case no parameter or moment is modified.
  void step(ModelParams<T>& params, int step);

  const AdamConfig& config() const { return config_; }
  double last_lr() const { return last_lr_; }

  void save_state(Checkpoint& ckpt, const ModelParams<T>& params) const;
  void load_state(const Checkpoint& ckpt, const ModelParams<T>& params);

 private:
  struct Moments {
    std::vector<T> m;
    std::vector<T> v;
  };

  AdamConfig config_;
  std::unordered_map<std::string, Moments> moments_;
  double last_lr_ = 0.0;
};

}  // namespace laqsum
