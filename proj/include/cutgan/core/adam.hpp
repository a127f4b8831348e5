#pragma once

#include <cmath>
#include <map>
#include <string>

#include "cutgan/core/nn.hpp"

namespace cutgan {

// Adam with per-parameter state keyed by parameter path, so parameters created
// lazily (projection heads) pick up fresh state on their first step and the
// whole state round-trips through checkpoints.
template <typename T>
class Adam {
 public:
  struct State {
    Tensor<T> m, v;
    int64_t t = 0;
  };

  Adam() = default;
  Adam(T lr, T beta1, T beta2, T eps = static_cast<T>(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void zero_grad(nn::ParamMap<T>& params) {
    for (auto& [name, p] : params) p.get()->zero_grad();
  }

  // Parameters whose grad was never touched this step are skipped entirely.
  void step(nn::ParamMap<T>& params) {
    for (auto& [name, p] : params) {
      Node<T>* node = p.get();
      if (!node->grad.defined()) continue;
      State& s = states_[name];
      if (!s.m.defined()) {
        s.m = Tensor<T>(node->value.shape(), 0);
        s.v = Tensor<T>(node->value.shape(), 0);
      }
      s.t += 1;
      T bc1 = 1 - std::pow(beta1_, static_cast<T>(s.t));
      T bc2 = 1 - std::pow(beta2_, static_cast<T>(s.t));
      T* w = node->value.data();
      const T* g = node->grad.data();
      T* m = s.m.data();
      T* v = s.v.data();
      for (int64_t i = 0; i < node->value.numel(); ++i) {
        m[i] = beta1_ * m[i] + (1 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1 - beta2_) * g[i] * g[i];
        T mhat = m[i] / bc1;
        T vhat = v[i] / bc2;
        w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  T lr() const { return lr_; }
  void set_lr(T lr) { lr_ = lr; }

  std::map<std::string, State>& states() { return states_; }
  const std::map<std::string, State>& states() const { return states_; }

 private:
  T lr_ = static_cast<T>(0.001);
  T beta1_ = static_cast<T>(0.9);
  T beta2_ = static_cast<T>(0.999);
  T eps_ = static_cast<T>(1e-8);
  std::map<std::string, State> states_;
};

}  // namespace cutgan
