#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "phantomqa/tensor.hpp"

namespace phantomqa {

// A trainable tensor plus its gradient and Adam moment buffers. Frozen
// parameters keep their values bitwise intact: adam_step skips them without
// touching moments or the step count they would have seen.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m, v;
  bool frozen = false;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> val)
      : name(std::move(n)),
        value(std::move(val)),
        grad(Tensor<T>::zeros(value.shape)),
        m(Tensor<T>::zeros(value.shape)),
        v(Tensor<T>::zeros(value.shape)) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T{}); }
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 1e-3;         // lr_t = lr / (1 + decay * t)
  double weight_decay = 0.0;   // L2 added to the gradient when nonzero
};

// One Adam update with bias correction. t counts applied steps starting at 1;
// the caller owns the counter and passes the current step number.
template <typename T>
void adam_step(std::vector<Parameter<T>*>& params, const AdamConfig& cfg, std::int64_t t) {
  if (t < 1) throw std::invalid_argument("adam_step: step index must be >= 1");
  const double lr_t = cfg.lr / (1.0 + cfg.decay * static_cast<double>(t));
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (Parameter<T>* p : params) {
    if (p->frozen) continue;
    T* w = p->value.data.data();
    T* g = p->grad.data.data();
    T* m = p->m.data.data();
    T* v = p->v.data.data();
    const std::int64_t n = p->value.numel();
    for (std::int64_t i = 0; i < n; ++i) {
      double gi = static_cast<double>(g[i]);
      if (cfg.weight_decay != 0.0) gi += cfg.weight_decay * static_cast<double>(w[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) -
                            lr_t * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace phantomqa
