#pragma once

#include <cmath>

#include "phantomqa/rng.hpp"
#include "phantomqa/tensor.hpp"

namespace phantomqa {

// Weight initializers. Both draw in double and cast, so float and double
// instantiations of the same network see the same underlying values. The
// caller hands each parameter its own substream keyed by parameter ordinal,
// which keeps draws independent of every other tensor's size.

// Zero-mean normal with sd = sqrt(2 / fan_in).
template <typename T>
void he_init(Tensor<T>& t, int fan_in, RngState rng) {
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& v : t.data) v = static_cast<T>(sd * rng.next_normal());
}

// Unit normal, sd = 1. Used by the random-init ablation for conv weights.
template <typename T>
void normal_init(Tensor<T>& t, RngState rng) {
  for (auto& v : t.data) v = static_cast<T>(rng.next_normal());
}

}  // namespace phantomqa
