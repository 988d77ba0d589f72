#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "phantomqa/rng.hpp"
#include "phantomqa/tensor.hpp"

// Central-difference gradient checking. Everything runs in double on the
// same templated op code the float training path uses, so agreement here
// validates the backward formulas, not float round-off.

namespace phantomqa::testgrad {

inline constexpr double kStep = 1e-5;
inline constexpr double kRelTol = 1e-4;

// Worst relative error between the analytic gradient of `x` and central
// differences of `loss` (which must recompute from the current contents of
// `x` on every call). Elements where both sides vanish contribute zero.
inline double max_rel_err(Tensor<double>& x, const Tensor<double>& analytic,
                          const std::function<double()>& loss, double h = kStep) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) {
    const double v = x[i];
    x[i] = v + h;
    const double up = loss();
    x[i] = v - h;
    const double down = loss();
    x[i] = v;
    const double num = (up - down) / (2.0 * h);
    const double ana = analytic[i];
    const double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
    worst = std::max(worst, std::abs(num - ana) / denom);
  }
  return worst;
}

// Random tensor with entries in [-1, 1).
inline Tensor<double> uniform_tensor(const std::vector<int>& shape, RngState& rng) {
  Tensor<double> t(shape);
  for (auto& v : t.data) v = rng.next_uniform(-1.0, 1.0);
  return t;
}

// Evenly spaced distinct values in [-1, 1], randomly permuted. The minimum
// pairwise separation (2/(n-1)) keeps max-pool argmaxes and ReLU signs
// stable under the finite-difference step.
inline Tensor<double> distinct_tensor(const std::vector<int>& shape, RngState& rng) {
  Tensor<double> t(shape);
  const std::int64_t n = t.numel();
  for (std::int64_t i = 0; i < n; ++i) {
    t[i] = n == 1 ? 0.5 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  for (std::int64_t i = n - 1; i > 0; --i) {
    const std::uint64_t j = rng.next_below(static_cast<std::uint64_t>(i) + 1);
    std::swap(t.data[static_cast<std::size_t>(i)], t.data[static_cast<std::size_t>(j)]);
  }
  return t;
}

// Push small-magnitude entries away from the ReLU kink.
inline void away_from_zero(Tensor<double>& t, double margin = 0.05) {
  for (auto& v : t.data) {
    if (std::abs(v) < margin) v = v < 0.0 ? v - margin : v + margin;
  }
}

// Fixed random projection turning a tensor-valued op into a scalar loss.
inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace phantomqa::testgrad
