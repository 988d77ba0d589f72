#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "phantomqa/gemm.hpp"
#include "phantomqa/tensor.hpp"

// Differentiable ops used by the classifier: 3x3 same-size convolution,
// 2x2 max pooling, dense, batch normalization, ReLU and fused
// softmax/cross-entropy. Each op is a plain function pair (forward,
// backward); the network chains them explicitly, so there is no graph
// machinery. Everything is templated on the scalar type: training runs in
// float, gradient checks run the same code in double.

namespace phantomqa::ops {

enum class Mode { kTrain, kInfer };

namespace detail {

// in [C,H,W] -> cols [C*9, H*W] for a 3x3 kernel, stride 1, zero pad 1.
template <typename T>
void im2col3x3(const T* in, int C, int H, int W, T* cols) {
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    const T* plane = in + static_cast<std::size_t>(c) * hw;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        T* row = cols + (static_cast<std::size_t>(c) * 9 + (dy + 1) * 3 + (dx + 1)) * hw;
        for (int y = 0; y < H; ++y) {
          T* dst = row + static_cast<std::size_t>(y) * W;
          const int sy = y + dy;
          if (sy < 0 || sy >= H) {
            std::fill(dst, dst + W, T{});
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(sy) * W;
          if (dx < 0) {
            dst[0] = T{};
            std::memcpy(dst + 1, src, sizeof(T) * (W - 1));
          } else if (dx > 0) {
            std::memcpy(dst, src + 1, sizeof(T) * (W - 1));
            dst[W - 1] = T{};
          } else {
            std::memcpy(dst, src, sizeof(T) * W);
          }
        }
      }
    }
  }
}

// Transposed counterpart: scatter-add cols back into the input layout.
template <typename T>
void col2im3x3(const T* cols, int C, int H, int W, T* in) {
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    T* plane = in + static_cast<std::size_t>(c) * hw;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const T* row = cols + (static_cast<std::size_t>(c) * 9 + (dy + 1) * 3 + (dx + 1)) * hw;
        for (int y = 0; y < H; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= H) continue;
          const T* src = row + static_cast<std::size_t>(y) * W;
          T* dst = plane + static_cast<std::size_t>(sy) * W;
          if (dx < 0) {
            for (int x = 1; x < W; ++x) dst[x - 1] += src[x];
          } else if (dx > 0) {
            for (int x = 0; x < W - 1; ++x) dst[x + 1] += src[x];
          } else {
            for (int x = 0; x < W; ++x) dst[x] += src[x];
          }
        }
      }
    }
  }
}

template <typename T>
std::vector<T>& conv_scratch() {
  static thread_local std::vector<T> buf;
  return buf;
}

inline void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d: 3x3 kernel, stride 1, zero padding 1 (same-size output).
// x is [N,C,H,W] or [C,H,W]; w is [O,C,3,3]; b is [O].

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const bool batched = x.rank() == 4;
  detail::check(batched || x.rank() == 3, "conv2d: input must be [C,H,W] or [N,C,H,W]");
  detail::check(w.rank() == 4 && w.dim(2) == 3 && w.dim(3) == 3,
                "conv2d: weight must be [C_out,C_in,3,3]");
  const int N = batched ? x.dim(0) : 1;
  const int C = batched ? x.dim(1) : x.dim(0);
  const int H = batched ? x.dim(2) : x.dim(1);
  const int W = batched ? x.dim(3) : x.dim(2);
  const int O = w.dim(0);
  detail::check(w.dim(1) == C, "conv2d: weight C_in " + std::to_string(w.dim(1)) +
                                   " does not match input channels " + std::to_string(C));
  detail::check(b.rank() == 1 && b.dim(0) == O, "conv2d: bias must be [C_out]");

  const std::size_t hw = static_cast<std::size_t>(H) * W;
  auto& cols = detail::conv_scratch<T>();
  cols.resize(static_cast<std::size_t>(C) * 9 * hw);

  Tensor<T> out(batched ? std::vector<int>{N, O, H, W} : std::vector<int>{O, H, W});
  for (int n = 0; n < N; ++n) {
    const T* xn = x.data.data() + static_cast<std::size_t>(n) * C * hw;
    T* on = out.data.data() + static_cast<std::size_t>(n) * O * hw;
    detail::im2col3x3(xn, C, H, W, cols.data());
    gemm_nn(w.data.data(), cols.data(), on, O, C * 9, static_cast<int>(hw));
    for (int o = 0; o < O; ++o) {
      const T bo = b[o];
      T* dst = on + static_cast<std::size_t>(o) * hw;
      for (std::size_t p = 0; p < hw; ++p) dst[p] += bo;
    }
  }
  return out;
}

template <typename T>
struct Conv2dGrads {
  Tensor<T> dx, dw, db;
};

// need_dw=false skips the weight/bias gradients (frozen layers).
template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& w,
                               const Tensor<T>& grad_out, bool need_dw = true) {
  const bool batched = x.rank() == 4;
  const int N = batched ? x.dim(0) : 1;
  const int C = batched ? x.dim(1) : x.dim(0);
  const int H = batched ? x.dim(2) : x.dim(1);
  const int W = batched ? x.dim(3) : x.dim(2);
  const int O = w.dim(0);
  const std::size_t hw = static_cast<std::size_t>(H) * W;

  Conv2dGrads<T> g;
  g.dx = Tensor<T>::zeros(x.shape);
  if (need_dw) {
    g.dw = Tensor<T>::zeros(w.shape);
    g.db = Tensor<T>::zeros({O});
  }

  auto& cols = detail::conv_scratch<T>();
  cols.resize(static_cast<std::size_t>(C) * 9 * hw);
  std::vector<T> dcols(static_cast<std::size_t>(C) * 9 * hw);

  for (int n = 0; n < N; ++n) {
    const T* xn = x.data.data() + static_cast<std::size_t>(n) * C * hw;
    const T* gn = grad_out.data.data() + static_cast<std::size_t>(n) * O * hw;
    T* dxn = g.dx.data.data() + static_cast<std::size_t>(n) * C * hw;

    if (need_dw) {
      detail::im2col3x3(xn, C, H, W, cols.data());
      gemm_nt(gn, cols.data(), g.dw.data.data(), O, static_cast<int>(hw), C * 9,
              /*accumulate=*/n > 0);
      for (int o = 0; o < O; ++o) {
        const T* src = gn + static_cast<std::size_t>(o) * hw;
        T s{};
        for (std::size_t p = 0; p < hw; ++p) s += src[p];
        g.db[o] += s;
      }
    }
    gemm_tn(w.data.data(), gn, dcols.data(), C * 9, O, static_cast<int>(hw));
    detail::col2im3x3(dcols.data(), C, H, W, dxn);
  }
  return g;
}

// ---------------------------------------------------------------------------
// maxpool2x2: stride-2 2x2 max. Gradient routes to the argmax position only;
// ties go to the first maximal element in row-major window order.

template <typename T>
struct MaxPoolResult {
  Tensor<T> out;
  Tensor<std::int64_t> argmax;  // flat index into the input tensor
};

template <typename T>
MaxPoolResult<T> maxpool2x2(const Tensor<T>& x) {
  const bool batched = x.rank() == 4;
  detail::check(batched || x.rank() == 3, "maxpool2x2: input must be [C,H,W] or [N,C,H,W]");
  const int N = batched ? x.dim(0) : 1;
  const int C = batched ? x.dim(1) : x.dim(0);
  const int H = batched ? x.dim(2) : x.dim(1);
  const int W = batched ? x.dim(3) : x.dim(2);
  detail::check(H % 2 == 0 && W % 2 == 0, "maxpool2x2: spatial dims must be even, got " +
                                              std::to_string(H) + "x" + std::to_string(W));
  const int Ho = H / 2, Wo = W / 2;

  MaxPoolResult<T> r{
      Tensor<T>(batched ? std::vector<int>{N, C, Ho, Wo} : std::vector<int>{C, Ho, Wo}),
      Tensor<std::int64_t>(batched ? std::vector<int>{N, C, Ho, Wo}
                                   : std::vector<int>{C, Ho, Wo})};
  std::int64_t oi = 0;
  for (int nc = 0; nc < N * C; ++nc) {
    const std::size_t base = static_cast<std::size_t>(nc) * H * W;
    for (int y = 0; y < Ho; ++y) {
      for (int xo = 0; xo < Wo; ++xo) {
        const std::size_t p00 = base + static_cast<std::size_t>(2 * y) * W + 2 * xo;
        std::size_t best = p00;
        T v = x.data[p00];
        const std::size_t cand[3] = {p00 + 1, p00 + W, p00 + W + 1};
        for (std::size_t c : cand) {
          if (x.data[c] > v) {
            v = x.data[c];
            best = c;
          }
        }
        r.out[oi] = v;
        r.argmax[oi] = static_cast<std::int64_t>(best);
        ++oi;
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2x2_backward(const Tensor<std::int64_t>& argmax, const Tensor<T>& grad_out,
                              const std::vector<int>& in_shape) {
  Tensor<T> dx = Tensor<T>::zeros(in_shape);
  for (std::int64_t i = 0; i < grad_out.numel(); ++i) {
    dx[argmax[i]] += grad_out[i];
  }
  return dx;
}

// ---------------------------------------------------------------------------
// dense: out = x . w^T (+ bias). x is [N,F_in] or [F_in]; w is [F_out,F_in].
// The hidden head layers run without bias; pass nullptr there.

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b) {
  const bool batched = x.rank() == 2;
  detail::check(batched || x.rank() == 1, "dense: input must be [F] or [N,F]");
  detail::check(w.rank() == 2, "dense: weight must be [F_out,F_in]");
  const int N = batched ? x.dim(0) : 1;
  const int Fi = batched ? x.dim(1) : x.dim(0);
  const int Fo = w.dim(0);
  detail::check(w.dim(1) == Fi, "dense: weight F_in " + std::to_string(w.dim(1)) +
                                    " does not match input size " + std::to_string(Fi));
  if (b) detail::check(b->rank() == 1 && b->dim(0) == Fo, "dense: bias must be [F_out]");

  Tensor<T> out(batched ? std::vector<int>{N, Fo} : std::vector<int>{Fo});
  gemm_nt(x.data.data(), w.data.data(), out.data.data(), N, Fi, Fo);
  if (b) {
    for (int n = 0; n < N; ++n) {
      T* row = out.data.data() + static_cast<std::size_t>(n) * Fo;
      for (int o = 0; o < Fo; ++o) row[o] += (*b)[o];
    }
  }
  return out;
}

template <typename T>
struct DenseGrads {
  Tensor<T> dx, dw, db;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& grad_out,
                             bool has_bias, bool need_dw = true) {
  const bool batched = x.rank() == 2;
  const int N = batched ? x.dim(0) : 1;
  const int Fi = batched ? x.dim(1) : x.dim(0);
  const int Fo = w.dim(0);

  DenseGrads<T> g;
  g.dx = Tensor<T>(x.shape);
  gemm_nn(grad_out.data.data(), w.data.data(), g.dx.data.data(), N, Fo, Fi);
  if (need_dw) {
    g.dw = Tensor<T>(w.shape);
    gemm_tn(grad_out.data.data(), x.data.data(), g.dw.data.data(), Fo, N, Fi);
    if (has_bias) {
      g.db = Tensor<T>::zeros({Fo});
      for (int n = 0; n < N; ++n) {
        const T* row = grad_out.data.data() + static_cast<std::size_t>(n) * Fo;
        for (int o = 0; o < Fo; ++o) g.db[o] += row[o];
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// batchnorm over the batch axis of [N,F]. Train mode normalizes by batch
// statistics (biased variance) and updates the running estimates in place:
//   running = (1 - momentum) * running + momentum * batch.
// Each feature carries 4 stored values (gamma, beta, running mean/var).

template <typename T>
struct BatchNormContext {
  Tensor<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    Tensor<T>& running_mean, Tensor<T>& running_var, Mode mode,
                    T momentum = T(0.1), T eps = T(1e-5), BatchNormContext<T>* ctx = nullptr) {
  detail::check(x.rank() == 2, "batchnorm: input must be [N,F]");
  const int N = x.dim(0), F = x.dim(1);
  detail::check(gamma.numel() == F && beta.numel() == F && running_mean.numel() == F &&
                    running_var.numel() == F,
                "batchnorm: parameter size does not match feature count");
  if (mode == Mode::kTrain) {
    detail::check(N >= 2, "batchnorm: train mode requires batch size >= 2");
  }

  Tensor<T> out(x.shape);
  if (mode == Mode::kInfer) {
    for (int j = 0; j < F; ++j) {
      const T is = T(1) / std::sqrt(running_var[j] + eps);
      const T m = running_mean[j], g = gamma[j], b = beta[j];
      for (int n = 0; n < N; ++n) out.at(n, j) = g * ((x.at(n, j) - m) * is) + b;
    }
    return out;
  }

  if (ctx) {
    ctx->xhat = Tensor<T>(x.shape);
    ctx->inv_std.assign(static_cast<std::size_t>(F), T{});
  }
  for (int j = 0; j < F; ++j) {
    T mean{};
    for (int n = 0; n < N; ++n) mean += x.at(n, j);
    mean /= T(N);
    T var{};
    for (int n = 0; n < N; ++n) {
      const T d = x.at(n, j) - mean;
      var += d * d;
    }
    var /= T(N);
    const T is = T(1) / std::sqrt(var + eps);
    for (int n = 0; n < N; ++n) {
      const T xh = (x.at(n, j) - mean) * is;
      if (ctx) ctx->xhat.at(n, j) = xh;
      out.at(n, j) = gamma[j] * xh + beta[j];
    }
    if (ctx) ctx->inv_std[static_cast<std::size_t>(j)] = is;
    running_mean[j] = (T(1) - momentum) * running_mean[j] + momentum * mean;
    running_var[j] = (T(1) - momentum) * running_var[j] + momentum * var;
  }
  return out;
}

template <typename T>
struct BatchNormGrads {
  Tensor<T> dx, dgamma, dbeta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormContext<T>& ctx, const Tensor<T>& gamma,
                                     const Tensor<T>& grad_out) {
  const int N = ctx.xhat.dim(0), F = ctx.xhat.dim(1);
  BatchNormGrads<T> g{Tensor<T>(ctx.xhat.shape), Tensor<T>::zeros({F}), Tensor<T>::zeros({F})};
  for (int j = 0; j < F; ++j) {
    T sum_dy{}, sum_dy_xhat{};
    for (int n = 0; n < N; ++n) {
      const T dy = grad_out.at(n, j);
      sum_dy += dy;
      sum_dy_xhat += dy * ctx.xhat.at(n, j);
    }
    g.dbeta[j] = sum_dy;
    g.dgamma[j] = sum_dy_xhat;
    const T scale = gamma[j] * ctx.inv_std[static_cast<std::size_t>(j)];
    for (int n = 0; n < N; ++n) {
      g.dx.at(n, j) = scale * (grad_out.at(n, j) - sum_dy / T(N) -
                               ctx.xhat.at(n, j) * sum_dy_xhat / T(N));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// relu; the subgradient at exactly 0 is 0, so the backward mask keys off
// out > 0.

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  for (std::int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] > T{} ? x[i] : T{};
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& out, const Tensor<T>& grad_out) {
  Tensor<T> dx(out.shape);
  for (std::int64_t i = 0; i < out.numel(); ++i) dx[i] = out[i] > T{} ? grad_out[i] : T{};
  return dx;
}

// In-place variants used by the training loop to avoid churn.
template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.data)
    if (v < T{}) v = T{};
}

// ---------------------------------------------------------------------------
// Fused softmax + categorical cross-entropy, max-subtracted for stability.

template <typename T>
struct SoftmaxCeResult {
  T loss;
  Tensor<T> probs;
};

template <typename T>
SoftmaxCeResult<T> softmax_cross_entropy(const Tensor<T>& logits, int true_class) {
  detail::check(logits.rank() == 1 && logits.dim(0) >= 2,
                "softmax_cross_entropy: logits must be [K], K >= 2");
  const int K = logits.dim(0);
  detail::check(true_class >= 0 && true_class < K,
                "softmax_cross_entropy: true_class " + std::to_string(true_class) +
                    " out of range for K=" + std::to_string(K));
  SoftmaxCeResult<T> r{T{}, Tensor<T>(logits.shape)};
  T m = logits[0];
  for (int k = 1; k < K; ++k) m = std::max(m, logits[k]);
  T z{};
  for (int k = 0; k < K; ++k) {
    const T e = std::exp(logits[k] - m);
    r.probs[k] = e;
    z += e;
  }
  for (int k = 0; k < K; ++k) r.probs[k] /= z;
  r.loss = std::log(z) - (logits[true_class] - m);
  return r;
}

// d(loss)/d(logits) = p - onehot(true_class)
template <typename T>
Tensor<T> softmax_cross_entropy_grad(const Tensor<T>& probs, int true_class) {
  Tensor<T> g = probs;
  g[true_class] -= T(1);
  return g;
}

// Batched form over [N,K] rows; the loss is the batch mean and dlogits is
// scaled accordingly.
template <typename T>
struct SoftmaxCeBatch {
  T mean_loss;
  Tensor<T> probs;
  Tensor<T> dlogits;
};

template <typename T>
SoftmaxCeBatch<T> softmax_cross_entropy_batch(const Tensor<T>& logits,
                                              const std::vector<int>& labels) {
  detail::check(logits.rank() == 2, "softmax_cross_entropy_batch: logits must be [N,K]");
  const int N = logits.dim(0), K = logits.dim(1);
  detail::check(static_cast<int>(labels.size()) == N,
                "softmax_cross_entropy_batch: label count does not match batch");
  SoftmaxCeBatch<T> r{T{}, Tensor<T>(logits.shape), Tensor<T>(logits.shape)};
  for (int n = 0; n < N; ++n) {
    const T* row = logits.data.data() + static_cast<std::size_t>(n) * K;
    const int t = labels[static_cast<std::size_t>(n)];
    detail::check(t >= 0 && t < K, "softmax_cross_entropy_batch: label out of range");
    T m = row[0];
    for (int k = 1; k < K; ++k) m = std::max(m, row[k]);
    T z{};
    for (int k = 0; k < K; ++k) {
      const T e = std::exp(row[k] - m);
      r.probs.at(n, k) = e;
      z += e;
    }
    for (int k = 0; k < K; ++k) {
      const T p = r.probs.at(n, k) / z;
      r.probs.at(n, k) = p;
      r.dlogits.at(n, k) = (p - (k == t ? T(1) : T(0))) / T(N);
    }
    r.mean_loss += (std::log(z) - (row[t] - m)) / T(N);
  }
  return r;
}

}  // namespace phantomqa::ops
