#include <doctest.h>

#include <cmath>
#include <vector>

#include "common/gradcheck.hpp"
#include "phantomqa/ops.hpp"
#include "phantomqa/rng.hpp"

using namespace phantomqa;
using namespace phantomqa::ops;
using namespace phantomqa::testgrad;

namespace {

// Direct 6-loop convolution, the oracle for the im2col/GEMM path.
Tensor<double> conv_reference(const Tensor<double>& x, const Tensor<double>& w,
                              const Tensor<double>& b) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0);
  Tensor<double> out({N, O, H, W});
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          double acc = b[o];
          for (int c = 0; c < C; ++c)
            for (int ky = -1; ky <= 1; ++ky)
              for (int kx = -1; kx <= 1; ++kx) {
                const int sy = y + ky, sx = xx + kx;
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                acc += x.at(n, c, sy, sx) * w.at(o, c, ky + 1, kx + 1);
              }
          out.at(n, o, y, xx) = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d forward: hand fixture and brute-force oracle") {
  // Identity kernel passes the image through; all-ones kernel sums the
  // zero-padded 3x3 neighborhood.
  Tensor<double> x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor<double> ident = Tensor<double>::zeros({1, 1, 3, 3});
  ident.at(0, 0, 1, 1) = 1.0;
  Tensor<double> b0({1});
  auto same = conv2d(x, ident, b0);
  for (int i = 0; i < 9; ++i) CHECK(same[i] == doctest::Approx(x[i]));

  auto ones = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  Tensor<double> bias({1}, {0.5});
  auto summed = conv2d(x, ones, bias);
  CHECK(summed.at(0, 0, 0, 0) == doctest::Approx(12.5));   // corner: 1+2+4+5
  CHECK(summed.at(0, 0, 1, 1) == doctest::Approx(45.5));   // center: all nine
  CHECK(summed.at(0, 0, 2, 1) == doctest::Approx(4 + 5 + 6 + 7 + 8 + 9 + 0.5));

  RngState rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const int N = 1 + static_cast<int>(rng.next_below(2));
    const int C = 1 + static_cast<int>(rng.next_below(3));
    const int O = 1 + static_cast<int>(rng.next_below(4));
    const int H = 2 + static_cast<int>(rng.next_below(5));
    const int W = 2 + static_cast<int>(rng.next_below(5));
    auto xr = uniform_tensor({N, C, H, W}, rng);
    auto wr = uniform_tensor({O, C, 3, 3}, rng);
    auto br = uniform_tensor({O}, rng);
    auto got = conv2d(xr, wr, br);
    auto want = conv_reference(xr, wr, br);
    for (std::int64_t i = 0; i < got.numel(); ++i) {
      CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("conv2d rejects mismatched shapes") {
  Tensor<double> x({1, 2, 4, 4});
  Tensor<double> w({3, 5, 3, 3});
  Tensor<double> b({3});
  CHECK_THROWS_WITH_AS(conv2d(x, w, b), doctest::Contains("does not match"),
                       std::invalid_argument);
  Tensor<double> w5({3, 2, 5, 5});
  CHECK_THROWS_AS(conv2d(x, w5, b), std::invalid_argument);
}

TEST_CASE("conv2d gradients match central differences on three shapes") {
  RngState rng(21);
  const std::vector<std::vector<int>> xshapes = {{1, 1, 2, 2}, {2, 3, 4, 4}, {2, 2, 5, 3}};
  const std::vector<int> outs = {1, 4, 3};
  for (std::size_t s = 0; s < xshapes.size(); ++s) {
    auto x = uniform_tensor(xshapes[s], rng);
    auto w = uniform_tensor({outs[s], xshapes[s][1], 3, 3}, rng);
    auto b = uniform_tensor({outs[s]}, rng);
    Tensor<double> proj;
    {
      auto out = conv2d(x, w, b);
      proj = uniform_tensor(out.shape, rng);
    }
    const auto loss = [&]() { return dot(conv2d(x, w, b), proj); };
    auto g = conv2d_backward(x, w, proj);
    CHECK(max_rel_err(x, g.dx, loss) < kRelTol);
    CHECK(max_rel_err(w, g.dw, loss) < kRelTol);
    CHECK(max_rel_err(b, g.db, loss) < kRelTol);
  }
}

TEST_CASE("conv2d_backward can skip parameter gradients") {
  RngState rng(22);
  auto x = uniform_tensor({1, 2, 4, 4}, rng);
  auto w = uniform_tensor({3, 2, 3, 3}, rng);
  auto go = uniform_tensor({1, 3, 4, 4}, rng);
  auto full = conv2d_backward(x, w, go, true);
  auto slim = conv2d_backward(x, w, go, false);
  CHECK(slim.dw.numel() == 0);
  CHECK(slim.db.numel() == 0);
  for (std::int64_t i = 0; i < full.dx.numel(); ++i) CHECK(slim.dx[i] == full.dx[i]);
}

TEST_CASE("maxpool2x2 forward: values, argmax and tie direction") {
  Tensor<double> x({1, 1, 4, 4}, {1, 2, 9, 3,    //
                                  4, 3, 9, 9,    //
                                  0, 0, 1, 2,    //
                                  0, 5, 3, 4});
  auto r = maxpool2x2(x);
  CHECK(r.out.shape == std::vector<int>{1, 1, 2, 2});
  CHECK(r.out.at(0, 0, 0, 0) == 4.0);
  CHECK(r.out.at(0, 0, 0, 1) == 9.0);
  CHECK(r.out.at(0, 0, 1, 0) == 5.0);
  CHECK(r.out.at(0, 0, 1, 1) == 4.0);
  // Three 9s in the second window; the first in row-major order (0,2) wins.
  CHECK(r.argmax.at(0, 0, 0, 1) == 2);
  CHECK(r.argmax.at(0, 0, 0, 0) == 4);

  Tensor<double> go({1, 1, 2, 2}, {1, 10, 100, 1000});
  auto dx = maxpool2x2_backward(r.argmax, go, x.shape);
  CHECK(dx[4] == 1.0);
  CHECK(dx[2] == 10.0);
  CHECK(dx[13] == 100.0);
  CHECK(dx[15] == 1000.0);
  double total = 0.0;
  for (std::int64_t i = 0; i < dx.numel(); ++i) total += dx[i];
  CHECK(total == doctest::Approx(1111.0));

  CHECK_THROWS_AS(maxpool2x2(Tensor<double>({1, 1, 3, 4})), std::invalid_argument);
}

TEST_CASE("maxpool2x2 gradients match central differences on three shapes") {
  RngState rng(23);
  for (const auto& shape :
       std::vector<std::vector<int>>{{1, 1, 4, 4}, {2, 3, 4, 6}, {3, 2, 8, 2}}) {
    auto x = distinct_tensor(shape, rng);
    auto r0 = maxpool2x2(x);
    auto proj = uniform_tensor(r0.out.shape, rng);
    const auto loss = [&]() { return dot(maxpool2x2(x).out, proj); };
    auto dx = maxpool2x2_backward(r0.argmax, proj, x.shape);
    CHECK(max_rel_err(x, dx, loss) < kRelTol);
  }
}

TEST_CASE("dense forward: hand fixture, optional bias") {
  Tensor<double> x({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> w({2, 3}, {1, 0, -1, 0.5, 0.5, 0.5});
  Tensor<double> b({2}, {10, 20});
  auto out = dense(x, w, &b);
  CHECK(out.at(0, 0) == doctest::Approx(1 - 3 + 10));
  CHECK(out.at(0, 1) == doctest::Approx(0.5 * 6 + 20));
  CHECK(out.at(1, 0) == doctest::Approx(4 - 6 + 10));
  CHECK(out.at(1, 1) == doctest::Approx(0.5 * 15 + 20));

  auto nb = dense(x, w, static_cast<const Tensor<double>*>(nullptr));
  CHECK(nb.at(0, 0) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(dense(Tensor<double>({2, 4}), w, &b), std::invalid_argument);
}

TEST_CASE("dense gradients match central differences on three shapes") {
  RngState rng(24);
  struct Case {
    std::vector<int> xs;
    int fo;
    bool bias;
  };
  for (const Case& c : {Case{{4}, 3, true}, Case{{2, 5}, 4, false}, Case{{3, 7}, 2, true}}) {
    auto x = uniform_tensor(c.xs, rng);
    const int fi = c.xs.back();
    auto w = uniform_tensor({c.fo, fi}, rng);
    auto b = uniform_tensor({c.fo}, rng);
    const Tensor<double>* bp = c.bias ? &b : nullptr;
    Tensor<double> proj;
    {
      auto out = dense(x, w, bp);
      proj = uniform_tensor(out.shape, rng);
    }
    const auto loss = [&]() { return dot(dense(x, w, bp), proj); };
    auto g = dense_backward(x, w, proj, c.bias);
    CHECK(max_rel_err(x, g.dx, loss) < kRelTol);
    CHECK(max_rel_err(w, g.dw, loss) < kRelTol);
    if (c.bias) CHECK(max_rel_err(b, g.db, loss) < kRelTol);
  }
}

TEST_CASE("batchnorm train mode: statistics and running updates") {
  Tensor<double> x({4, 2}, {1, 10, 2, 20, 3, 30, 4, 40});
  auto gamma = Tensor<double>::full({2}, 1.0);
  auto beta = Tensor<double>::zeros({2});
  auto rm = Tensor<double>::zeros({2});
  auto rv = Tensor<double>::full({2}, 1.0);

  BatchNormContext<double> ctx;
  auto out = batchnorm(x, gamma, beta, rm, rv, Mode::kTrain, 0.1, 1e-5, &ctx);

  // Feature 0: mean 2.5, biased var 1.25.
  const double is0 = 1.0 / std::sqrt(1.25 + 1e-5);
  CHECK(out.at(0, 0) == doctest::Approx((1 - 2.5) * is0));
  CHECK(out.at(3, 0) == doctest::Approx((4 - 2.5) * is0));
  CHECK(rm[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 2.5));
  CHECK(rv[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.25));
  CHECK(rm[1] == doctest::Approx(0.1 * 25.0));
  CHECK(rv[1] == doctest::Approx(0.9 + 0.1 * 125.0));

  // Normalized columns have zero mean and unit variance.
  for (int j = 0; j < 2; ++j) {
    double m = 0, v = 0;
    for (int n = 0; n < 4; ++n) m += out.at(n, j);
    m /= 4;
    for (int n = 0; n < 4; ++n) v += (out.at(n, j) - m) * (out.at(n, j) - m);
    v /= 4;
    CHECK(m == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(v == doctest::Approx(1.0).epsilon(1e-4));
  }

  CHECK_THROWS_AS(batchnorm(Tensor<double>({1, 2}), gamma, beta, rm, rv, Mode::kTrain),
                  std::invalid_argument);
}

TEST_CASE("batchnorm infer mode uses running statistics only") {
  Tensor<double> x({1, 2}, {3.0, -1.0});
  Tensor<double> gamma({2}, {2.0, 1.0});
  Tensor<double> beta({2}, {0.5, 0.0});
  Tensor<double> rm({2}, {1.0, -2.0});
  Tensor<double> rv({2}, {4.0, 9.0});
  auto rm_copy = rm, rv_copy = rv;
  auto out = batchnorm(x, gamma, beta, rm, rv, Mode::kInfer);
  CHECK(out.at(0, 0) == doctest::Approx(2.0 * (3.0 - 1.0) / std::sqrt(4.0 + 1e-5) + 0.5));
  CHECK(out.at(0, 1) == doctest::Approx((-1.0 + 2.0) / std::sqrt(9.0 + 1e-5)));
  CHECK(rm.data == rm_copy.data);  // untouched in infer mode
  CHECK(rv.data == rv_copy.data);
}

TEST_CASE("batchnorm gradients match central differences on three shapes") {
  RngState rng(25);
  for (const auto& shape : std::vector<std::vector<int>>{{2, 3}, {4, 5}, {8, 2}}) {
    auto x = uniform_tensor(shape, rng);
    const int F = shape[1];
    auto gamma = uniform_tensor({F}, rng);
    for (auto& g : gamma.data) g += 1.5;  // keep gamma away from 0
    auto beta = uniform_tensor({F}, rng);
    auto proj = uniform_tensor(shape, rng);

    // The forward pass mutates running stats, so the loss recomputes on
    // scratch copies every call.
    const auto loss = [&]() {
      auto rm = Tensor<double>::zeros({F});
      auto rv = Tensor<double>::full({F}, 1.0);
      return dot(batchnorm(x, gamma, beta, rm, rv, Mode::kTrain), proj);
    };

    BatchNormContext<double> ctx;
    auto rm = Tensor<double>::zeros({F});
    auto rv = Tensor<double>::full({F}, 1.0);
    batchnorm(x, gamma, beta, rm, rv, Mode::kTrain, 0.1, 1e-5, &ctx);
    auto g = batchnorm_backward(ctx, gamma, proj);
    CHECK(max_rel_err(x, g.dx, loss) < kRelTol);
    CHECK(max_rel_err(gamma, g.dgamma, loss) < kRelTol);
    CHECK(max_rel_err(beta, g.dbeta, loss) < kRelTol);
  }
}

TEST_CASE("relu forward/backward and the in-place variant") {
  Tensor<double> x({5}, {-2, -0.5, 0, 0.5, 2});
  auto out = relu(x);
  CHECK(out[0] == 0.0);
  CHECK(out[2] == 0.0);
  CHECK(out[3] == 0.5);

  auto copy = x;
  relu_inplace(copy);
  for (int i = 0; i < 5; ++i) CHECK(copy[i] == out[i]);

  // Subgradient at 0 is 0: the mask keys off out > 0.
  Tensor<double> go = Tensor<double>::full({5}, 1.0);
  auto dx = relu_backward(out, go);
  CHECK(dx[1] == 0.0);
  CHECK(dx[2] == 0.0);
  CHECK(dx[4] == 1.0);

  RngState rng(26);
  for (const auto& shape : std::vector<std::vector<int>>{{7}, {3, 4}, {2, 3, 4}}) {
    auto xr = uniform_tensor(shape, rng);
    away_from_zero(xr);
    auto proj = uniform_tensor(shape, rng);
    const auto loss = [&]() { return dot(relu(xr), proj); };
    auto g = relu_backward(relu(xr), proj);
    CHECK(max_rel_err(xr, g, loss) < kRelTol);
  }
}

TEST_CASE("softmax cross-entropy: probabilities, loss and shift invariance") {
  Tensor<double> logits({3}, {1.0, 2.0, 0.5});
  auto r = softmax_cross_entropy(logits, 1);
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) sum += r.probs[k];
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(-std::log(r.probs[1])).epsilon(1e-12));

  Tensor<double> shifted({3}, {101.0, 102.0, 100.5});
  auto r2 = softmax_cross_entropy(shifted, 1);
  CHECK(r2.loss == doctest::Approx(r.loss).epsilon(1e-10));
  for (int k = 0; k < 3; ++k) CHECK(r2.probs[k] == doctest::Approx(r.probs[k]).epsilon(1e-10));

  CHECK_THROWS_AS(softmax_cross_entropy(logits, 3), std::invalid_argument);
  CHECK_THROWS_AS(softmax_cross_entropy(Tensor<double>({1}), 0), std::invalid_argument);
}

TEST_CASE("softmax cross-entropy gradients match central differences") {
  RngState rng(27);
  for (int K : {2, 5, 9}) {
    auto logits = uniform_tensor({K}, rng);
    const int t = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(K)));
    const auto loss = [&]() { return softmax_cross_entropy(logits, t).loss; };
    auto g = softmax_cross_entropy_grad(softmax_cross_entropy(logits, t).probs, t);
    CHECK(max_rel_err(logits, g, loss) < kRelTol);
  }
}

TEST_CASE("batched softmax cross-entropy agrees with per-sample calls") {
  RngState rng(28);
  for (const auto& shape : std::vector<std::vector<int>>{{2, 5}, {4, 3}, {3, 2}}) {
    const int N = shape[0], K = shape[1];
    auto logits = uniform_tensor(shape, rng);
    std::vector<int> labels;
    for (int n = 0; n < N; ++n)
      labels.push_back(static_cast<int>(rng.next_below(static_cast<std::uint64_t>(K))));

    auto batch = softmax_cross_entropy_batch(logits, labels);
    double mean = 0.0;
    for (int n = 0; n < N; ++n) {
      Tensor<double> row({K});
      for (int k = 0; k < K; ++k) row[k] = logits.at(n, k);
      auto single = softmax_cross_entropy(row, labels[static_cast<std::size_t>(n)]);
      mean += single.loss / N;
      auto grad = softmax_cross_entropy_grad(single.probs, labels[static_cast<std::size_t>(n)]);
      for (int k = 0; k < K; ++k) {
        CHECK(batch.probs.at(n, k) == doctest::Approx(single.probs[k]).epsilon(1e-12));
        CHECK(batch.dlogits.at(n, k) == doctest::Approx(grad[k] / N).epsilon(1e-12));
      }
    }
    CHECK(batch.mean_loss == doctest::Approx(mean).epsilon(1e-12));

    // And against finite differences of the batch loss directly.
    const auto loss = [&]() { return softmax_cross_entropy_batch(logits, labels).mean_loss; };
    auto dl = softmax_cross_entropy_batch(logits, labels).dlogits;
    CHECK(max_rel_err(logits, dl, loss) < kRelTol);
  }
}
