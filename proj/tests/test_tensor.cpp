#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "mimdarts/nn.hpp"
#include "mimdarts/tensor.hpp"
#include "testing.hpp"

#include <cmath>
#include <vector>

using namespace mimdarts;
using testing::random_tensor;

TEST_CASE("softmax of zeros is uniform") {
  Tensor x = Tensor::zeros({1, 5});
  Tensor s = softmax(x, 1);
  for (int i = 0; i < 5; ++i) CHECK(s.data()[i] == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("softmax of (ln 3, 0) is (0.75, 0.25)") {
  Tensor x = Tensor::from_data({1, 2}, {std::log(3.f), 0.f});
  Tensor s = softmax(x, 1);
  CHECK(s.data()[0] == doctest::Approx(0.75).epsilon(1e-6));
  CHECK(s.data()[1] == doctest::Approx(0.25).epsilon(1e-6));
}

TEST_CASE("softmax rows are positive and sum to 1") {
  Rng rng(11);
  Tensor x = random_tensor({7, 9}, rng, 4.f, false);
  Tensor s = softmax(x, 1);
  for (int r = 0; r < 7; ++r) {
    double acc = 0;
    for (int c = 0; c < 9; ++c) {
      CHECK(s.data()[r * 9 + c] > 0.f);
      acc += s.data()[r * 9 + c];
    }
    CHECK(acc == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("hardtanh clips to the interval") {
  Tensor x = Tensor::from_data({3}, {-5.f, 0.3f, 7.f});
  Tensor y = hardtanh(x, -1.f, 1.f);
  CHECK(y.data()[0] == -1.f);
  CHECK(y.data()[1] == doctest::Approx(0.3f));
  CHECK(y.data()[2] == 1.f);
}

TEST_CASE("1x1 identity kernel leaves the input unchanged") {
  Rng rng(2);
  Tensor x = random_tensor({2, 1, 4, 4}, rng, 1.f, false);
  Tensor w = Tensor::full({1, 1, 1, 1}, 1.f);
  Tensor y = conv2d(x, w, 1, 0);
  REQUIRE(y.numel() == x.numel());
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("3x3 ones kernel on a 3x3 ones input, padding 1: center is 9") {
  Tensor x = Tensor::full({1, 1, 3, 3}, 1.f);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.f);
  Tensor y = conv2d(x, w, 1, 1);
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  CHECK(y.data()[4] == doctest::Approx(9.f));
  CHECK(y.data()[0] == doctest::Approx(4.f));  // corner sees a 2x2 window
}

namespace {
// Brute-force cross-correlation, independent of the engine's im2col path.
std::vector<float> conv_reference(const Tensor& x, const Tensor& w, int stride, int pad,
                                  int dilation = 1, int groups = 1) {
  const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  const int O = w.shape()[0], K = w.shape()[2];
  const int cg = C / groups, og = O / groups;
  const int OH = (H + 2 * pad - dilation * (K - 1) - 1) / stride + 1;
  const int OW = (W + 2 * pad - dilation * (K - 1) - 1) / stride + 1;
  std::vector<float> out(size_t(B) * O * OH * OW, 0.f);
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < O; ++o)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double acc = 0;
          const int g = o / og;
          for (int c = 0; c < cg; ++c)
            for (int ki = 0; ki < K; ++ki)
              for (int kj = 0; kj < K; ++kj) {
                const int iy = oy * stride - pad + ki * dilation;
                const int ix = ox * stride - pad + kj * dilation;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += double(x.data()[((int64_t(b) * C + g * cg + c) * H + iy) * W + ix]) *
                       double(w.data()[((int64_t(o) * cg + c) * K + ki) * K + kj]);
              }
          out[((size_t(b) * O + o) * OH + oy) * OW + ox] = float(acc);
        }
  return out;
}
}  // namespace

TEST_CASE("conv2d matches a nested-loop reference") {
  Rng rng(3);
  Tensor x = random_tensor({2, 3, 8, 8}, rng, 1.f, false);
  Tensor w = random_tensor({4, 3, 3, 3}, rng, 1.f, false);
  for (auto [stride, pad] : std::vector<std::pair<int, int>>{{1, 0}, {1, 1}, {2, 1}}) {
    Tensor y = conv2d(x, w, stride, pad);
    auto ref = conv_reference(x, w, stride, pad);
    REQUIRE(size_t(y.numel()) == ref.size());
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(y.data()[int64_t(i)] == doctest::Approx(ref[i]).epsilon(1e-5));
  }
}

TEST_CASE("conv2d handles dilation and groups against the reference") {
  Rng rng(4);
  Tensor x = random_tensor({2, 4, 8, 8}, rng, 1.f, false);
  SUBCASE("dilation 2") {
    Tensor w = random_tensor({3, 4, 3, 3}, rng, 1.f, false);
    Tensor y = conv2d(x, w, 1, 2, 2, 1);
    auto ref = conv_reference(x, w, 1, 2, 2, 1);
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(y.data()[int64_t(i)] == doctest::Approx(ref[i]).epsilon(1e-5));
  }
  SUBCASE("depthwise (groups == channels)") {
    Tensor w = random_tensor({4, 1, 3, 3}, rng, 1.f, false);
    Tensor y = conv2d(x, w, 1, 1, 1, 4);
    auto ref = conv_reference(x, w, 1, 1, 1, 4);
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(y.data()[int64_t(i)] == doctest::Approx(ref[i]).epsilon(1e-5));
  }
  SUBCASE("depthwise stride 2, kernel 5, dilation 2") {
    Tensor w = random_tensor({4, 1, 5, 5}, rng, 1.f, false);
    Tensor y = conv2d(x, w, 2, 4, 2, 4);
    auto ref = conv_reference(x, w, 2, 4, 2, 4);
    REQUIRE(size_t(y.numel()) == ref.size());
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(y.data()[int64_t(i)] == doctest::Approx(ref[i]).epsilon(1e-5));
  }
}

TEST_CASE("conv2d is linear in its input") {
  Rng rng(5);
  Tensor x = random_tensor({1, 2, 6, 6}, rng, 1.f, false);
  Tensor y = random_tensor({1, 2, 6, 6}, rng, 1.f, false);
  Tensor w = random_tensor({3, 2, 3, 3}, rng, 1.f, false);
  const float a = 1.7f, b = -0.4f;
  Tensor lhs = conv2d(add(scale(x, a), scale(y, b)), w, 1, 1);
  Tensor r1 = conv2d(x, w, 1, 1);
  Tensor r2 = conv2d(y, w, 1, 1);
  for (int64_t i = 0; i < lhs.numel(); ++i)
    CHECK(lhs.data()[i] ==
          doctest::Approx(a * r1.data()[i] + b * r2.data()[i]).epsilon(1e-4));
}

TEST_CASE("conv2d rejects mismatched channels") {
  Tensor x = Tensor::zeros({1, 3, 4, 4});
  Tensor w = Tensor::zeros({2, 4, 3, 3});
  CHECK_THROWS(conv2d(x, w, 1, 1));
}

TEST_CASE("conv_transpose2d: single tap spreads to a 2x2 block") {
  Tensor x = Tensor::full({1, 1, 1, 1}, 3.f);
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.f);
  Tensor y = conv_transpose2d(x, w, 2, 0);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  for (int i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(3.f));
}

TEST_CASE("conv_transpose2d of zero input is zero") {
  Rng rng(6);
  Tensor x = Tensor::zeros({2, 3, 4, 4});
  Tensor w = random_tensor({3, 2, 4, 4}, rng, 1.f, false);
  Tensor y = conv_transpose2d(x, w, 2, 1);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 0.f);
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  // <conv(x, w), y> == <x, conv_transpose(y, w)> for all x, y.
  Rng rng(7);
  const int stride = 2, pad = 1;
  Tensor x = random_tensor({2, 3, 8, 8}, rng, 1.f, false);
  // The same buffer serves both layouts: conv reads it as [O,C,K,K], the
  // transpose as [C_in=O, C_out=C, K, K].
  Tensor w = random_tensor({4, 3, 4, 4}, rng, 1.f, false);
  Tensor cx = conv2d(x, w, stride, pad);
  Tensor y = random_tensor(cx.shape(), rng, 1.f, false);
  Tensor ty = conv_transpose2d(y, w, stride, pad);
  REQUIRE(ty.shape() == x.shape());
  double lhs = 0, rhs = 0;
  for (int64_t i = 0; i < cx.numel(); ++i) lhs += double(cx.data()[i]) * double(y.data()[i]);
  for (int64_t i = 0; i < x.numel(); ++i) rhs += double(x.data()[i]) * double(ty.data()[i]);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-4));
}

TEST_CASE("batch_norm: constant channel maps to zero with unit affine") {
  Tensor x = Tensor::full({4, 2, 3, 3}, 2.5f);
  Tensor gamma = Tensor::full({2}, 1.f);
  Tensor beta = Tensor::zeros({2});
  BatchNormStats stats;
  Tensor y = batch_norm(x, gamma, beta, stats, true);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y.data()[i]) < 1e-5f);
}

TEST_CASE("batch_norm: gamma 0, beta 5 gives all fives") {
  Rng rng(8);
  Tensor x = random_tensor({4, 2, 3, 3}, rng, 1.f, false);
  Tensor gamma = Tensor::zeros({2});
  Tensor beta = Tensor::full({2}, 5.f);
  BatchNormStats stats;
  Tensor y = batch_norm(x, gamma, beta, stats, true);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(5.f));
}

TEST_CASE("batch_norm normalizes per-channel moments") {
  Rng rng(9);
  Tensor x = random_tensor({8, 3, 5, 5}, rng, 2.f, false);
  Tensor gamma = Tensor::full({3}, 1.f);
  Tensor beta = Tensor::zeros({3});
  BatchNormStats stats;
  Tensor y = batch_norm(x, gamma, beta, stats, true);
  const int per = 8 * 5 * 5;
  for (int c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (int b = 0; b < 8; ++b)
      for (int i = 0; i < 25; ++i) m += double(y.data()[(int64_t(b) * 3 + c) * 25 + i]);
    m /= per;
    for (int b = 0; b < 8; ++b)
      for (int i = 0; i < 25; ++i) {
        double d = double(y.data()[(int64_t(b) * 3 + c) * 25 + i]) - m;
        v += d * d;
      }
    v /= per;
    CHECK(std::abs(m) < 1e-5);
    CHECK(std::abs(v - 1.0) < 1e-3);
  }
}

TEST_CASE("batch_norm eval mode uses running stats") {
  Rng rng(10);
  Tensor gamma = Tensor::full({2}, 1.f);
  Tensor beta = Tensor::zeros({2});
  BatchNormStats stats;
  for (int step = 0; step < 50; ++step) {
    Tensor x = random_tensor({16, 2, 4, 4}, rng, 1.f, false);
    batch_norm(x, gamma, beta, stats, true);
  }
  // a constant input in eval mode must not be renormalized to zero
  Tensor x = Tensor::full({2, 2, 4, 4}, 0.7f);
  Tensor y = batch_norm(x, gamma, beta, stats, false);
  for (int64_t i = 0; i < y.numel(); ++i) {
    const int c = int(i / 16) % 2;
    CHECK(y.data()[i] == doctest::Approx((0.7f - stats.running_mean[c]) /
                                         std::sqrt(stats.running_var[c] + 1e-5f))
                             .epsilon(1e-4));
  }
}

TEST_CASE("backward of sum of squares is 2x") {
  Rng rng(12);
  Tensor x = random_tensor({3, 4}, rng);
  Tensor loss = sum(mul(x, x));
  loss.backward();
  for (int64_t i = 0; i < x.numel(); ++i)
    CHECK(x.grad()[i] == doctest::Approx(2.f * x.data()[i]).epsilon(1e-5));
}

TEST_CASE("backward requires a scalar") {
  Tensor x = Tensor::zeros({2, 2}, true);
  CHECK_THROWS(add(x, x).backward());
}

TEST_CASE("grad accumulates across backward calls without reset") {
  Tensor x = Tensor::from_data({2}, {1.f, 2.f}, true);
  for (int i = 0; i < 2; ++i) sum(mul(x, x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(4.f));
  CHECK(x.grad()[1] == doctest::Approx(8.f));
}

TEST_CASE("fan-out accumulates additively") {
  Tensor x = Tensor::from_data({1}, {3.f}, true);
  Tensor y = add(x, x);  // dy/dx = 2
  sum(y).backward();
  CHECK(x.grad()[0] == doctest::Approx(2.f));
}

TEST_CASE("detach keeps values and cuts gradients") {
  Rng rng(13);
  Tensor a = random_tensor({4}, rng);
  Tensor b = random_tensor({4}, rng);
  Tensor d = a.detach();
  for (int64_t i = 0; i < 4; ++i) CHECK(d.data()[i] == a.data()[i]);
  CHECK_FALSE(d.requires_grad());
  Tensor loss = sum(mul(d, b));
  loss.backward();
  CHECK_FALSE(a.has_grad());
  for (int64_t i = 0; i < 4; ++i) CHECK(b.grad()[i] == doctest::Approx(a.data()[i]));
}

TEST_CASE("pooling basics") {
  Tensor x = Tensor::from_data({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
  Tensor mx = max_pool2d(x, 2, 2, 0);
  CHECK(mx.data()[0] == 4.f);
  Tensor av = avg_pool2d(x, 2, 2, 0);
  CHECK(av.data()[0] == doctest::Approx(2.5f));
  // padded positions are excluded from the average's divisor
  Tensor av_pad = avg_pool2d(x, 3, 2, 1);
  CHECK(av_pad.data()[0] == doctest::Approx(2.5f));
}

TEST_CASE("cross_entropy of uniform logits is ln K") {
  Tensor logits = Tensor::zeros({3, 10});
  Tensor loss = cross_entropy(logits, {0, 5, 9});
  CHECK(loss.item() == doctest::Approx(std::log(10.0)).epsilon(1e-6));
}

TEST_CASE("cross_entropy of saturated correct logits is tiny") {
  Buffer b = Buffer::Zero(2 * 4);
  b[1] = 40.f;
  b[4 + 2] = 40.f;
  Tensor logits = Tensor::from_buffer({2, 4}, std::move(b));
  CHECK(cross_entropy(logits, {1, 2}).item() < 1e-6f);
}

TEST_CASE("cross_entropy matches a 64-bit log-sum-exp reference") {
  Rng rng(14);
  Tensor logits = random_tensor({5, 7}, rng, 3.f, false);
  std::vector<int> labels{0, 6, 3, 2, 4};
  double ref = 0;
  for (int b = 0; b < 5; ++b) {
    double mx = -1e300;
    for (int k = 0; k < 7; ++k) mx = std::max(mx, double(logits.data()[b * 7 + k]));
    double lse = 0;
    for (int k = 0; k < 7; ++k) lse += std::exp(double(logits.data()[b * 7 + k]) - mx);
    ref += mx + std::log(lse) - double(logits.data()[b * 7 + labels[size_t(b)]]);
  }
  ref /= 5;
  CHECK(double(cross_entropy(logits, labels).item()) == doctest::Approx(ref).epsilon(1e-5));
}

TEST_CASE("cross_entropy rejects out-of-range labels") {
  CHECK_THROWS(cross_entropy(Tensor::zeros({1, 3}), {3}));
}

TEST_CASE("determinism: same seed gives identical values and gradients") {
  auto run = [] {
    Rng rng(99);
    Tensor x = random_tensor({2, 3, 6, 6}, rng);
    Tensor w = random_tensor({4, 3, 3, 3}, rng);
    Tensor loss = mean(mul(conv2d(x, w, 1, 1), conv2d(x, w, 1, 1)));
    loss.backward();
    std::vector<float> out(size_t(x.numel() + w.numel() + 1));
    out[0] = loss.item();
    for (int64_t i = 0; i < x.numel(); ++i) out[size_t(1 + i)] = x.grad()[i];
    for (int64_t i = 0; i < w.numel(); ++i) out[size_t(1 + x.numel() + i)] = w.grad()[i];
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("structural ops: reshape, select, concat, shift") {
  Tensor x = Tensor::from_data({2, 2}, {1.f, 2.f, 3.f, 4.f}, true);
  Tensor r = reshape(x, {4});
  CHECK(r.shape() == Shape{4});
  CHECK(select(r, 2).item() == 3.f);
  sum(mul(select(r, 2), select(r, 2))).backward();
  CHECK(x.grad()[2] == doctest::Approx(6.f));

  Tensor a = Tensor::full({1, 1, 2, 2}, 1.f);
  Tensor b = Tensor::full({1, 2, 2, 2}, 2.f);
  Tensor c = concat_channels({a, b});
  CHECK(c.shape() == Shape{1, 3, 2, 2});
  CHECK(c.data()[0] == 1.f);
  CHECK(c.data()[4] == 2.f);

  Tensor s = shift_spatial(b, 1);
  CHECK(s.shape() == Shape{1, 2, 1, 1});
}
