// SPDX-License-Identifier: Apache-2.0
// Each layer in isolation against central differences of L = sum(r * out)
// with random projection r.
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hrvfmri/nn/layers.hpp"
#include "hrvfmri/rng.hpp"
#include "support/tiny_models.hpp"

using namespace hrvfmri;
using namespace hrvfmri::nn;
using hrvfmri::testing::fd_max_relative_error;

namespace {

constexpr double kTol = 1e-4;
constexpr int kSeeds = 20;

std::vector<double> randn(std::size_t n, CounterRng& rng, double sd = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = sd * rng.normal();
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(ConvLayer, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    CounterRng rng(seed, 1);
    const std::size_t len = 5 + rng.below(8), in = 1 + rng.below(3), f = 1 + rng.below(3);
    const std::size_t k = 1 + 2 * rng.below(3), stride = 1 + rng.below(2);
    const std::size_t out_len = (len - 1) / stride + 1;
    auto x = randn(len * in, rng), w = randn(f * k * in, rng), b = randn(f, rng);
    const auto r = randn(out_len * f, rng);
    std::vector<double> pre(out_len * f);
    auto loss = [&] {
      layers::conv_forward(x.data(), len, in, w.data(), b.data(), f, k, stride, pre.data());
      return dot(pre, r);
    };
    std::vector<double> gw(w.size(), 0.0), gb(f, 0.0), dx(x.size());
    loss();
    layers::conv_backward(x.data(), len, in, w.data(), f, k, stride, r.data(), gw.data(),
                          gb.data(), dx.data());
    EXPECT_LT(fd_max_relative_error(w, gw, loss), kTol) << "seed " << seed;
    EXPECT_LT(fd_max_relative_error(b, gb, loss), kTol) << "seed " << seed;
    EXPECT_LT(fd_max_relative_error(x, dx, loss), kTol) << "seed " << seed;
  }
}

TEST(ConvLayer, SamePaddingLength) {
  for (std::size_t len : {1u, 2u, 7u, 8u})
    for (std::size_t stride : {1u, 2u, 3u}) {
      std::vector<double> x(len, 1.0), w(3, 1.0), b(1, 0.0);
      std::vector<double> pre((len - 1) / stride + 1, -1.0);
      layers::conv_forward(x.data(), len, 1, w.data(), b.data(), 1, 3, stride, pre.data());
      // Interior outputs see all three taps; edges see the zero padding.
      for (std::size_t t = 0; t < pre.size(); ++t) {
        const std::size_t c = t * stride;
        const double expect = 1.0 + (c > 0 ? 1.0 : 0.0) + (c + 1 < len ? 1.0 : 0.0);
        EXPECT_EQ(pre[t], expect);
      }
    }
}

TEST(ActivationLayer, GradientsMatchFiniteDifferences) {
  for (auto act : {Activation::ReLU, Activation::Tanh})
    for (int seed = 0; seed < kSeeds; ++seed) {
      CounterRng rng(seed, 2);
      auto pre = randn(30, rng);
      const auto r = randn(30, rng);
      std::vector<double> out(30), dpre(30);
      auto loss = [&] {
        layers::activate(act, pre.data(), out.data(), 30);
        return dot(out, r);
      };
      loss();
      layers::activate_backward(act, pre.data(), out.data(), r.data(), dpre.data(), 30);
      EXPECT_LT(fd_max_relative_error(pre, dpre, loss), kTol) << activation_name(act);
    }
}

TEST(PoolLayer, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    CounterRng rng(seed, 3);
    const std::size_t len = 2 + rng.below(9), ch = 1 + rng.below(3), out_len = len / 2;
    auto x = randn(len * ch, rng);
    const auto r = randn(out_len * ch, rng);
    std::vector<double> out(out_len * ch), dx(x.size());
    std::vector<std::uint32_t> arg(out_len * ch);
    auto loss = [&] {
      layers::pool_forward(x.data(), len, ch, out.data(), arg.data());
      return dot(out, r);
    };
    loss();
    layers::pool_backward(r.data(), out_len, len, ch, arg.data(), dx.data());
    EXPECT_LT(fd_max_relative_error(x, dx, loss), kTol) << "seed " << seed;
  }
}

TEST(PoolLayer, TiesRouteToEarlierStepAndOddTailDropped) {
  const std::vector<double> x = {2.0, 2.0, 1.0, 3.0, 9.0};
  std::vector<double> out(2);
  std::vector<std::uint32_t> arg(2);
  layers::pool_forward(x.data(), 5, 1, out.data(), arg.data());
  EXPECT_EQ(out, (std::vector<double>{2.0, 3.0}));
  EXPECT_EQ(arg, (std::vector<std::uint32_t>{0, 3}));
}

TEST(GruLayer, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    CounterRng rng(seed, 4);
    const std::size_t steps = 2 + rng.below(6), in = 1 + rng.below(4), h = 1 + rng.below(5);
    auto x = randn(steps * in, rng), wx = randn(3 * h * in, rng, 0.7),
         uh = randn(3 * h * h, rng, 0.7), b = randn(3 * h, rng, 0.5);
    const auto r = randn(h, rng);
    layers::GruCache cache;
    auto loss = [&] {
      layers::gru_forward(x.data(), steps, in, h, wx.data(), uh.data(), b.data(), cache);
      double s = 0.0;
      for (std::size_t j = 0; j < h; ++j) s += r[j] * cache.final_state()[j];
      return s;
    };
    loss();
    std::vector<double> gwx(wx.size(), 0.0), guh(uh.size(), 0.0), gb(b.size(), 0.0),
        dx(x.size());
    layers::gru_backward(x.data(), cache, wx.data(), uh.data(), r.data(), gwx.data(), guh.data(),
                         gb.data(), dx.data());
    EXPECT_LT(fd_max_relative_error(wx, gwx, loss), kTol) << "seed " << seed;
    EXPECT_LT(fd_max_relative_error(uh, guh, loss), kTol) << "seed " << seed;
    EXPECT_LT(fd_max_relative_error(b, gb, loss), kTol) << "seed " << seed;
    EXPECT_LT(fd_max_relative_error(x, dx, loss), kTol) << "seed " << seed;
  }
}

TEST(GruLayer, HiddenStateBounded) {
  CounterRng rng(9, 5);
  const std::size_t steps = 50, in = 3, h = 6;
  const auto x = randn(steps * in, rng, 10.0), wx = randn(3 * h * in, rng, 5.0),
             uh = randn(3 * h * h, rng, 5.0), b = randn(3 * h, rng, 5.0);
  layers::GruCache cache;
  layers::gru_forward(x.data(), steps, in, h, wx.data(), uh.data(), b.data(), cache);
  // Convex combinations of tanh values: saturation may reach +-1 in floating point.
  for (double v : cache.h) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(DenseLayer, GradientsMatchFiniteDifferences) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    CounterRng rng(seed, 6);
    const std::size_t in = 1 + rng.below(6), out = 1 + rng.below(5);
    auto x = randn(in, rng), w = randn(in * out, rng), b = randn(out, rng);
    const auto r = randn(out, rng);
    std::vector<double> pre(out);
    auto loss = [&] {
      layers::dense_forward(x.data(), in, w.data(), b.data(), out, pre.data());
      return dot(pre, r);
    };
    loss();
    std::vector<double> gw(w.size(), 0.0), gb(out, 0.0), dx(in);
    layers::dense_backward(x.data(), in, w.data(), out, r.data(), gw.data(), gb.data(), dx.data());
    EXPECT_LT(fd_max_relative_error(w, gw, loss), kTol);
    EXPECT_LT(fd_max_relative_error(b, gb, loss), kTol);
    EXPECT_LT(fd_max_relative_error(x, dx, loss), kTol);
  }
}

TEST(Layers, ParameterGradientsAccumulate) {
  CounterRng rng(1, 7);
  const auto x = randn(4, rng), w = randn(8, rng), dpre = randn(2, rng);
  std::vector<double> gw(8, 0.0), gb(2, 0.0);
  layers::dense_backward(x.data(), 4, w.data(), 2, dpre.data(), gw.data(), gb.data(), nullptr);
  const auto once = gw;
  layers::dense_backward(x.data(), 4, w.data(), 2, dpre.data(), gw.data(), gb.data(), nullptr);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(gw[i], 2.0 * once[i]);
}
