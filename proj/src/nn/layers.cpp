// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/nn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace hrvfmri::nn::layers {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Range of kernel taps [k0, k1) that land inside the input for output step t.
// Rows t*stride - pad + k are contiguous, so the tap slab is one flat span.
struct Taps {
  std::size_t k0, k1, first_row;
};

Taps taps(std::size_t t, std::size_t len, std::size_t k, std::size_t stride) {
  const long pad = static_cast<long>(k / 2);
  const long start = static_cast<long>(t * stride) - pad;
  const long k0 = std::max(0L, -start);
  const long k1 = std::min(static_cast<long>(k), static_cast<long>(len) - start);
  return {static_cast<std::size_t>(k0), static_cast<std::size_t>(std::max(k0, k1)),
          static_cast<std::size_t>(start + k0)};
}

}  // namespace

void conv_forward(const double* x, std::size_t len, std::size_t in_ch, const double* w,
                  const double* b, std::size_t filters, std::size_t k, std::size_t stride,
                  double* pre) {
  const std::size_t out_len = (len - 1) / stride + 1;
  for (std::size_t t = 0; t < out_len; ++t) {
    const Taps tp = taps(t, len, k, stride);
    const double* slab = x + tp.first_row * in_ch;
    const std::size_t n = (tp.k1 - tp.k0) * in_ch;
    for (std::size_t f = 0; f < filters; ++f)
      pre[t * filters + f] = b[f] + dot(w + (f * k + tp.k0) * in_ch, slab, n);
  }
}

void conv_backward(const double* x, std::size_t len, std::size_t in_ch, const double* w,
                   std::size_t filters, std::size_t k, std::size_t stride, const double* dpre,
                   double* gw, double* gb, double* dx) {
  const std::size_t out_len = (len - 1) / stride + 1;
  if (dx) std::fill(dx, dx + len * in_ch, 0.0);
  for (std::size_t t = 0; t < out_len; ++t) {
    const Taps tp = taps(t, len, k, stride);
    const double* slab = x + tp.first_row * in_ch;
    const std::size_t n = (tp.k1 - tp.k0) * in_ch;
    for (std::size_t f = 0; f < filters; ++f) {
      const double g = dpre[t * filters + f];
      if (g == 0.0) continue;
      gb[f] += g;
      axpy(g, slab, gw + (f * k + tp.k0) * in_ch, n);
      if (dx) axpy(g, w + (f * k + tp.k0) * in_ch, dx + tp.first_row * in_ch, n);
    }
  }
}

void activate(Activation a, const double* pre, double* out, std::size_t n) {
  if (a == Activation::ReLU) {
    for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? pre[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = std::tanh(pre[i]);
  }
}

void activate_backward(Activation a, const double* pre, const double* out, const double* dout,
                       double* dpre, std::size_t n) {
  if (a == Activation::ReLU) {
    for (std::size_t i = 0; i < n; ++i) dpre[i] = pre[i] > 0.0 ? dout[i] : 0.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) dpre[i] = dout[i] * (1.0 - out[i] * out[i]);
  }
}

void pool_forward(const double* in, std::size_t len, std::size_t ch, double* out,
                  std::uint32_t* argmax) {
  const std::size_t out_len = len / 2;
  for (std::size_t t = 0; t < out_len; ++t)
    for (std::size_t c = 0; c < ch; ++c) {
      const double a = in[(2 * t) * ch + c], b = in[(2 * t + 1) * ch + c];
      const bool second = b > a;
      out[t * ch + c] = second ? b : a;
      argmax[t * ch + c] = static_cast<std::uint32_t>(2 * t + (second ? 1 : 0));
    }
}

void pool_backward(const double* dout, std::size_t out_len, std::size_t len, std::size_t ch,
                   const std::uint32_t* argmax, double* din) {
  std::fill(din, din + len * ch, 0.0);
  for (std::size_t t = 0; t < out_len; ++t)
    for (std::size_t c = 0; c < ch; ++c) din[argmax[t * ch + c] * ch + c] += dout[t * ch + c];
}

void gru_forward(const double* x, std::size_t steps, std::size_t in, std::size_t hidden,
                 const double* wx, const double* uh, const double* b, GruCache& cache) {
  const std::size_t h3 = 3 * hidden;
  cache.steps = steps;
  cache.in = in;
  cache.hidden = hidden;
  cache.z.resize(steps * hidden);
  cache.r.resize(steps * hidden);
  cache.c.resize(steps * hidden);
  cache.h.assign((steps + 1) * hidden, 0.0);
  cache.ax.resize(steps * h3);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t j = 0; j < h3; ++j)
      cache.ax[t * h3 + j] = b[j] + dot(wx + j * in, x + t * in, in);

  std::vector<double> rh(hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* hp = cache.h.data() + t * hidden;
    double* hn = cache.h.data() + (t + 1) * hidden;
    const double* ax = cache.ax.data() + t * h3;
    double* z = cache.z.data() + t * hidden;
    double* r = cache.r.data() + t * hidden;
    double* c = cache.c.data() + t * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      z[j] = sigmoid(ax[j] + dot(uh + j * hidden, hp, hidden));
      r[j] = sigmoid(ax[hidden + j] + dot(uh + (hidden + j) * hidden, hp, hidden));
    }
    for (std::size_t j = 0; j < hidden; ++j) rh[j] = r[j] * hp[j];
    for (std::size_t j = 0; j < hidden; ++j) {
      c[j] = std::tanh(ax[2 * hidden + j] + dot(uh + (2 * hidden + j) * hidden, rh.data(), hidden));
      hn[j] = (1.0 - z[j]) * hp[j] + z[j] * c[j];
    }
  }
}

void gru_backward(const double* x, const GruCache& cache, const double* wx, const double* uh,
                  const double* dh_final, double* gwx, double* guh, double* gb, double* dx) {
  const std::size_t steps = cache.steps, in = cache.in, hidden = cache.hidden;
  std::vector<double> dh(dh_final, dh_final + hidden), dh_prev(hidden), da(3 * hidden),
      drh(hidden), rh(hidden);
  if (dx) std::fill(dx, dx + steps * in, 0.0);
  for (std::size_t t = steps; t-- > 0;) {
    const double* hp = cache.h.data() + t * hidden;
    const double* z = cache.z.data() + t * hidden;
    const double* r = cache.r.data() + t * hidden;
    const double* c = cache.c.data() + t * hidden;
    double* daz = da.data();
    double* dar = da.data() + hidden;
    double* dac = da.data() + 2 * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double dz = dh[j] * (c[j] - hp[j]);
      const double dc = dh[j] * z[j];
      dh_prev[j] = dh[j] * (1.0 - z[j]);
      daz[j] = dz * z[j] * (1.0 - z[j]);
      dac[j] = dc * (1.0 - c[j] * c[j]);
      rh[j] = r[j] * hp[j];
    }
    // Candidate path through U_c (r * h).
    std::fill(drh.begin(), drh.end(), 0.0);
    for (std::size_t j = 0; j < hidden; ++j) {
      axpy(dac[j], rh.data(), guh + (2 * hidden + j) * hidden, hidden);
      axpy(dac[j], uh + (2 * hidden + j) * hidden, drh.data(), hidden);
    }
    for (std::size_t j = 0; j < hidden; ++j) {
      dar[j] = drh[j] * hp[j] * r[j] * (1.0 - r[j]);
      dh_prev[j] += drh[j] * r[j];
    }
    // Update and reset gates read h directly.
    for (std::size_t j = 0; j < 2 * hidden; ++j) {
      axpy(da[j], hp, guh + j * hidden, hidden);
      axpy(da[j], uh + j * hidden, dh_prev.data(), hidden);
    }
    const double* xt = x + t * in;
    for (std::size_t j = 0; j < 3 * hidden; ++j) {
      gb[j] += da[j];
      axpy(da[j], xt, gwx + j * in, in);
      if (dx) axpy(da[j], wx + j * in, dx + t * in, in);
    }
    dh.swap(dh_prev);
  }
}

void dense_forward(const double* x, std::size_t in, const double* w, const double* b,
                   std::size_t out, double* pre) {
  for (std::size_t o = 0; o < out; ++o) pre[o] = b[o] + dot(w + o * in, x, in);
}

void dense_backward(const double* x, std::size_t in, const double* w, std::size_t out,
                    const double* dpre, double* gw, double* gb, double* dx) {
  if (dx) std::fill(dx, dx + in, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    gb[o] += dpre[o];
    axpy(dpre[o], x, gw + o * in, in);
    if (dx) axpy(dpre[o], w + o * in, dx, in);
  }
}

}  // namespace hrvfmri::nn::layers
