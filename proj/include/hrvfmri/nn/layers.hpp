// SPDX-License-Identifier: Apache-2.0
//
// Layer kernels on raw row-major buffers. Each backward accumulates (+=) into
// its parameter gradients and overwrites its input gradient when one is asked
// for. Sequences are [time][feature].
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hrvfmri/nn/config.hpp"

namespace hrvfmri::nn::layers {

/// Same-padded 1D convolution over time. x: [len][in_ch], w: [filters][k][in_ch],
/// pre: [(len-1)/stride+1][filters].
void conv_forward(const double* x, std::size_t len, std::size_t in_ch, const double* w,
                  const double* b, std::size_t filters, std::size_t k, std::size_t stride,
                  double* pre);

/// `dx` may be null; otherwise it is overwritten with dL/dx.
void conv_backward(const double* x, std::size_t len, std::size_t in_ch, const double* w,
                   std::size_t filters, std::size_t k, std::size_t stride, const double* dpre,
                   double* gw, double* gb, double* dx);

void activate(Activation a, const double* pre, double* out, std::size_t n);
/// dpre = dout * f'(pre); uses the stored output for tanh.
void activate_backward(Activation a, const double* pre, const double* out, const double* dout,
                       double* dpre, std::size_t n);

/// Max over non-overlapping pairs in time: out length = len / 2. Ties route to
/// the earlier step.
void pool_forward(const double* in, std::size_t len, std::size_t ch, double* out,
                  std::uint32_t* argmax);
/// din ([len][ch]) is overwritten.
void pool_backward(const double* dout, std::size_t out_len, std::size_t len, std::size_t ch,
                   const std::uint32_t* argmax, double* din);

/// Per-step gate activations kept for backpropagation through time.
struct GruCache {
  std::size_t steps = 0, in = 0, hidden = 0;
  std::vector<double> z, r, c;  // [steps][hidden]
  std::vector<double> h;        // [steps + 1][hidden], h[0] = 0
  std::vector<double> ax;       // input projections [steps][3 hidden]

  const double* final_state() const { return h.data() + steps * hidden; }
};

/// Standard GRU from a zero state:
///   z = sigmoid(Wz x + Uz h + bz), r = sigmoid(Wr x + Ur h + br)
///   c = tanh(Wc x + Uc (r * h) + bc), h' = (1 - z) * h + z * c
void gru_forward(const double* x, std::size_t steps, std::size_t in, std::size_t hidden,
                 const double* wx, const double* uh, const double* b, GruCache& cache);

/// dh_final: gradient w.r.t. the final hidden state. `dx` may be null.
void gru_backward(const double* x, const GruCache& cache, const double* wx, const double* uh,
                  const double* dh_final, double* gwx, double* guh, double* gb, double* dx);

/// pre = W x + b with W: [out][in].
void dense_forward(const double* x, std::size_t in, const double* w, const double* b,
                   std::size_t out, double* pre);
void dense_backward(const double* x, std::size_t in, const double* w, std::size_t out,
                    const double* dpre, double* gw, double* gb, double* dx);

}  // namespace hrvfmri::nn::layers
