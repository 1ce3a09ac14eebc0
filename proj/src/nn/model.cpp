// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/nn/model.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hrvfmri/error.hpp"
#include "hrvfmri/rng.hpp"

namespace hrvfmri::nn {

bool ModelParams::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ModelParams zero_params(const ModelConfig& cfg) {
  ModelParams p;
  p.cfg = cfg;
  p.layout = make_layout(cfg);
  p.values.assign(p.layout.total, 0.0);
  return p;
}

ModelParams init_params(const ModelConfig& cfg) {
  ModelParams p = zero_params(cfg);
  CounterRng rng(derive_seed(cfg.seed, "init"));
  auto fill = [&](std::size_t off, std::size_t n, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < n; ++i) p.values[off + i] = rng.uniform(-bound, bound);
  };
  const auto shapes = block_shapes(cfg);
  for (std::size_t b = 0; b < shapes.size(); ++b) {
    const std::size_t k = cfg.conv_blocks[b].kernel;
    fill(p.layout.conv[b].w, shapes[b].filters * k * shapes[b].in_ch, k * shapes[b].in_ch);
  }
  const std::size_t h = cfg.gru_hidden, d = cfg.dense_hidden, in = p.layout.gru_in;
  fill(p.layout.gru_wx, 3 * h * in, in);
  fill(p.layout.gru_uh, 3 * h * h, h);
  fill(p.layout.dense_w, d * h, h);
  fill(p.layout.head_w, d, d);
  return p;
}

double forward(const ModelParams& p, MatrixView input, ForwardCache& cache) {
  const ModelConfig& cfg = p.cfg;
  if (input.rows != cfg.window_len || input.cols != cfg.n_channels)
    throw ValidationError("input is " + std::to_string(input.rows) + "x" +
                          std::to_string(input.cols) + ", model expects " +
                          std::to_string(cfg.window_len) + "x" + std::to_string(cfg.n_channels));
  const auto shapes = block_shapes(cfg);
  cache.input = input.data;
  cache.blocks.resize(shapes.size());
  const double* x = input.data;
  for (std::size_t b = 0; b < shapes.size(); ++b) {
    const auto& s = shapes[b];
    const auto& blk = cfg.conv_blocks[b];
    auto& c = cache.blocks[b];
    c.pre.resize(s.conv_len * s.filters);
    c.act.resize(s.conv_len * s.filters);
    layers::conv_forward(x, s.in_len, s.in_ch, p.at(p.layout.conv[b].w), p.at(p.layout.conv[b].b),
                         s.filters, blk.kernel, blk.stride, c.pre.data());
    layers::activate(cfg.activation, c.pre.data(), c.act.data(), c.pre.size());
    if (blk.pool == Pool::Max2) {
      c.pooled.resize(s.out_len * s.filters);
      c.argmax.resize(s.out_len * s.filters);
      layers::pool_forward(c.act.data(), s.conv_len, s.filters, c.pooled.data(), c.argmax.data());
      x = c.pooled.data();
    } else {
      x = c.act.data();
    }
  }
  const Layout& l = p.layout;
  layers::gru_forward(x, l.gru_steps, l.gru_in, cfg.gru_hidden, p.at(l.gru_wx), p.at(l.gru_uh),
                      p.at(l.gru_b), cache.gru);
  cache.dense_pre.resize(cfg.dense_hidden);
  cache.dense_act.resize(cfg.dense_hidden);
  layers::dense_forward(cache.gru.final_state(), cfg.gru_hidden, p.at(l.dense_w), p.at(l.dense_b),
                        cfg.dense_hidden, cache.dense_pre.data());
  layers::activate(cfg.activation, cache.dense_pre.data(), cache.dense_act.data(),
                   cfg.dense_hidden);
  double y = p.values[l.head_b];
  for (std::size_t i = 0; i < cfg.dense_hidden; ++i) y += p.values[l.head_w + i] * cache.dense_act[i];
  cache.output = y;
  return y;
}

double predict(const ModelParams& p, MatrixView input) {
  ForwardCache cache;
  return forward(p, input, cache);
}

void backward(const ModelParams& p, const ForwardCache& cache, double dy,
              std::span<double> grad, BackwardScratch& s) {
  const ModelConfig& cfg = p.cfg;
  const Layout& l = p.layout;
  const std::size_t d = cfg.dense_hidden, h = cfg.gru_hidden;
  double* g = grad.data();

  g[l.head_b] += dy;
  s.d_dense_act.resize(d);
  s.d_dense_pre.resize(d);
  s.d_h.resize(h);
  for (std::size_t i = 0; i < d; ++i) {
    g[l.head_w + i] += dy * cache.dense_act[i];
    s.d_dense_act[i] = dy * p.values[l.head_w + i];
  }
  layers::activate_backward(cfg.activation, cache.dense_pre.data(), cache.dense_act.data(),
                            s.d_dense_act.data(), s.d_dense_pre.data(), d);
  layers::dense_backward(cache.gru.final_state(), h, p.at(l.dense_w), d, s.d_dense_pre.data(),
                         g + l.dense_w, g + l.dense_b, s.d_h.data());

  const auto shapes = block_shapes(cfg);
  const std::size_t nb = shapes.size();
  s.d_out.resize(nb + 1);
  s.d_pre.resize(nb);
  // d_out[b] is the gradient w.r.t. the output of block b (input of b+1);
  // the GRU input is the last block's output, or the raw window when nb = 0.
  auto block_out = [&](std::size_t b) -> const double* {
    if (b == 0) return cache.input;
    const auto& c = cache.blocks[b - 1];
    return cfg.conv_blocks[b - 1].pool == Pool::Max2 ? c.pooled.data() : c.act.data();
  };
  auto& d_gru_in = s.d_out[nb];
  d_gru_in.resize(l.gru_steps * l.gru_in);
  layers::gru_backward(block_out(nb), cache.gru, p.at(l.gru_wx), p.at(l.gru_uh), s.d_h.data(),
                       g + l.gru_wx, g + l.gru_uh, g + l.gru_b, nb > 0 ? d_gru_in.data() : nullptr);

  for (std::size_t b = nb; b-- > 0;) {
    const auto& sh = shapes[b];
    const auto& blk = cfg.conv_blocks[b];
    const auto& c = cache.blocks[b];
    auto& dpre = s.d_pre[b];
    dpre.resize(sh.conv_len * sh.filters);
    const std::vector<double>& dout = s.d_out[b + 1];
    if (blk.pool == Pool::Max2) {
      // Route through the pool into dpre, then apply the activation in place.
      layers::pool_backward(dout.data(), sh.out_len, sh.conv_len, sh.filters, c.argmax.data(),
                            dpre.data());
      layers::activate_backward(cfg.activation, c.pre.data(), c.act.data(), dpre.data(),
                                dpre.data(), dpre.size());
    } else {
      layers::activate_backward(cfg.activation, c.pre.data(), c.act.data(), dout.data(),
                                dpre.data(), dpre.size());
    }
    double* dx = nullptr;
    if (b > 0) {
      s.d_out[b].resize(sh.in_len * sh.in_ch);
      dx = s.d_out[b].data();
    }
    layers::conv_backward(block_out(b), sh.in_len, sh.in_ch, p.at(l.conv[b].w), sh.filters,
                          blk.kernel, blk.stride, dpre.data(), g + l.conv[b].w, g + l.conv[b].b, dx);
  }
}

namespace {

// Shape errors must surface before entering an OpenMP region.
void check_shapes(const ModelParams& p, std::span<const Sample> batch) {
  for (const auto& s : batch)
    if (s.input.rows != p.cfg.window_len || s.input.cols != p.cfg.n_channels)
      throw ValidationError("sample is " + std::to_string(s.input.rows) + "x" +
                            std::to_string(s.input.cols) + ", model expects " +
                            std::to_string(p.cfg.window_len) + "x" +
                            std::to_string(p.cfg.n_channels));
}

[[noreturn]] void throw_non_finite(const ModelParams& p, std::span<const Sample> batch,
                                   double loss) {
  double max_t = 0.0;
  for (const auto& s : batch) max_t = std::max(max_t, std::abs(s.target));
  std::ostringstream os;
  os << "non-finite training loss (" << loss << ") on a batch of " << batch.size()
     << " samples; max |target| = " << max_t
     << "; parameters finite = " << (p.all_finite() ? "yes" : "no");
  throw NumericalError(os.str());
}

}  // namespace

double batch_gradient_serial(const ModelParams& p, std::span<const Sample> batch,
                             std::vector<double>& grad) {
  grad.assign(p.values.size(), 0.0);
  if (batch.empty()) return 0.0;
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  ForwardCache cache;
  BackwardScratch scratch;
  double loss = 0.0;
  for (const auto& smp : batch) {
    const double e = forward(p, smp.input, cache) - smp.target;
    loss += e * e;
    backward(p, cache, 2.0 * e * inv_n, grad, scratch);
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) throw_non_finite(p, batch, loss);
  return loss;
}

double batch_gradient(const ModelParams& p, std::span<const Sample> batch,
                      std::vector<double>& grad, GradWorkspace& ws) {
  const std::size_t n = batch.size();
  const std::size_t np = p.values.size();
  grad.assign(np, 0.0);
  if (n == 0) return 0.0;
  check_shapes(p, batch);
  const std::size_t groups = (n + kGradGroup - 1) / kGradGroup;
  const double inv_n = 1.0 / static_cast<double>(n);
  if (ws.group_grad.size() < groups) ws.group_grad.resize(groups);
  ws.group_loss.assign(groups, 0.0);

#pragma omp parallel
  {
    ForwardCache cache;
    BackwardScratch scratch;
#pragma omp for schedule(static)
    for (std::size_t gi = 0; gi < groups; ++gi) {
      auto& gg = ws.group_grad[gi];
      gg.assign(np, 0.0);
      double loss = 0.0;
      const std::size_t end = std::min(n, (gi + 1) * kGradGroup);
      for (std::size_t i = gi * kGradGroup; i < end; ++i) {
        const double e = forward(p, batch[i].input, cache) - batch[i].target;
        loss += e * e;
        backward(p, cache, 2.0 * e * inv_n, gg, scratch);
      }
      ws.group_loss[gi] = loss;
    }
  }

  double loss = 0.0;
  for (std::size_t gi = 0; gi < groups; ++gi) {
    loss += ws.group_loss[gi];
    const auto& gg = ws.group_grad[gi];
    for (std::size_t j = 0; j < np; ++j) grad[j] += gg[j];
  }
  loss *= inv_n;
  if (!std::isfinite(loss)) throw_non_finite(p, batch, loss);
  return loss;
}

double mean_loss(const ModelParams& p, std::span<const Sample> samples) {
  if (samples.empty()) return 0.0;
  check_shapes(p, samples);
  std::vector<double> sq(samples.size());
#pragma omp parallel
  {
    ForwardCache cache;
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const double e = forward(p, samples[i].input, cache) - samples[i].target;
      sq[i] = e * e;
    }
  }
  double s = 0.0;
  for (double v : sq) s += v;
  return s / static_cast<double>(samples.size());
}

}  // namespace hrvfmri::nn
