// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/nn/config.hpp"

#include "hrvfmri/error.hpp"

namespace hrvfmri::nn {

std::string activation_name(Activation a) { return a == Activation::ReLU ? "relu" : "tanh"; }

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  throw ValidationError("unknown activation: " + s);
}

std::string pool_name(Pool p) { return p == Pool::None ? "none" : "max2"; }

Pool pool_from_name(const std::string& s) {
  if (s == "none") return Pool::None;
  if (s == "max2") return Pool::Max2;
  throw ValidationError("unknown pool: " + s);
}

std::vector<BlockShape> block_shapes(const ModelConfig& cfg) {
  std::vector<BlockShape> out;
  std::size_t len = cfg.window_len, ch = cfg.n_channels;
  for (const auto& b : cfg.conv_blocks) {
    BlockShape s{};
    s.in_len = len;
    s.in_ch = ch;
    s.filters = b.filters;
    s.conv_len = b.stride == 0 || len == 0 ? 0 : (len - 1) / b.stride + 1;
    s.out_len = b.pool == Pool::Max2 ? s.conv_len / 2 : s.conv_len;
    out.push_back(s);
    len = s.out_len;
    ch = b.filters;
  }
  return out;
}

void ModelConfig::validate() const {
  if (n_channels == 0) throw ValidationError("model n_channels must be positive");
  if (window_len == 0) throw ValidationError("model window_len must be positive");
  if (gru_hidden == 0 || dense_hidden == 0)
    throw ValidationError("gru_hidden and dense_hidden must be positive");
  for (std::size_t i = 0; i < conv_blocks.size(); ++i) {
    const auto& b = conv_blocks[i];
    if (b.filters == 0) throw ValidationError("conv block " + std::to_string(i) + ": zero filters");
    if (b.kernel % 2 == 0)
      throw ValidationError("conv block " + std::to_string(i) + ": kernel size must be odd");
    if (b.stride == 0) throw ValidationError("conv block " + std::to_string(i) + ": zero stride");
  }
  const auto shapes = block_shapes(*this);
  const std::size_t t = shapes.empty() ? window_len : shapes.back().out_len;
  if (t < 2)
    throw ValidationError("temporal length after conv/pool is " + std::to_string(t) +
                          "; the GRU needs at least 2 steps");
}

ModelConfig ModelConfig::small(std::size_t n_channels, std::uint64_t seed) {
  ModelConfig c;
  c.n_channels = n_channels;
  c.conv_blocks = {{16, 5, 2, Pool::Max2}, {16, 3, 2, Pool::None}};
  c.gru_hidden = 16;
  c.dense_hidden = 16;
  c.seed = seed;
  return c;
}

Layout make_layout(const ModelConfig& cfg) {
  cfg.validate();
  Layout l;
  std::size_t off = 0;
  for (const auto& s : block_shapes(cfg)) {
    const auto& b = cfg.conv_blocks[l.conv.size()];
    Layout::Conv c{};
    c.w = off;
    off += s.filters * b.kernel * s.in_ch;
    c.b = off;
    off += s.filters;
    l.conv.push_back(c);
  }
  const auto shapes = block_shapes(cfg);
  l.gru_in = shapes.empty() ? cfg.n_channels : shapes.back().filters;
  l.gru_steps = shapes.empty() ? cfg.window_len : shapes.back().out_len;
  const std::size_t h = cfg.gru_hidden, d = cfg.dense_hidden;
  l.gru_wx = off;
  off += 3 * h * l.gru_in;
  l.gru_uh = off;
  off += 3 * h * h;
  l.gru_b = off;
  off += 3 * h;
  l.dense_w = off;
  off += d * h;
  l.dense_b = off;
  off += d;
  l.head_w = off;
  off += d;
  l.head_b = off;
  off += 1;
  l.total = off;
  return l;
}

std::size_t param_count(const ModelConfig& cfg) {
  cfg.validate();
  std::size_t n = 0, in = cfg.n_channels;
  for (const auto& b : cfg.conv_blocks) {
    n += b.filters * (b.kernel * in + 1);
    in = b.filters;
  }
  const std::size_t h = cfg.gru_hidden, d = cfg.dense_hidden;
  return n + 3 * h * (in + h + 1) + d * (h + 1) + d + 1;
}

}  // namespace hrvfmri::nn
