// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace hrvfmri::nn {

enum class Activation { ReLU, Tanh };
enum class Pool { None, Max2 };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& s);
std::string pool_name(Pool p);
Pool pool_from_name(const std::string& s);

struct ConvBlock {
  std::size_t filters = 0;
  std::size_t kernel = 3;  // odd
  std::size_t stride = 1;
  Pool pool = Pool::None;
  friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

struct ModelConfig {
  std::size_t n_channels = 0;
  std::size_t window_len = 65;
  std::vector<ConvBlock> conv_blocks = {{64, 5, 1, Pool::Max2}, {32, 3, 1, Pool::None}};
  std::size_t gru_hidden = 64;
  std::size_t dense_hidden = 32;
  Activation activation = Activation::ReLU;
  std::uint64_t seed = 0;

  /// Throws ValidationError for even kernels, zero sizes, or a temporal
  /// length below 2 at the GRU input.
  void validate() const;

  /// Reduced-width preset used for desk-scale cross-validation runs.
  static ModelConfig small(std::size_t n_channels, std::uint64_t seed = 0);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Temporal shape of one conv block: same-padded conv of length ceil(in/stride),
/// then an optional floor(/2) max pool.
struct BlockShape {
  std::size_t in_len, in_ch, conv_len, out_len, filters;
};

std::vector<BlockShape> block_shapes(const ModelConfig& cfg);

/// Offsets of every tensor inside the flat parameter vector.
///   conv block b: weight [filters][kernel][in_ch], bias [filters]
///   gru: input weights [3H][I], recurrent weights [3H][H], bias [3H]
///        (gate row order: update, reset, candidate)
///   dense: weight [D][H], bias [D]; head: weight [D], bias [1]
struct Layout {
  struct Conv {
    std::size_t w, b;
  };
  std::vector<Conv> conv;
  std::size_t gru_wx = 0, gru_uh = 0, gru_b = 0;
  std::size_t dense_w = 0, dense_b = 0;
  std::size_t head_w = 0, head_b = 0;
  std::size_t gru_in = 0;
  std::size_t gru_steps = 0;
  std::size_t total = 0;
};

Layout make_layout(const ModelConfig& cfg);

/// Closed-form parameter count.
std::size_t param_count(const ModelConfig& cfg);

}  // namespace hrvfmri::nn
