// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hrvfmri/matrix.hpp"
#include "hrvfmri/nn/config.hpp"
#include "hrvfmri/nn/layers.hpp"

namespace hrvfmri::nn {

/// Flat parameter vector plus the layout that names its tensors.
struct ModelParams {
  ModelConfig cfg;
  Layout layout;
  std::vector<double> values;

  double* at(std::size_t offset) { return values.data() + offset; }
  const double* at(std::size_t offset) const { return values.data() + offset; }
  bool all_finite() const;
};

/// Weights uniform in +-sqrt(1/fan_in), biases zero; deterministic in cfg.seed.
ModelParams init_params(const ModelConfig& cfg);
/// Same shapes, every value zero.
ModelParams zero_params(const ModelConfig& cfg);

/// One supervised example: a [window_len x n_channels] view and its target.
struct Sample {
  MatrixView input;
  double target = 0.0;
};

/// Activations of one forward pass, reused across samples to avoid allocation.
struct ForwardCache {
  struct Block {
    std::vector<double> pre, act, pooled;
    std::vector<std::uint32_t> argmax;
    const std::vector<double>& out(bool pooled_block) const { return pooled_block ? pooled : act; }
  };
  const double* input = nullptr;
  std::vector<Block> blocks;
  layers::GruCache gru;
  std::vector<double> dense_pre, dense_act;
  double output = 0.0;
};

double forward(const ModelParams& p, MatrixView input, ForwardCache& cache);
double predict(const ModelParams& p, MatrixView input);

/// Backward scratch buffers.
struct BackwardScratch {
  std::vector<double> d_dense_act, d_dense_pre, d_h;
  std::vector<std::vector<double>> d_out, d_pre;
};

/// Adds dL/dparams into `grad` for a scalar output gradient `dy`.
void backward(const ModelParams& p, const ForwardCache& cache, double dy,
              std::span<double> grad, BackwardScratch& scratch);

/// Mean-squared-error loss and its gradient, one sample at a time in order.
/// This is the reference the parallel kernel is checked against.
double batch_gradient_serial(const ModelParams& p, std::span<const Sample> batch,
                             std::vector<double>& grad);

/// Samples per reduction group in the parallel kernel. Fixed so the summation
/// tree, and hence every bit of the result, is independent of thread count.
inline constexpr std::size_t kGradGroup = 8;

/// Reusable per-group buffers for batch_gradient.
struct GradWorkspace {
  std::vector<std::vector<double>> group_grad;
  std::vector<double> group_loss;
};

/// Parallel batch gradient: groups of kGradGroup consecutive samples are
/// summed serially inside each group (OpenMP across groups), then the group
/// sums are added in group order. Throws NumericalError on a non-finite loss.
double batch_gradient(const ModelParams& p, std::span<const Sample> batch,
                      std::vector<double>& grad, GradWorkspace& ws);

/// Mean squared error over samples without gradients (parallel, fixed-order sum).
double mean_loss(const ModelParams& p, std::span<const Sample> samples);

}  // namespace hrvfmri::nn
