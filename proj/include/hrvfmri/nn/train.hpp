// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hrvfmri/core_io.hpp"
#include "hrvfmri/dataset.hpp"
#include "hrvfmri/nn/model.hpp"

namespace hrvfmri::nn {

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled decay: each step also shrinks params by learning_rate * weight_decay.
  double weight_decay = 0.0;
  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

struct TrainHyper {
  AdamHyper adam;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double min_improvement = 1e-5;
  void validate() const;
  friend bool operator==(const TrainHyper&, const TrainHyper&) = default;
};

struct OptimState {
  std::vector<double> m, v;
  std::uint64_t step = 0;
  static OptimState for_params(const ModelParams& p);
};

/// Adam with bias correction; increments state.step.
void adam_step(std::vector<double>& params, std::span<const double> grads, OptimState& state,
               const AdamHyper& hyper);

struct TrainReport {
  std::vector<double> train_loss;  // mean mini-batch loss per epoch
  std::vector<double> val_loss;    // full validation loss per epoch
  std::size_t best_epoch = 0;      // zero-based
  bool early_stopped = false;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;
  TrainHyper hyper;
};

struct TrainResult {
  ModelParams params;  // best-validation parameters
  TrainReport report;
};

/// Mini-batch training with seed-driven shuffling and early stopping on the
/// validation loss. Throws NumericalError if a loss becomes non-finite.
TrainResult train(const ModelConfig& cfg, const TrainHyper& hyper,
                  std::span<const Sample> train_samples, std::span<const Sample> val_samples,
                  std::uint64_t seed);

/// Model predictions for one scan, in seconds.
struct ScanPrediction {
  std::size_t n_frames = 0;
  std::vector<std::size_t> frames;  // target frame of each window, increasing
  std::vector<double> values;
  /// Full-length series with NaN where no window predicts the frame.
  std::vector<double> dense() const;
};

ScanPrediction predict_scan(const ModelParams& p, const RoiMatrix& roi,
                            const dataset::WindowSpec& spec, const dataset::Normalizer& norm);

/// Window views into an already-normalized scan matrix (no copies). Targets are
/// standardized with the normalizer. `matrix` must outlive the samples.
std::vector<Sample> window_samples(const Matrix& normalized, const HrvSeries& hrv,
                                   const dataset::WindowSpec& spec,
                                   const dataset::Normalizer& norm);

}  // namespace hrvfmri::nn
