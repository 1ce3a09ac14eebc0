// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/nn/train.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "hrvfmri/error.hpp"
#include "hrvfmri/rng.hpp"

namespace hrvfmri::nn {

void TrainHyper::validate() const {
  if (!(adam.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0))
    throw ValidationError("Adam betas must lie in [0, 1)");
  if (!(adam.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
  if (!(adam.weight_decay >= 0.0) || !std::isfinite(adam.weight_decay))
    throw ValidationError("weight_decay must be finite and non-negative");
  if (batch_size == 0) throw ValidationError("batch_size must be positive");
  if (max_epochs == 0) throw ValidationError("max_epochs must be positive");
  if (patience == 0) throw ValidationError("patience must be positive");
  if (!(min_improvement >= 0.0)) throw ValidationError("min_improvement must be non-negative");
}

OptimState OptimState::for_params(const ModelParams& p) {
  OptimState s;
  s.m.assign(p.values.size(), 0.0);
  s.v.assign(p.values.size(), 0.0);
  return s;
}

void adam_step(std::vector<double>& params, std::span<const double> grads, OptimState& st,
               const AdamHyper& h) {
  if (grads.size() != params.size() || st.m.size() != params.size() ||
      st.v.size() != params.size())
    throw ValidationError("adam_step: parameter, gradient and moment sizes differ");
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    st.m[i] = h.beta1 * st.m[i] + (1.0 - h.beta1) * g;
    st.v[i] = h.beta2 * st.v[i] + (1.0 - h.beta2) * g * g;
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    params[i] -= h.learning_rate * (mhat / (std::sqrt(vhat) + h.epsilon) + h.weight_decay * params[i]);
  }
}

TrainResult train(const ModelConfig& cfg, const TrainHyper& hyper,
                  std::span<const Sample> train_samples, std::span<const Sample> val_samples,
                  std::uint64_t seed) {
  hyper.validate();
  if (train_samples.empty()) throw ValidationError("training split is empty");
  if (val_samples.empty()) throw ValidationError("validation split is empty");
  const auto t0 = std::chrono::steady_clock::now();

  ModelParams params = init_params(cfg);
  ModelParams best = params;
  OptimState state = OptimState::for_params(params);
  GradWorkspace ws;
  std::vector<double> grad;
  std::vector<Sample> batch;
  std::vector<std::size_t> order(train_samples.size());

  TrainReport rep;
  rep.seed = seed;
  rep.hyper = hyper;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;

  for (std::size_t epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng(derive_seed(seed, "epoch", epoch));
    shuffle(order, rng);

    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t end = std::min(order.size(), start + hyper.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train_samples[order[i]]);
      const double loss = batch_gradient(params, batch, grad, ws);
      adam_step(params.values, grad, state, hyper.adam);
      loss_sum += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    const double train_loss = loss_sum / static_cast<double>(seen);
    const double val_loss = mean_loss(params, val_samples);
    if (!std::isfinite(val_loss) || !params.all_finite())
      throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                           " (validation loss " + std::to_string(val_loss) + ")");
    rep.train_loss.push_back(train_loss);
    rep.val_loss.push_back(val_loss);
    spdlog::debug("epoch {}: train {:.6g} val {:.6g}", epoch, train_loss, val_loss);

    if (val_loss < best_val - hyper.min_improvement) {
      best_val = val_loss;
      best.values = params.values;
      rep.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= hyper.patience) {
      rep.early_stopped = true;
      break;
    }
  }
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(best), std::move(rep)};
}

std::vector<double> ScanPrediction::dense() const {
  std::vector<double> out(n_frames, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < frames.size(); ++i) out[frames[i]] = values[i];
  return out;
}

ScanPrediction predict_scan(const ModelParams& p, const RoiMatrix& roi,
                            const dataset::WindowSpec& spec, const dataset::Normalizer& norm) {
  spec.validate();
  if (spec.window_len != p.cfg.window_len)
    throw ValidationError("window spec length differs from the model's window_len");
  const Matrix z = dataset::apply_normalizer(norm, roi.values);
  if (z.cols() != p.cfg.n_channels)
    throw ValidationError("scan has " + std::to_string(z.cols()) + " channels, model expects " +
                          std::to_string(p.cfg.n_channels));
  ScanPrediction out;
  out.n_frames = roi.n_frames();
  const std::size_t count = spec.count(out.n_frames);
  out.frames.resize(count);
  out.values.resize(count);
#pragma omp parallel
  {
    ForwardCache cache;
#pragma omp for schedule(static)
    for (std::size_t w = 0; w < count; ++w) {
      const std::size_t s = w * spec.stride;
      out.frames[w] = s + spec.target_offset;
      out.values[w] =
          norm.restore_target(forward(p, MatrixView::rows_of(z, s, spec.window_len), cache));
    }
  }
  return out;
}

std::vector<Sample> window_samples(const Matrix& normalized, const HrvSeries& hrv,
                                   const dataset::WindowSpec& spec,
                                   const dataset::Normalizer& norm) {
  spec.validate();
  if (hrv.values.size() != normalized.rows())
    throw ValidationError("hrv length does not match ROI frames");
  const std::size_t count = spec.count(normalized.rows());
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t s = w * spec.stride;
    out.push_back({MatrixView::rows_of(normalized, s, spec.window_len),
                   norm.standardize_target(hrv.values[s + spec.target_offset])});
  }
  return out;
}

}  // namespace hrvfmri::nn
