// SPDX-License-Identifier: Apache-2.0
// Serial reference versus OpenMP batch gradient and scan inference.
#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "hrvfmri/dataset.hpp"
#include "hrvfmri/nn/model.hpp"
#include "hrvfmri/nn/train.hpp"
#include "hrvfmri/rng.hpp"

using namespace hrvfmri;

namespace {

struct Fixture {
  nn::ModelParams params;
  Matrix data;
  std::vector<nn::Sample> batch;

  Fixture(std::size_t channels, bool small, std::size_t batch_size) {
    auto cfg = small ? nn::ModelConfig::small(channels, 3) : nn::ModelConfig{};
    cfg.n_channels = channels;
    params = nn::init_params(cfg);
    const std::size_t frames = cfg.window_len + batch_size;
    data = Matrix(frames, channels);
    CounterRng rng(11);
    for (std::size_t i = 0; i < frames * channels; ++i) data.data()[i] = rng.normal();
    for (std::size_t s = 0; s < batch_size; ++s)
      batch.push_back({MatrixView::rows_of(data, s, cfg.window_len), rng.normal()});
  }
};

// Arguments: channels, small preset (0/1).
void BM_GradientSerial(benchmark::State& state) {
  Fixture fx(static_cast<std::size_t>(state.range(0)), state.range(1) != 0, 64);
  std::vector<double> grad;
  for (auto _ : state) benchmark::DoNotOptimize(nn::batch_gradient_serial(fx.params, fx.batch, grad));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(fx.batch.size()));
}

// Arguments: channels, small preset (0/1), threads.
void BM_GradientParallel(benchmark::State& state) {
  Fixture fx(static_cast<std::size_t>(state.range(0)), state.range(1) != 0, 64);
  omp_set_num_threads(static_cast<int>(state.range(2)));
  std::vector<double> grad;
  nn::GradWorkspace ws;
  for (auto _ : state) benchmark::DoNotOptimize(nn::batch_gradient(fx.params, fx.batch, grad, ws));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(fx.batch.size()));
}

void BM_PredictScan(benchmark::State& state) {
  const auto channels = static_cast<std::size_t>(state.range(0));
  omp_set_num_threads(static_cast<int>(state.range(1)));
  auto cfg = nn::ModelConfig::small(channels, 5);
  const auto params = nn::init_params(cfg);
  RoiMatrix roi;
  roi.values = Matrix(400, channels);
  CounterRng rng(13);
  for (std::size_t i = 0; i < roi.values.rows() * channels; ++i) roi.values.data()[i] = rng.normal();
  for (std::size_t c = 0; c < channels; ++c)
    roi.channels.push_back({"ch" + std::to_string(c), RoiGroup::Cortical});
  const auto norm = dataset::Normalizer::identity(channels);
  for (auto _ : state)
    benchmark::DoNotOptimize(nn::predict_scan(params, roi, dataset::WindowSpec{}, norm));
}

const int kMaxThreads = omp_get_num_procs();

void thread_args(benchmark::internal::Benchmark* b) {
  for (long small : {1, 0})
    for (int t = 1; t <= kMaxThreads; t *= 2) b->Args({64, small, t});
}

void predict_args(benchmark::internal::Benchmark* b) {
  b->Args({64, 1});
  if (kMaxThreads > 1) b->Args({64, kMaxThreads});
}

}  // namespace

BENCHMARK(BM_GradientSerial)->Args({64, 1})->Args({64, 0})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientParallel)->Apply(thread_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PredictScan)->Apply(predict_args)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
