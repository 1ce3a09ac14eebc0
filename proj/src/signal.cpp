// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hrvfmri::signal {

double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

RobustScale robust_scale(const std::vector<double>& v) {
  RobustScale rs;
  if (v.empty()) return rs;
  std::vector<double> w = v;
  auto mid = w.begin() + static_cast<std::ptrdiff_t>(w.size() / 2);
  std::nth_element(w.begin(), mid, w.end());
  rs.median = *mid;
  for (auto& x : w) x = std::abs(x - rs.median);
  std::nth_element(w.begin(), mid, w.end());
  rs.sigma = 1.4826 * *mid;
  if (rs.sigma <= 0.0) {
    double mad = 0.0;
    for (double x : v) mad += std::abs(x - rs.median);
    rs.sigma = 1.2533 * mad / static_cast<double>(v.size());
  }
  return rs;
}

std::vector<double> local_residual(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<double> r(n, 0.0);
  auto median3 = [](double a, double b, double c) {
    return std::max(std::min(a, b), std::min(std::max(a, b), c));
  };
  for (std::size_t i = 1; i + 1 < n; ++i) r[i] = v[i] - median3(v[i - 1], v[i], v[i + 1]);
  // Ends: the missing neighbour is the linear extrapolation of the next two.
  if (n >= 3) {
    r[0] = v[0] - median3(2.0 * v[1] - v[2], v[0], v[1]);
    r[n - 1] = v[n - 1] - median3(v[n - 2], v[n - 1], 2.0 * v[n - 2] - v[n - 3]);
  }
  return r;
}

double noise_sigma(const std::vector<double>& v) {
  if (v.size() < 3) return 0.0;
  std::vector<double> d2(v.size() - 2);
  for (std::size_t i = 1; i + 1 < v.size(); ++i) d2[i - 1] = v[i - 1] - 2.0 * v[i] + v[i + 1];
  const auto rs = robust_scale(d2);
  return rs.sigma / std::sqrt(6.0);
}

namespace {

enum class Pass { LowPass, HighPass };

std::vector<double> first_order(std::vector<double> x, double fc, double fs, Pass kind) {
  if (x.empty()) return x;
  const double k = std::tan(std::numbers::pi * fc / fs);
  const double a1 = (k - 1.0) / (k + 1.0);
  const double b0 = kind == Pass::LowPass ? k / (1.0 + k) : 1.0 / (1.0 + k);
  const double b1 = kind == Pass::LowPass ? b0 : -b0;
  auto run = [&](auto begin, auto end) {
    double x_prev = *begin;
    double y_prev = kind == Pass::LowPass ? *begin : 0.0;  // steady state for a constant input
    for (auto it = begin; it != end; ++it) {
      const double xi = *it;
      const double yi = b0 * xi + b1 * x_prev - a1 * y_prev;
      x_prev = xi;
      y_prev = yi;
      *it = yi;
    }
  };
  run(x.begin(), x.end());
  run(x.rbegin(), x.rend());
  return x;
}

}  // namespace

std::vector<double> lowpass(const std::vector<double>& x, double fc, double fs) {
  return first_order(x, fc, fs, Pass::LowPass);
}

std::vector<double> highpass(const std::vector<double>& x, double fc, double fs) {
  return first_order(x, fc, fs, Pass::HighPass);
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace hrvfmri::signal
