// SPDX-License-Identifier: Apache-2.0
//
// Small 1-D signal utilities shared by the simulator and the PPG pipeline.
#pragma once

#include <vector>

namespace hrvfmri::signal {

/// Linear-interpolated percentile, p in [0, 100].
double percentile(std::vector<double> v, double p);

struct RobustScale {
  double median = 0.0;
  double sigma = 0.0;  // 1.4826 * MAD, mean-absolute fallback when MAD is 0
};
RobustScale robust_scale(const std::vector<double>& v);

/// Deviation of each sample from the median of itself and its two
/// neighbours; an end point uses the linear extrapolation of the next two
/// samples as its missing neighbour.
std::vector<double> local_residual(const std::vector<double>& v);

/// White-noise standard deviation estimated from the robust spread of second
/// differences (var of x[i-1] - 2x[i] + x[i+1] is 6 sigma^2 for white noise).
double noise_sigma(const std::vector<double>& v);

/// Zero-phase first-order low-pass / high-pass (bilinear, forward then backward).
std::vector<double> lowpass(const std::vector<double>& x, double fc, double fs);
std::vector<double> highpass(const std::vector<double>& x, double fc, double fs);

double population_std(const std::vector<double>& v);

}  // namespace hrvfmri::signal
