// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/ppg.hpp"

#include <algorithm>
#include <cmath>

#include "hrvfmri/error.hpp"
#include "hrvfmri/signal.hpp"

namespace hrvfmri::ppg {
namespace {

constexpr double kTimingCutoffHz = 8.0;
constexpr double kEdgeToleranceS = 0.05;
constexpr double kBeatScaleAccept = 0.3;

}  // namespace

namespace detail {

std::vector<double> bandpass_cardiac(const std::vector<double>& x, double fs) {
  return signal::lowpass(signal::highpass(x, 0.5, fs), 3.0, fs);
}

std::optional<double> estimate_period(const std::vector<double>& y, double fs, double min_peak,
                                      double accept) {
  const std::size_t n = y.size();
  const auto min_lag = static_cast<std::size_t>(std::floor(fs * 60.0 / 180.0));
  const auto max_lag = static_cast<std::size_t>(std::ceil(fs * 60.0 / 30.0));
  if (n < 2 * max_lag + 2 || min_lag < 2) return std::nullopt;
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  double energy = 0.0;
  for (double v : y) energy += (v - mean) * (v - mean);
  if (!(energy > 0.0)) return std::nullopt;

  std::vector<double> r(max_lag + 2, 0.0);
  for (std::size_t lag = min_lag - 1; lag <= max_lag + 1; ++lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (y[i] - mean) * (y[i + lag] - mean);
    r[lag] = s / energy;
  }
  auto is_peak = [&](std::size_t lag) { return r[lag] > r[lag - 1] && r[lag] >= r[lag + 1]; };
  double best = -1.0;
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag)
    if (is_peak(lag)) best = std::max(best, r[lag]);
  if (best < min_peak) return std::nullopt;
  // Shortest lag whose local maximum is close to the best one, so a multiple
  // of the period is never chosen.
  for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
    if (is_peak(lag) && r[lag] >= accept * best) {
      const double denom = r[lag - 1] - 2.0 * r[lag] + r[lag + 1];
      const double delta = denom < 0.0 ? 0.5 * (r[lag - 1] - r[lag + 1]) / denom : 0.0;
      return static_cast<double>(lag) + delta;
    }
  }
  return std::nullopt;
}

std::vector<char> spike_mask(const std::vector<double>& v, double spike_z) {
  std::vector<char> mask(v.size(), 0);
  const auto resid = signal::local_residual(v);
  const double sigma = signal::noise_sigma(v);
  if (!(sigma > 0.0)) return mask;
  for (std::size_t i = 0; i < v.size(); ++i) mask[i] = std::abs(resid[i]) / sigma >= spike_z;
  return mask;
}

double template_train_amplitude(double period_s) {
  constexpr int kSamples = 1000;
  std::vector<double> cycle(kSamples);
  const double support = sim::kPulseRiseS + sim::kPulseDecayS;
  const int reach = static_cast<int>(std::ceil(support / period_s)) + 1;
  for (int i = 0; i < kSamples; ++i) {
    const double tau = period_s * i / kSamples;
    double s = 0.0;
    for (int k = -reach; k <= reach; ++k) s += sim::pulse_template(tau + k * period_s);
    cycle[i] = s;
  }
  return signal::percentile(cycle, 95.0) - signal::percentile(cycle, 5.0);
}

}  // namespace detail

void QcThresholds::validate() const {
  auto frac = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0))
      throw ValidationError(std::string("QC threshold ") + name + " must lie in (0, 1)");
  };
  if (!(spike_z > 0.0)) throw ValidationError("spike_z must be positive");
  frac(max_correctable_spike_fraction, "max_correctable_spike_fraction");
  frac(clip_fraction, "clip_fraction");
  frac(gap_fraction, "gap_fraction");
  frac(min_amplitude_ratio, "min_amplitude_ratio");
  frac(zero_fraction_for_norec, "zero_fraction_for_norec");
  if (!(min_gap_s > 0.0) || !(reference_pulse_amplitude > 0.0))
    throw ValidationError("min_gap_s and reference_pulse_amplitude must be positive");
}

QualityClass classify_quality(const PpgSignal& ppg, const QcThresholds& th) {
  if (!(ppg.sample_rate_hz > 0.0)) throw ValidationError("PPG sample rate must be positive");
  QualityClass out;
  const auto& v = ppg.values;
  const std::size_t n = v.size();
  if (n == 0) {
    out.value = QualityLabel::NoRecording;
    out.diagnostics = {{"spike_fraction", 1.0}, {"clip_fraction", 1.0},
                       {"gap_fraction", 1.0},   {"constant_fraction", 1.0},
                       {"amplitude_ratio", 1.0}};
    return out;
  }
  const double nd = static_cast<double>(n);

  // Constant runs; only those lasting min_gap_s count as gaps.
  const auto min_run = std::max<std::size_t>(
      2, static_cast<std::size_t>(th.min_gap_s * ppg.sample_rate_hz));
  std::size_t zeros = 0, longest = 0, long_cover = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && v[j] == v[i]) ++j;
    const std::size_t len = j - i;
    if (len >= min_run) {
      long_cover += len;
      longest = std::max(longest, len);
    }
    i = j;
  }
  for (double x : v) zeros += x == 0.0;
  const double constant_fraction = static_cast<double>(std::max(zeros, long_cover)) / nd;
  const double gap_fraction = static_cast<double>(long_cover) / nd;

  // Saturation plateaus at either extreme.
  const auto [mn_it, mx_it] = std::minmax_element(v.begin(), v.end());
  const double range = *mx_it - *mn_it;
  std::size_t clipped = 0;
  if (range > 0.0) {
    const double tol = 1e-3 * range;
    std::size_t top = 0, bottom = 0;
    for (double x : v) {
      top += x >= *mx_it - tol;
      bottom += x <= *mn_it + tol;
    }
    clipped = std::max(top, bottom);
  }
  const double clip_fraction = static_cast<double>(clipped) / nd;

  // Amplitude relative to the pulse train expected at the estimated rate.
  const double robust_amp = signal::percentile(v, 95.0) - signal::percentile(v, 5.0);
  double expected;
  const auto period =
      detail::estimate_period(detail::bandpass_cardiac(v, ppg.sample_rate_hz), ppg.sample_rate_hz);
  if (period) {
    expected = th.reference_pulse_amplitude *
               detail::template_train_amplitude(*period / ppg.sample_rate_hz);
  } else {
    expected = th.corpus_robust_amplitude.value_or(
        th.reference_pulse_amplitude * detail::template_train_amplitude(0.8));
  }
  const double amplitude_ratio = expected > 0.0 ? robust_amp / expected : 0.0;

  const auto mask = detail::spike_mask(v, th.spike_z);
  std::size_t spikes = 0;
  for (char m : mask) spikes += m;
  const double spike_fraction = static_cast<double>(spikes) / nd;

  out.diagnostics = {{"spike_fraction", spike_fraction},
                     {"clip_fraction", clip_fraction},
                     {"gap_fraction", gap_fraction},
                     {"constant_fraction", constant_fraction},
                     {"amplitude_ratio", amplitude_ratio}};

  if (constant_fraction >= th.zero_fraction_for_norec || range == 0.0)
    out.value = QualityLabel::NoRecording;
  else if (static_cast<double>(longest) > th.gap_fraction * nd || gap_fraction >= th.gap_fraction)
    out.value = QualityLabel::Gaps;
  else if (clip_fraction >= th.clip_fraction)
    out.value = QualityLabel::Clipping;
  else if (amplitude_ratio < th.min_amplitude_ratio)
    out.value = QualityLabel::LowAmplitude;
  else if (spikes == 0)
    out.value = QualityLabel::Clean;
  else if (spike_fraction <= th.max_correctable_spike_fraction)
    out.value = QualityLabel::CorrectableSpikes;
  else
    out.value = QualityLabel::UncorrectableSpikes;
  return out;
}

PpgSignal correct_spikes(const PpgSignal& ppg, const QcThresholds& th) {
  PpgSignal out = ppg;
  const auto& v = ppg.values;
  const std::size_t n = v.size();
  // No dilation: widening the span lets the line cut across pulse curvature.
  const auto mask = detail::spike_mask(v, th.spike_z);
  if (std::find(mask.begin(), mask.end(), 1) == mask.end()) return out;

  for (std::size_t i = 0; i < n;) {
    if (!mask[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && mask[j]) ++j;
    // Flagged run [i, j).
    const bool has_left = i > 0;
    const bool has_right = j < n;
    if (!has_left && !has_right) break;  // nothing to anchor on
    for (std::size_t k = i; k < j; ++k) {
      if (!has_left) {
        out.values[k] = v[j];
      } else if (!has_right) {
        out.values[k] = v[i - 1];
      } else {
        const double a = v[i - 1], b = v[j];
        const double frac = static_cast<double>(k - (i - 1)) / static_cast<double>(j - (i - 1));
        out.values[k] = a + frac * (b - a);
      }
    }
    i = j;
  }
  return out;
}

sim::BeatTimes detect_peaks(const PpgSignal& ppg) {
  const double fs = ppg.sample_rate_hz;
  if (!(fs > 0.0)) throw ValidationError("PPG sample rate must be positive");
  const auto& raw = ppg.values;
  const std::size_t n = raw.size();
  if (n < 3) throw DataError("no cardiac rhythm");

  const auto core_filtered = detail::bandpass_cardiac(raw, fs);
  // Alternating intervals put the strongest autocorrelation at the pair
  // length; the beat scale is the shortest clearly periodic lag.
  const auto period = detail::estimate_period(core_filtered, fs, 0.2, kBeatScaleAccept);
  if (!period) throw DataError("no cardiac rhythm");

  // Extend both ends by whole estimated periods copied from the recording, so
  // pulses at the edges appear as interior maxima of a plausible continuation.
  const auto period_samples =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(*period)));
  std::size_t pad = period_samples *
                    static_cast<std::size_t>(std::ceil(fs / static_cast<double>(period_samples)));
  while (pad >= n && pad > period_samples) pad -= period_samples;
  if (pad >= n) pad = 0;
  std::vector<double> padded;
  padded.reserve(n + 2 * pad);
  padded.insert(padded.end(), raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(pad));
  padded.insert(padded.end(), raw.begin(), raw.end());
  padded.insert(padded.end(), raw.end() - static_cast<std::ptrdiff_t>(pad), raw.end());

  const auto filtered = detail::bandpass_cardiac(padded, fs);
  const double amp =
      signal::percentile(core_filtered, 95.0) - signal::percentile(core_filtered, 5.0);
  const double min_prominence = 0.3 * amp;
  const std::size_t m = filtered.size();
  const auto reach = static_cast<long>(std::max(1.0, std::round(0.15 * *period)));

  struct Candidate {
    std::size_t index;
    double height;
    bool in_range;
  };
  std::vector<Candidate> cand;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    if (!(filtered[i] > filtered[i - 1] && filtered[i] >= filtered[i + 1])) continue;
    // Prominence: height above the higher of the two flanking minima, each
    // taken up to the nearest strictly higher sample.
    double left_min = filtered[i];
    std::size_t j = i;
    while (j > 0 && filtered[j - 1] <= filtered[i]) left_min = std::min(left_min, filtered[--j]);
    double right_min = filtered[i];
    j = i;
    while (j + 1 < m && filtered[j + 1] <= filtered[i]) right_min = std::min(right_min, filtered[++j]);
    if (filtered[i] - std::max(left_min, right_min) < min_prominence) continue;
    const long rel = static_cast<long>(i) - static_cast<long>(pad);
    cand.push_back({i, filtered[i], rel >= -reach && rel <= static_cast<long>(n) - 1 + reach});
  }

  // Minimum separation: tallest first, ties to the earlier index.
  std::vector<std::size_t> order(cand.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cand[a].height != cand[b].height) return cand[a].height > cand[b].height;
    return cand[a].index < cand[b].index;
  });
  const double min_sep = 0.6 * *period;
  std::vector<char> removed(cand.size(), 0);
  std::vector<std::size_t> kept;
  for (std::size_t oi : order) {
    if (removed[oi]) continue;
    kept.push_back(oi);
    for (std::size_t k = 0; k < cand.size(); ++k)
      if (!removed[k] && k != oi &&
          std::abs(static_cast<double>(cand[k].index) - static_cast<double>(cand[oi].index)) < min_sep)
        removed[k] = 1;
  }

  // Beat timing: the half-amplitude crossing of each upstroke on a lightly
  // smoothed copy is sharp and low-jitter, while the maximum of a flat-topped
  // pulse is not. Crossings are moved onto the peaks by the recording's
  // median upstroke-to-peak offset.
  const auto timing = signal::lowpass(padded, kTimingCutoffHz, fs);
  const auto foot_reach = static_cast<long>(std::max(2.0, std::round(0.5 * *period)));
  auto parabolic = [](const std::vector<double>& y, std::size_t b) {
    if (b == 0 || b + 1 >= y.size()) return 0.0;
    const double denom = y[b - 1] - 2.0 * y[b] + y[b + 1];
    return denom < 0.0 ? std::clamp(0.5 * (y[b - 1] - y[b + 1]) / denom, -0.5, 0.5) : 0.0;
  };
  struct Fiducial {
    double crossing;
    double peak;
  };
  std::vector<Fiducial> fiducials;
  std::vector<double> offsets;
  for (std::size_t oi : kept) {
    if (!cand[oi].in_range) continue;
    const long c = static_cast<long>(cand[oi].index);
    long top = c;
    for (long i = std::max(1L, c - reach); i <= std::min(static_cast<long>(m) - 2, c + reach); ++i)
      if (timing[static_cast<std::size_t>(i)] > timing[static_cast<std::size_t>(top)]) top = i;
    long foot = top;
    for (long i = top; i >= std::max(0L, top - foot_reach); --i)
      if (timing[static_cast<std::size_t>(i)] < timing[static_cast<std::size_t>(foot)]) foot = i;
    double cross = static_cast<double>(top);
    if (foot < top) {
      const double half = 0.5 * (timing[static_cast<std::size_t>(top)] +
                                 timing[static_cast<std::size_t>(foot)]);
      for (long j = top - 1; j >= foot; --j) {
        const double lo = timing[static_cast<std::size_t>(j)];
        const double hi = timing[static_cast<std::size_t>(j + 1)];
        if (lo <= half && half < hi) {
          cross = static_cast<double>(j) + (half - lo) / (hi - lo);
          break;
        }
      }
    }
    // Peak of the unsmoothed waveform near the smoothed maximum.
    long raw_top = top;
    for (long i = std::max(1L, top - reach); i <= std::min(static_cast<long>(m) - 2, top + reach); ++i)
      if (padded[static_cast<std::size_t>(i)] > padded[static_cast<std::size_t>(raw_top)]) raw_top = i;
    const double peak = static_cast<double>(raw_top) + parabolic(padded, static_cast<std::size_t>(raw_top));
    fiducials.push_back({cross, peak});
    offsets.push_back(peak - cross);
  }
  const double offset = offsets.empty() ? 0.0 : signal::percentile(offsets, 50.0);
  const double t_end = static_cast<double>(n - 1) / fs;
  std::vector<double> times;
  for (const auto& f : fiducials) {
    // An upstroke that starts before the recording lies in the synthetic
    // extension; fall back to the waveform peak there.
    const double at = f.crossing < static_cast<double>(pad) ? f.peak : f.crossing + offset;
    const double t = (at - static_cast<double>(pad)) / fs;
    if (t < -kEdgeToleranceS || t > t_end + kEdgeToleranceS) continue;
    times.push_back(std::clamp(t, 0.0, t_end));
  }
  std::sort(times.begin(), times.end());
  sim::BeatTimes out;
  for (double t : times)
    if (out.times_s.empty() || t > out.times_s.back()) out.times_s.push_back(t);
  return out;
}

HrvSeries extract_hrv(const PpgSignal& ppg, double tr_seconds, std::size_t n_frames,
                      double window_s) {
  return sim::hrv_from_beats(detect_peaks(ppg), tr_seconds, n_frames, window_s);
}

}  // namespace hrvfmri::ppg
