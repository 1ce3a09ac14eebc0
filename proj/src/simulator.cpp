// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hrvfmri/error.hpp"
#include "hrvfmri/rng.hpp"
#include "hrvfmri/signal.hpp"

namespace hrvfmri::sim {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double population_std(const double* v, std::size_t n) {
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += v[i];
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) ss += (v[i] - mean) * (v[i] - mean);
  return std::sqrt(ss / static_cast<double>(n));
}

}  // namespace

BoldSimConfig BoldSimConfig::with_defaults(RoiConfig roi) {
  BoldSimConfig cfg;
  cfg.roi_config = std::move(roi);
  cfg.coupling_gain_by_group = {{RoiGroup::Cortical, 1.0},
                                {RoiGroup::Subcortical, 1.0},
                                {RoiGroup::WhiteMatter, 1.0},
                                {RoiGroup::Structural, 1.0}};
  cfg.coupling_lag_s_by_group = {{RoiGroup::Cortical, 3.0},
                                 {RoiGroup::Subcortical, 3.0},
                                 {RoiGroup::WhiteMatter, 7.0},
                                 {RoiGroup::Structural, 4.0}};
  return cfg;
}

std::string defect_name(DefectKind k) {
  switch (k) {
    case DefectKind::None: return "None";
    case DefectKind::CorrectableSpikes: return "CorrectableSpikes";
    case DefectKind::UncorrectableSpikes: return "UncorrectableSpikes";
    case DefectKind::Clipping: return "Clipping";
    case DefectKind::Gaps: return "Gaps";
    case DefectKind::LowAmplitude: return "LowAmplitude";
    case DefectKind::NoRecording: return "NoRecording";
  }
  return "?";
}

DefectKind defect_from_name(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(DefectKind::NoRecording); ++i) {
    auto k = static_cast<DefectKind>(i);
    if (defect_name(k) == name) return k;
  }
  throw ValidationError("unknown defect kind '" + name + "'");
}

double pulse_template(double tau) {
  if (tau <= -kPulseRiseS || tau >= kPulseDecayS) return 0.0;
  if (tau <= 0.0) return 0.5 * (1.0 + std::cos(std::numbers::pi * tau / kPulseRiseS));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * tau / kPulseDecayS));
}

std::vector<double> cardiac_kernel(double tr_seconds) {
  if (!(tr_seconds > 0.0)) throw ValidationError("kernel TR must be positive");
  // Gamma-shaped lobes normalized to unit height at their peaks.
  auto lobe = [](double t, double peak) {
    if (t <= 0.0) return 0.0;
    return std::pow(t / peak, peak) * std::exp(peak - t);
  };
  constexpr double kSupportS = 42.0;
  std::vector<double> k;
  for (std::size_t i = 0;; ++i) {
    const double t = static_cast<double>(i) * tr_seconds;
    if (t > kSupportS + 1e-9) break;
    k.push_back(lobe(t, 4.0) - lobe(t, 12.0) / 6.0);
  }
  double energy = 0.0;
  for (double v : k) energy += v * v;
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& v : k) v *= scale;
  return k;
}

BeatTimes gen_beat_times(const CardiacSimConfig& cfg) {
  BeatTimes out;
  if (cfg.duration_frames == 0) return out;
  if (!(cfg.tr_seconds > 0.0)) throw ValidationError("tr_seconds must be positive");
  if (cfg.mean_hr_bpm < 50.0 || cfg.mean_hr_bpm > 150.0)
    throw ValidationError("mean_hr_bpm must lie in [50, 150]");
  if (cfg.hr_modulation_depth < 0.0 || !(cfg.hr_modulation_timescale_s > 0.0))
    throw ValidationError("invalid heart-rate modulation parameters");

  CounterRng rng(cfg.seed, 0);
  constexpr double kPeriodFactors[3] = {0.6, 1.0, 1.7};
  double omega[3], phase[3];
  for (int j = 0; j < 3; ++j) {
    const double period = cfg.hr_modulation_timescale_s * kPeriodFactors[j] * rng.uniform(0.85, 1.15);
    omega[j] = kTwoPi / period;
    phase[j] = rng.uniform(0.0, kTwoPi);
  }
  // Three equal sinusoids; total modulation variance depth^2 / 2.
  const double amp = cfg.hr_modulation_depth / std::sqrt(3.0);
  auto rate = [&](double t, double jitter) {
    double hr = cfg.mean_hr_bpm + jitter;
    for (int j = 0; j < 3; ++j) hr += amp * std::sin(omega[j] * t + phase[j]);
    return std::clamp(hr, kMinHrBpm, kMaxHrBpm);
  };

  CounterRng jitter_rng(cfg.seed, 1);
  const double duration = cfg.duration_s();
  double t = 0.0;
  while (t <= duration) {
    out.times_s.push_back(t);
    const double jitter = cfg.hr_jitter_bpm > 0.0 ? cfg.hr_jitter_bpm * jitter_rng.normal() : 0.0;
    // Fire when the integrated rate reaches one beat; midpoint quadrature,
    // refined twice.
    double ibi = 60.0 / rate(t, jitter);
    for (int it = 0; it < 2; ++it) ibi = 60.0 / rate(t + 0.5 * ibi, jitter);
    t += ibi;
  }
  return out;
}

HrvSeries hrv_from_beats(const BeatTimes& beats, double tr_seconds, std::size_t n_frames,
                         double window_s) {
  if (!(window_s > 0.0)) throw ValidationError("HRV window must be positive");
  if (!(tr_seconds > 0.0)) throw ValidationError("tr_seconds must be positive");
  if (n_frames == 0) throw ValidationError("n_frames must be at least 1");
  const auto& t = beats.times_s;
  if (t.size() < 3) throw DataError("insufficient beats");

  const std::size_t n_ibi = t.size() - 1;
  std::vector<double> ibi(n_ibi), mid(n_ibi);
  for (std::size_t i = 0; i < n_ibi; ++i) {
    ibi[i] = t[i + 1] - t[i];
    mid[i] = 0.5 * (t[i + 1] + t[i]);
  }

  std::vector<double> value(n_frames, 0.0);
  std::vector<char> ok(n_frames, 0);
  std::size_t lo = 0, hi = 0;  // [lo, hi) covered intervals; midpoints are increasing
  const double half = 0.5 * window_s;
  for (std::size_t k = 0; k < n_frames; ++k) {
    const double c = static_cast<double>(k) * tr_seconds;
    while (lo < n_ibi && mid[lo] < c - half) ++lo;
    if (hi < lo) hi = lo;
    while (hi < n_ibi && mid[hi] <= c + half) ++hi;
    if (hi - lo >= 2) {
      value[k] = population_std(ibi.data() + lo, hi - lo);
      ok[k] = 1;
    }
  }

  // Fill uncomputable frames from the nearest computable one.
  std::vector<long> prev(n_frames, -1), next(n_frames, -1);
  long last = -1;
  for (std::size_t k = 0; k < n_frames; ++k) {
    if (ok[k]) last = static_cast<long>(k);
    prev[k] = last;
  }
  last = -1;
  for (std::size_t k = n_frames; k-- > 0;) {
    if (ok[k]) last = static_cast<long>(k);
    next[k] = last;
  }
  if (prev[n_frames - 1] < 0) throw DataError("insufficient beats");
  for (std::size_t k = 0; k < n_frames; ++k) {
    if (ok[k]) continue;
    const long kk = static_cast<long>(k);
    long src;
    if (prev[k] < 0) src = next[k];
    else if (next[k] < 0) src = prev[k];
    else src = (kk - prev[k] <= next[k] - kk) ? prev[k] : next[k];
    value[k] = value[static_cast<std::size_t>(src)];
  }
  return HrvSeries{std::move(value)};
}

void apply_defect(std::vector<double>& v, double sample_rate_hz, const DefectSpec& d,
                  std::uint64_t seed) {
  (void)sample_rate_hz;
  const std::size_t n = v.size();
  if (n == 0) return;
  CounterRng rng(seed, 7);
  auto add_spikes = [&](std::size_t count) {
    const double sigma = std::max(signal::noise_sigma(v), 1e-12);
    count = std::min(count, n);
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    // Partial Fisher-Yates: the first `count` entries are a uniform sample.
    for (std::size_t i = 0; i < count; ++i) {
      const auto j = i + rng.below(n - i);
      std::swap(idx[i], idx[j]);
    }
    for (std::size_t i = 0; i < count; ++i) {
      const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      v[idx[i]] += sign * d.spike_height * sigma * rng.uniform(0.9, 1.3);
    }
  };

  switch (d.kind) {
    case DefectKind::None:
      break;
    case DefectKind::CorrectableSpikes:
      add_spikes(d.spike_count);
      break;
    case DefectKind::UncorrectableSpikes:
      add_spikes(static_cast<std::size_t>(std::ceil(d.spike_fraction * static_cast<double>(n))));
      break;
    case DefectKind::Clipping: {
      std::vector<double> sorted = v;
      const auto k = static_cast<std::size_t>(
          std::floor((1.0 - d.clip_fraction) * static_cast<double>(n - 1)));
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k), sorted.end());
      const double level = sorted[k];
      for (auto& x : v) x = std::min(x, level);
      break;
    }
    case DefectKind::Gaps: {
      const auto len = std::min(n, static_cast<std::size_t>(d.gap_fraction * static_cast<double>(n)));
      const auto start = len < n ? rng.below(n - len + 1) : 0;
      const double hold = v[start];
      for (std::size_t i = start; i < start + len; ++i) v[i] = hold;
      break;
    }
    case DefectKind::LowAmplitude:
      for (auto& x : v) x *= d.amplitude_scale;
      break;
    case DefectKind::NoRecording:
      std::fill(v.begin(), v.end(), 0.0);
      break;
  }
}

PpgSignal synth_ppg(const BeatTimes& beats, double sample_rate_hz, double duration_s,
                    const DefectSpec& defect, std::uint64_t seed) {
  if (sample_rate_hz < 50.0) throw ValidationError("PPG sample rate must be at least 50 Hz");
  PpgSignal ppg;
  ppg.sample_rate_hz = sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  ppg.values.assign(n, 0.0);
  for (double tb : beats.times_s) {
    const auto first = static_cast<long>(std::ceil((tb - kPulseRiseS) * sample_rate_hz));
    const auto last = static_cast<long>(std::floor((tb + kPulseDecayS) * sample_rate_hz));
    for (long i = std::max(0L, first); i <= last && i < static_cast<long>(n); ++i)
      ppg.values[static_cast<std::size_t>(i)] +=
          pulse_template(static_cast<double>(i) / sample_rate_hz - tb);
  }
  CounterRng noise(seed, 1);
  for (auto& x : ppg.values) x += kPpgNoiseFraction * noise.normal();
  apply_defect(ppg.values, sample_rate_hz, defect, seed);
  return ppg;
}

RoiMatrix synth_bold(const HrvSeries& hrv, const BoldSimConfig& cfg, double tr_seconds) {
  const std::size_t n = hrv.values.size();
  for (const auto& [g, c] : cfg.roi_config.group_counts) {
    if (c == 0) continue;
    if (!cfg.coupling_gain_by_group.contains(g) || !cfg.coupling_lag_s_by_group.contains(g))
      throw ValidationError("group " + group_name(g) + " missing from coupling maps");
    if (cfg.coupling_lag_s_by_group.at(g) < 0.0)
      throw ValidationError("coupling lag must be non-negative");
  }
  if (!(cfg.snr > 0.0)) throw ValidationError("snr must be positive");

  // z-scored HRV convolved with the kernel, zero-padded before the scan.
  std::vector<double> z(n, 0.0);
  if (n > 0) {
    double mean = 0.0;
    for (double v : hrv.values) mean += v;
    mean /= static_cast<double>(n);
    const double sd = population_std(hrv.values.data(), n);
    if (sd > 0.0)
      for (std::size_t i = 0; i < n; ++i) z[i] = (hrv.values[i] - mean) / sd;
  }
  const auto kernel = cardiac_kernel(tr_seconds);
  std::vector<double> driven(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double s = 0.0;
    for (std::size_t j = 0; j < kernel.size() && j <= t; ++j) s += kernel[j] * z[t - j];
    driven[t] = s;
  }
  auto lagged = [&](double lag_frames) {
    std::vector<double> out(n, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double src = static_cast<double>(t) - lag_frames;
      if (src < 0.0) continue;
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      const double frac = src - static_cast<double>(i0);
      const double a = driven[i0];
      const double b = i0 + 1 < n ? driven[i0 + 1] : 0.0;
      out[t] = (1.0 - frac) * a + frac * b;
    }
    return out;
  };

  RoiMatrix roi;
  roi.channels = make_channels(cfg.roi_config);
  roi.values = Matrix(n, roi.channels.size());
  std::map<RoiGroup, std::vector<double>> group_term;
  for (const auto& [g, c] : cfg.roi_config.group_counts)
    if (c > 0) group_term[g] = lagged(cfg.coupling_lag_s_by_group.at(g) / tr_seconds);

  std::vector<double> signal(n);
  for (std::size_t ch = 0; ch < roi.channels.size(); ++ch) {
    const RoiGroup g = roi.channels[ch].group;
    CounterRng rng(cfg.seed, ch);
    const double weight = cfg.coupling_gain_by_group.at(g) * (1.0 + cfg.mixing_weight_sd * rng.normal());
    const double drift_period_s = rng.uniform(100.0, 300.0);
    const double drift_phase = rng.uniform(0.0, kTwoPi);
    const auto& term = group_term.at(g);
    for (std::size_t t = 0; t < n; ++t) {
      const double time = static_cast<double>(t) * tr_seconds;
      signal[t] = weight * term[t] +
                  cfg.drift_amplitude * std::cos(kTwoPi * time / drift_period_s + drift_phase);
    }
    const double sig_sd = n > 0 ? population_std(signal.data(), n) : 0.0;
    const double noise_sd = sig_sd > 0.0 ? sig_sd / cfg.snr : 1.0;
    for (std::size_t t = 0; t < n; ++t) roi.values(t, ch) = signal[t] + noise_sd * rng.normal();
  }
  return roi;
}

QualityLabel expected_quality(DefectKind k) {
  switch (k) {
    case DefectKind::None: return QualityLabel::Clean;
    case DefectKind::CorrectableSpikes: return QualityLabel::CorrectableSpikes;
    case DefectKind::UncorrectableSpikes: return QualityLabel::UncorrectableSpikes;
    case DefectKind::Clipping: return QualityLabel::Clipping;
    case DefectKind::Gaps: return QualityLabel::Gaps;
    case DefectKind::LowAmplitude: return QualityLabel::LowAmplitude;
    case DefectKind::NoRecording: return QualityLabel::NoRecording;
  }
  throw ValidationError("unknown defect kind");
}

ScanRecord simulate_scan(const CardiacSimConfig& cardiac, const BoldSimConfig& bold,
                         const DefectSpec& defect, const ScanIds& ids, double ppg_sample_rate_hz) {
  ScanRecord rec;
  rec.scan_id = ids.scan_id;
  rec.subject_id = ids.subject_id;
  rec.tr_seconds = cardiac.tr_seconds;
  const auto beats = gen_beat_times(cardiac);
  rec.hrv = hrv_from_beats(beats, cardiac.tr_seconds, cardiac.duration_frames, kDefaultHrvWindowS);
  rec.ppg = synth_ppg(beats, ppg_sample_rate_hz, cardiac.duration_s(), defect,
                      derive_seed(cardiac.seed, "ppg"));
  rec.ppg->quality = expected_quality(defect.kind);
  rec.roi = synth_bold(*rec.hrv, bold, cardiac.tr_seconds);
  return rec;
}

}  // namespace hrvfmri::sim
