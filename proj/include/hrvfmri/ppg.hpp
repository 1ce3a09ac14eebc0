// SPDX-License-Identifier: Apache-2.0
//
// PPG quality triage, spike correction, beat detection and HRV extraction.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hrvfmri/core_io.hpp"
#include "hrvfmri/simulator.hpp"

namespace hrvfmri::ppg {

struct QcThresholds {
  double spike_z = 6.0;
  double max_correctable_spike_fraction = 0.02;
  double clip_fraction = 0.05;
  double gap_fraction = 0.05;
  double min_amplitude_ratio = 0.1;
  double zero_fraction_for_norec = 0.98;
  /// Constant stretches shorter than this are not counted as gaps.
  double min_gap_s = 1.0;
  /// Expected pulse peak height in signal units.
  double reference_pulse_amplitude = 1.0;
  /// Robust amplitude (p95 - p5) typical of the corpus; used when no beat
  /// period can be estimated. Unset means derive it from the reference pulse.
  std::optional<double> corpus_robust_amplitude;

  void validate() const;
};

struct QualityClass {
  QualityLabel value = QualityLabel::Clean;
  /// spike_fraction, clip_fraction, gap_fraction, constant_fraction in [0,1];
  /// amplitude_ratio >= 0.
  std::map<std::string, double> diagnostics;
};

/// First match wins: NoRecording, Gaps, Clipping, LowAmplitude, spikes, Clean.
QualityClass classify_quality(const PpgSignal& ppg, const QcThresholds& th = {});

/// Replaces flagged spike samples with linear interpolation between the
/// nearest unflagged neighbours; runs touching an end copy the nearest value.
PpgSignal correct_spikes(const PpgSignal& ppg, const QcThresholds& th = {});

/// Strictly increasing pulse-peak times in seconds. Throws DataError
/// "no cardiac rhythm" when the autocorrelation peak is below 0.2.
sim::BeatTimes detect_peaks(const PpgSignal& ppg);

HrvSeries extract_hrv(const PpgSignal& ppg, double tr_seconds, std::size_t n_frames,
                      double window_s = sim::kDefaultHrvWindowS);

/// Whether a class is usable for training (Clean, or CorrectableSpikes after correction).
inline bool is_usable(QualityLabel q) {
  return q == QualityLabel::Clean || q == QualityLabel::CorrectableSpikes;
}

namespace detail {

/// Zero-phase 0.5-3.0 Hz band-pass: first-order high- and low-pass sections,
/// each run forward then backward.
std::vector<double> bandpass_cardiac(const std::vector<double>& x, double fs);

/// Dominant beat period in samples from the normalized autocorrelation over
/// the 30-180 bpm lag range; nullopt when its peak is below `min_peak`. The
/// shortest local maximum reaching `accept` times the best one wins, so a lower
/// `accept` favours the beat scale of irregular rhythms over their repeat length.
std::optional<double> estimate_period(const std::vector<double>& filtered, double fs,
                                      double min_peak = 0.2, double accept = 0.85);

/// Samples whose residual from a 3-sample running median is at least spike_z
/// noise sigmas (sigma from the MAD of second differences).
std::vector<char> spike_mask(const std::vector<double>& v, double spike_z);

/// p95 - p5 of an ideal pulse train with the given period.
double template_train_amplitude(double period_s);

}  // namespace detail
}  // namespace hrvfmri::ppg
