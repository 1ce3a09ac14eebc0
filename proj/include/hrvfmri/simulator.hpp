// SPDX-License-Identifier: Apache-2.0
//
// Synthetic paired (BOLD, PPG, HRV) scans. Every generator is a pure function
// of its config and seed.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hrvfmri/core_io.hpp"

namespace hrvfmri::sim {

struct CardiacSimConfig {
  std::size_t duration_frames = 400;
  double tr_seconds = 0.8;
  double mean_hr_bpm = 90.0;                // [50, 150]
  double hr_modulation_depth = 8.0;         // bpm
  double hr_modulation_timescale_s = 20.0;
  double hr_jitter_bpm = 0.5;               // per-beat Gaussian jitter
  std::uint64_t seed = 1;

  double duration_s() const { return static_cast<double>(duration_frames) * tr_seconds; }
};

inline constexpr double kMinHrBpm = 40.0;
inline constexpr double kMaxHrBpm = 180.0;

struct BeatTimes {
  std::vector<double> times_s;
};

struct BoldSimConfig {
  RoiConfig roi_config = make_roi_config(RoiConfigLabel::DynamicPlusWM);
  double snr = 1.0;
  std::map<RoiGroup, double> coupling_gain_by_group;
  std::map<RoiGroup, double> coupling_lag_s_by_group;
  double mixing_weight_sd = 0.5;
  double drift_amplitude = 0.5;
  std::uint64_t seed = 2;

  /// Gains 1.0 everywhere; lags 3 s grey matter, 7 s white matter, 4 s structural.
  static BoldSimConfig with_defaults(RoiConfig roi);
};

enum class DefectKind {
  None,
  CorrectableSpikes,
  UncorrectableSpikes,
  Clipping,
  Gaps,
  LowAmplitude,
  NoRecording,
};

std::string defect_name(DefectKind k);
/// Quality class a defect of this kind is expected to produce.
QualityLabel expected_quality(DefectKind k);
DefectKind defect_from_name(const std::string& name);

/// Parameters are read only for the matching kind.
struct DefectSpec {
  DefectKind kind = DefectKind::None;
  std::size_t spike_count = 5;          // CorrectableSpikes
  double spike_fraction = 0.06;         // UncorrectableSpikes, fraction of samples
  double spike_height = 20.0;           // in units of the estimated noise sigma
  double clip_fraction = 0.15;          // Clipping, fraction of samples saturated
  double gap_fraction = 0.2;            // Gaps, fraction of the recording held constant
  double amplitude_scale = 0.02;        // LowAmplitude
};

/// Unit-peak pulse template: raised-cosine rise over 0.15 s to the beat time,
/// raised-cosine decay over 0.45 s after it. `tau` is time relative to the beat.
double pulse_template(double tau);
inline constexpr double kPulseRiseS = 0.15;
inline constexpr double kPulseDecayS = 0.45;
inline constexpr double kPpgNoiseFraction = 0.02;

/// Double-gamma cardiac response kernel sampled every `tr_seconds` on
/// [0, 42] s, scaled to unit energy.
std::vector<double> cardiac_kernel(double tr_seconds);

BeatTimes gen_beat_times(const CardiacSimConfig& cfg);

/// Frame k value: population std of the inter-beat intervals whose midpoints
/// lie in [k*tr - window/2, k*tr + window/2]. Frames with fewer than two
/// intervals copy the nearest computable frame (earlier frame on ties).
HrvSeries hrv_from_beats(const BeatTimes& beats, double tr_seconds, std::size_t n_frames,
                         double window_s);

PpgSignal synth_ppg(const BeatTimes& beats, double sample_rate_hz, double duration_s,
                    const DefectSpec& defect, std::uint64_t seed);

/// Applies a defect to an existing waveform in place (used by synth_ppg).
void apply_defect(std::vector<double>& values, double sample_rate_hz, const DefectSpec& defect,
                  std::uint64_t seed);

RoiMatrix synth_bold(const HrvSeries& hrv, const BoldSimConfig& cfg, double tr_seconds);

struct ScanIds {
  std::string scan_id;
  std::string subject_id;
};

inline constexpr double kDefaultHrvWindowS = 6.0;

ScanRecord simulate_scan(const CardiacSimConfig& cardiac, const BoldSimConfig& bold,
                         const DefectSpec& defect, const ScanIds& ids,
                         double ppg_sample_rate_hz = 100.0);

}  // namespace hrvfmri::sim
