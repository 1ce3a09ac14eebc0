// SPDX-License-Identifier: Apache-2.0
//
// Shared data model and on-disk scan format.
//
// Scan directory layout:
//   <scan_id>/roi.csv    header of "<GROUP>:<name>" columns, one row per frame
//   <scan_id>/ppg.csv    optional, single column headed "ppg"
//   <scan_id>/hrv.csv    optional, single column headed "hrv" (seconds)
//   <scan_id>/meta.json  scan_id, subject_id, tr_seconds, ppg_sample_rate_hz,
//                        ppg_present, hrv_present
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hrvfmri/matrix.hpp"

namespace hrvfmri {

enum class RoiGroup { Cortical, Subcortical, WhiteMatter, Structural };

/// Short tag used as the column-name prefix in roi.csv ("CTX", "SUB", "WM", "STR").
std::string group_tag(RoiGroup g);
RoiGroup group_from_tag(const std::string& tag);
std::string group_name(RoiGroup g);

struct RoiChannel {
  std::string name;
  RoiGroup group = RoiGroup::Cortical;
  friend bool operator==(const RoiChannel&, const RoiChannel&) = default;
};

struct RoiMatrix {
  std::vector<RoiChannel> channels;
  Matrix values;  // n_frames x n_channels

  std::size_t n_frames() const { return values.rows(); }
  std::size_t n_channels() const { return values.cols(); }
  friend bool operator==(const RoiMatrix&, const RoiMatrix&) = default;
};

enum class RoiConfigLabel { DynamicPlusWM, DynamicOnly, StaticPlusWM, StructuralOnly };

std::string label_name(RoiConfigLabel label);
RoiConfigLabel label_from_name(const std::string& name);
inline constexpr RoiConfigLabel kAllRoiConfigs[] = {
    RoiConfigLabel::DynamicPlusWM, RoiConfigLabel::DynamicOnly,
    RoiConfigLabel::StaticPlusWM, RoiConfigLabel::StructuralOnly};

struct RoiConfig {
  RoiConfigLabel label = RoiConfigLabel::DynamicPlusWM;
  std::map<RoiGroup, std::size_t> group_counts;

  std::size_t total() const;
  friend bool operator==(const RoiConfig&, const RoiConfig&) = default;
};

/// Canonical atlas channel counts: 518+62+48, 518+62, 360+48, 69.
RoiConfig make_roi_config(RoiConfigLabel label);

/// Canonical config with every group count multiplied by `scale` and rounded
/// half-up; groups never drop below one channel. Used for desk-scale runs.
RoiConfig make_scaled_roi_config(RoiConfigLabel label, double scale);

/// Channel list "<tag>_<index>" matching a config's group counts.
std::vector<RoiChannel> make_channels(const RoiConfig& cfg);

enum class QualityLabel {
  Clean,
  CorrectableSpikes,
  UncorrectableSpikes,
  Clipping,
  Gaps,
  LowAmplitude,
  NoRecording,
};

std::string quality_name(QualityLabel q);
QualityLabel quality_from_name(const std::string& name);

struct PpgSignal {
  double sample_rate_hz = 100.0;
  std::vector<double> values;
  std::optional<QualityLabel> quality;

  double duration_s() const { return static_cast<double>(values.size()) / sample_rate_hz; }
  friend bool operator==(const PpgSignal&, const PpgSignal&) = default;
};

/// Standard deviation of inter-beat intervals (seconds), one value per frame.
struct HrvSeries {
  std::vector<double> values;
  friend bool operator==(const HrvSeries&, const HrvSeries&) = default;
};

struct ScanRecord {
  std::string scan_id;
  std::string subject_id;
  double tr_seconds = 0.8;
  RoiMatrix roi;
  std::optional<PpgSignal> ppg;
  std::optional<HrvSeries> hrv;
};

/// Throws DataError naming the first violated invariant.
void validate(const ScanRecord& record);
void validate(const RoiMatrix& roi);
void validate(const HrvSeries& hrv);

/// Reads a scan directory. When `expected` is given, the channel groups must
/// match its counts exactly. Throws DataError on any malformed input.
ScanRecord read_scan(const std::filesystem::path& dir,
                     const std::optional<RoiConfig>& expected = std::nullopt);

/// Writes a scan directory with 17-significant-digit values. Validates first.
void write_scan(const ScanRecord& record, const std::filesystem::path& dir);

/// Single-column CSV helpers shared by the PPG, HRV and prediction files.
std::vector<double> read_column_csv(const std::filesystem::path& path,
                                    const std::string& header);
void write_column_csv(const std::filesystem::path& path, const std::string& header,
                      const std::vector<double>& values);

/// Round-trip-safe decimal rendering of a double.
std::string format_double(double v);

}  // namespace hrvfmri
