// SPDX-License-Identifier: Apache-2.0
//
// End-to-end batch stages behind the CLI subcommands. Every stage is a pure
// function of the ExperimentConfig (master seed included) and its inputs on disk.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hrvfmri/core_io.hpp"
#include "hrvfmri/dataset.hpp"
#include "hrvfmri/json_io.hpp"
#include "hrvfmri/metrics.hpp"
#include "hrvfmri/nn/config.hpp"
#include "hrvfmri/nn/train.hpp"
#include "hrvfmri/ppg.hpp"
#include "hrvfmri/simulator.hpp"

namespace hrvfmri::pipeline {

struct SimulateOptions {
  std::size_t n_scans = 40;
  /// 0 keeps the canonical channel counts; otherwise counts are scaled to this total.
  std::size_t n_channels = 0;
  RoiConfigLabel roi_label = RoiConfigLabel::DynamicPlusWM;
  double snr = 1.0;
  std::size_t n_frames = 400;
  double tr_seconds = 0.8;
  double ppg_sample_rate_hz = 100.0;
  double mean_hr_min = 60.0, mean_hr_max = 110.0;
  double depth_min = 2.0, depth_max = 12.0;  // bpm, uniform per scan
  double timescale_s = 20.0;
  double jitter_bpm = 0.5;
  std::size_t scans_per_subject = 1;
  std::map<std::string, double> defect_mix = {{"None", 1.0}};
};

enum class TargetSource { Ppg, GroundTruth };

/// How training and validation targets are standardized before fitting.
/// Fold: one mean/std over the training scans. PerScan: each scan by its own
/// mean/std, so the loss only sees within-scan fluctuations. Predictions are
/// restored to seconds with the fold statistics either way.
enum class TargetScaling { Fold, PerScan };

struct CvOptions {
  std::size_t k = 10;
  bool group_by_subject = false;
  double val_fraction = 0.1;
  TargetSource target = TargetSource::Ppg;
  TargetScaling target_scaling = TargetScaling::PerScan;
};

struct ExperimentConfig {
  std::filesystem::path data_root = "data";
  std::filesystem::path out_root = "out";
  std::uint64_t seed = 1;
  int jobs = 1;
  SimulateOptions simulate;
  ppg::QcThresholds qc;
  dataset::WindowSpec window;
  /// Stride between training windows; evaluation always predicts every frame.
  std::size_t train_window_stride = 1;
  std::string model_preset = "default";  // "default" or "small"
  json model_overrides = json::object();
  nn::TrainHyper optimizer;
  CvOptions cv;
  std::vector<RoiConfigLabel> compare_labels = {std::begin(kAllRoiConfigs),
                                               std::end(kAllRoiConfigs)};

  void validate() const;
  /// Model config for a given input width: preset, then overrides.
  nn::ModelConfig model_for(std::size_t n_channels, std::uint64_t seed) const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
/// Overlays a JSON object onto `cfg` (absent keys unchanged, unknown keys rejected).
void overlay(const json& j, ExperimentConfig& cfg);
json to_json(const ExperimentConfig& cfg);

/// Writes <dir>/run.json with the command, resolved config and derived seeds.
void write_run_json(const std::filesystem::path& dir, const std::string& command,
                    const ExperimentConfig& cfg, const json& extra = json::object());

// ---- simulate ----

struct ManifestEntry {
  std::string scan_id;
  std::string subject_id;
  std::string defect;          // simulated defect (empty for external data)
  std::uint64_t seed = 0;
  double mean_hr_bpm = 0.0;
  double modulation_depth = 0.0;
};

/// Defect kinds per scan: largest-remainder counts from the mix, then a seeded
/// shuffle. Throws ValidationError unless proportions are non-negative and sum to 1.
std::vector<sim::DefectKind> assign_defects(const std::map<std::string, double>& mix,
                                            std::size_t n, std::uint64_t seed);

std::vector<ManifestEntry> cmd_simulate(const ExperimentConfig& cfg);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& m);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// ---- qc ----

struct QcRow {
  std::string scan_id;
  QualityLabel label = QualityLabel::Clean;
  std::optional<QualityLabel> expected;
  bool kept = false;
  std::map<std::string, double> diagnostics;
};

struct QcSummary {
  std::vector<QcRow> rows;
  std::size_t kept = 0;
  std::map<std::string, std::size_t> class_counts;
  std::optional<double> accuracy;  // against simulator labels when present
};

/// Classifies every scan under data_root, writes qc_report.csv, manifest_kept.csv,
/// qc_summary.json under out_root, and ppg_corrected.csv next to each kept
/// CorrectableSpikes scan.
QcSummary cmd_qc(const ExperimentConfig& cfg);

/// Scan directories under data_root (those holding roi.csv), sorted by name.
std::vector<std::string> list_scans(const std::filesystem::path& data_root);

// ---- windows ----

struct WindowCount {
  std::string scan_id;
  std::size_t n_frames = 0;
  std::size_t n_windows = 0;
};

/// Per-scan sample counts (windows_report.csv). With `write_cache`, also
/// writes binary window caches of the raw windows under out_root/cache.
std::vector<WindowCount> cmd_windows(const ExperimentConfig& cfg, bool write_cache);

// ---- train-cv ----

struct FoldResult {
  std::size_t fold = 0;
  std::vector<std::string> train_ids, val_ids, test_ids;
  nn::TrainReport report;
  double target_std = 1.0;
  std::vector<metrics::ScanEvaluation> evals;
};

struct CvResult {
  std::vector<FoldResult> folds;
  std::vector<metrics::ScanEvaluation> evals;  // every scan exactly once, sorted by id
  json report;                                 // contents of report.json
};

/// Loaded scan ready for training: ROI values (optionally channel-subset) and target.
struct TrainingScan {
  std::string scan_id;
  std::string subject_id;
  RoiMatrix roi;
  HrvSeries target;
};

/// Reads kept scans and derives their targets (PPG-extracted after spike
/// correction, or simulator ground truth).
std::vector<TrainingScan> load_training_scans(const ExperimentConfig& cfg);

/// Cross-validation over already-loaded scans, writing artifacts to `out_dir`.
CvResult run_cv(const ExperimentConfig& cfg, const std::vector<TrainingScan>& scans,
                const std::filesystem::path& out_dir);

CvResult cmd_train_cv(const ExperimentConfig& cfg);

// ---- compare-rois ----

/// Channel indices kept for a configuration. DynamicOnly drops WM;
/// StaticPlusWM keeps a seeded subsample of the dynamic channels sized
/// 360/580 of them plus all WM; StructuralOnly keeps a seeded subsample of
/// 69/628 of all channels. Indices are sorted.
std::vector<std::size_t> select_channels(const std::vector<RoiChannel>& channels,
                                         RoiConfigLabel label, std::uint64_t seed);

RoiMatrix subset_channels(const RoiMatrix& roi, const std::vector<std::size_t>& idx);

metrics::ConfigComparison cmd_compare_rois(const ExperimentConfig& cfg);

// ---- report ----

struct ReportOutput {
  std::vector<std::filesystem::path> svgs;
  std::filesystem::path summary;
};

/// Renders SVG plots and summary.md under <root>/report from train-cv or
/// compare-rois artifacts. Throws DataError listing the expected files when
/// neither set is present.
ReportOutput cmd_report(const std::filesystem::path& root);

}  // namespace hrvfmri::pipeline
