// SPDX-License-Identifier: Apache-2.0
//
// Reconstruction metrics, per-scan evaluation, paired configuration tests and
// the variability-versus-accuracy analysis.
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrvfmri/core_io.hpp"

namespace hrvfmri::metrics {

double mae(std::span<const double> pred, std::span<const double> truth);
double mse(std::span<const double> pred, std::span<const double> truth);
/// Sample correlation; nullopt when either series is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);
/// Unconstrained DTW with |x_i - y_j| cost and symmetric steps; O(min(n,m)) memory.
double dtw(std::span<const double> x, std::span<const double> y);

/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> average_ranks(std::span<const double> v);

struct ScanEvaluation {
  std::string scan_id;
  double mae = 0.0;
  double mse = 0.0;
  std::optional<double> pearson_r;
  double dtw = 0.0;
  double hrv_std = 0.0;  // population std of the measured series on the evaluated frames
  std::size_t n_frames = 0;
};

/// Metrics on the frames where `pred` is finite. `pred` and `measured` are
/// full-length, frame-aligned series. Throws ValidationError on empty overlap.
ScanEvaluation evaluate_scan(const std::string& scan_id, std::span<const double> pred,
                             std::span<const double> measured);

struct VariabilityAnalysis {
  std::optional<double> slope;     // least squares of r on hrv_std
  std::optional<double> pearson;   // corr(hrv_std, r)
  std::optional<double> spearman;  // rank corr(hrv_std, r)
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;  // scans with undefined r
  std::vector<std::pair<double, double>> scatter;  // (hrv_std, r), sorted by scan id
};

/// Needs at least three scans with defined r.
VariabilityAnalysis variability_accuracy_analysis(std::span<const ScanEvaluation> evals);
void write_scatter_csv(const std::filesystem::path& path, std::span<const ScanEvaluation> evals);

struct PairedTest {
  double p_value = 1.0;         // two-sided
  double median_difference = 0.0;  // median of (b - a)
  int direction = 0;            // sign of the median difference; 0 when none
  std::size_t n_nonzero = 0;
  double w_plus = 0.0;          // sum of ranks of positive differences
  bool exact = true;
};

inline constexpr std::size_t kExactWilcoxonMaxN = 25;

/// Wilcoxon signed-rank test on b - a. Zero differences are dropped; the exact
/// conditional distribution (ties kept) is used for up to 25 nonzero pairs,
/// otherwise a normal approximation with tie and continuity correction.
/// Requires equal lengths of at least 6.
PairedTest paired_test(std::span<const double> a, std::span<const double> b);

/// Upper and lower tail of W+ under the exact signed-rank null for the given
/// absolute-difference ranks (may contain ties). Exposed for tests.
std::pair<double, double> signed_rank_tails(std::span<const double> ranks, double w_plus);

struct MetricSummary {
  double mean = 0.0;
  double median = 0.0;
  std::size_t n = 0;
  std::size_t n_excluded = 0;
};

struct ConfigComparison {
  std::vector<std::string> labels;
  std::vector<std::string> scan_ids;  // sorted
  std::map<std::string, std::vector<ScanEvaluation>> per_scan;  // sorted by scan id
  std::map<std::string, std::map<std::string, MetricSummary>> summary;  // label -> metric
  std::string best_label;  // highest mean r
  std::map<std::string, double> improvement_pct;  // best vs label, mean-r basis
  /// Wilcoxon p on per-scan r, [i][j] for labels[i] vs labels[j]; NaN when
  /// fewer than six scans have r defined in both.
  std::vector<std::vector<double>> p_matrix;
  std::string note;  // free-text caveat copied into the report header
};

/// (mean_best - mean_other) / mean_other * 100.
double improvement_percent(double mean_best, double mean_other);

ConfigComparison compare_configs(const std::vector<std::string>& labels,
                                 const std::map<std::string, std::vector<ScanEvaluation>>& evals);

void write_scan_metrics_csv(const std::filesystem::path& path,
                            std::span<const ScanEvaluation> evals);
std::vector<ScanEvaluation> read_scan_metrics_csv(const std::filesystem::path& path);

/// comparison.json plus one violin_<label>.csv per configuration.
void write_comparison(const std::filesystem::path& dir, const ConfigComparison& c);

MetricSummary summarize(std::vector<double> values, std::size_t excluded = 0);

}  // namespace hrvfmri::metrics
