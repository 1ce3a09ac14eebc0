// SPDX-License-Identifier: Apache-2.0
//
// Sliding-window supervised samples, leak-free normalization and scan-level
// cross-validation folds.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hrvfmri/core_io.hpp"
#include "hrvfmri/matrix.hpp"

namespace hrvfmri::dataset {

/// 65-frame window whose regression target sits at the 10th frame (offset 9).
struct WindowSpec {
  std::size_t window_len = 65;
  std::size_t target_offset = 9;
  std::size_t stride = 1;

  void validate() const;
  /// Number of windows in a scan of `n_frames`; 0 if the scan is too short.
  std::size_t count(std::size_t n_frames) const;
  /// Stable 64-bit hash used to key window caches.
  std::uint64_t hash() const;
  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

struct WindowSample {
  std::string scan_id;
  std::size_t target_frame = 0;
  Matrix input;  // window_len x n_channels
  double target = 0.0;
};

std::vector<WindowSample> build_windows(const std::string& scan_id, const RoiMatrix& roi,
                                        const HrvSeries& hrv, const WindowSpec& spec);

struct Normalizer {
  std::vector<double> channel_mean;
  std::vector<double> channel_std;
  double target_mean = 0.0;
  double target_std = 1.0;
  /// Channels whose variance was zero; their std was set to 1.
  std::vector<std::size_t> zero_variance_channels;

  std::size_t n_channels() const { return channel_mean.size(); }
  static Normalizer identity(std::size_t n_channels);

  double standardize_target(double y) const { return (y - target_mean) / target_std; }
  double restore_target(double z) const { return z * target_std + target_mean; }
  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

/// Channel statistics pooled over every time step of every training window;
/// target statistics over the training targets. Needs at least two samples.
Normalizer fit_normalizer(const std::vector<WindowSample>& training);

/// Same statistics computed from whole scans without materializing windows:
/// each frame is weighted by the number of windows that cover it.
Normalizer fit_normalizer(const std::vector<const RoiMatrix*>& rois,
                          const std::vector<const HrvSeries*>& targets,
                          const WindowSpec& spec);

std::vector<WindowSample> apply_normalizer(const Normalizer& n, std::vector<WindowSample> samples);
std::vector<WindowSample> invert_normalizer(const Normalizer& n, std::vector<WindowSample> samples);
Matrix apply_normalizer(const Normalizer& n, const Matrix& values);

struct FoldAssignment {
  std::size_t k = 10;
  std::map<std::string, std::size_t> fold_of;

  std::vector<std::string> test_ids(std::size_t fold) const;
  std::vector<std::string> train_ids(std::size_t fold) const;
  std::vector<std::size_t> sizes() const;
};

/// Seeded shuffle, then round-robin dealing into k folds. Requires 2 <= k <= n.
FoldAssignment assign_folds(const std::vector<std::string>& scan_ids, std::size_t k,
                            std::uint64_t seed);

/// Subject-grouped variant: all scans of a subject land in the same fold;
/// subjects are shuffled and dealt round-robin.
FoldAssignment assign_folds_by_subject(const std::vector<std::string>& scan_ids,
                                       const std::vector<std::string>& subject_ids,
                                       std::size_t k, std::uint64_t seed);

/// Binary window cache: header (magic, version, spec, shape) then the row-major
/// inputs and targets as host-order doubles.
void write_window_cache(const std::filesystem::path& path, const WindowSpec& spec,
                        const std::vector<WindowSample>& samples);
std::vector<WindowSample> read_window_cache(const std::filesystem::path& path,
                                            const WindowSpec& spec);
std::filesystem::path window_cache_path(const std::filesystem::path& dir,
                                        const std::string& scan_id, const WindowSpec& spec);

}  // namespace hrvfmri::dataset
