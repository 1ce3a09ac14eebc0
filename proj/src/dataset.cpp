// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/dataset.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "hrvfmri/error.hpp"
#include "hrvfmri/rng.hpp"

namespace hrvfmri::dataset {

void WindowSpec::validate() const {
  if (window_len == 0) throw ValidationError("window_len must be positive");
  if (target_offset >= window_len)
    throw ValidationError("target_offset must be smaller than window_len");
  if (stride == 0) throw ValidationError("stride must be at least 1");
}

std::size_t WindowSpec::count(std::size_t n_frames) const {
  if (n_frames < window_len) return 0;
  return (n_frames - window_len) / stride + 1;
}

std::uint64_t WindowSpec::hash() const {
  std::uint64_t h = CounterRng::mix(window_len);
  h = CounterRng::mix(h ^ target_offset);
  return CounterRng::mix(h ^ stride);
}

std::vector<WindowSample> build_windows(const std::string& scan_id, const RoiMatrix& roi,
                                        const HrvSeries& hrv, const WindowSpec& spec) {
  spec.validate();
  const std::size_t n = roi.n_frames();
  if (hrv.values.size() != n)
    throw ValidationError("hrv length " + std::to_string(hrv.values.size()) +
                          " does not match " + std::to_string(n) + " ROI frames");
  const std::size_t count = spec.count(n);
  std::vector<WindowSample> out;
  if (count == 0) {
    spdlog::info("scan {}: {} frames is shorter than the {}-frame window; no samples",
                 scan_id, n, spec.window_len);
    return out;
  }
  const std::size_t c = roi.n_channels();
  out.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t s = w * spec.stride;
    WindowSample smp;
    smp.scan_id = scan_id;
    smp.target_frame = s + spec.target_offset;
    smp.input = Matrix(spec.window_len, c);
    std::copy_n(roi.values.data() + s * c, spec.window_len * c, smp.input.data());
    smp.target = hrv.values[smp.target_frame];
    out.push_back(std::move(smp));
  }
  return out;
}

Normalizer Normalizer::identity(std::size_t n_channels) {
  Normalizer n;
  n.channel_mean.assign(n_channels, 0.0);
  n.channel_std.assign(n_channels, 1.0);
  return n;
}

namespace {

// Weighted mean/std accumulator with a fixed visiting order. Two passes keep
// the variance accurate for signals with a large offset.
struct Moments {
  std::vector<double> sum, sq;
  double weight = 0.0;
  explicit Moments(std::size_t c) : sum(c, 0.0), sq(c, 0.0) {}
};

void finalize_channels(Normalizer& n, const std::vector<double>& mean,
                       const std::vector<double>& var) {
  n.channel_mean = mean;
  n.channel_std.resize(mean.size());
  n.zero_variance_channels.clear();
  for (std::size_t j = 0; j < mean.size(); ++j) {
    if (!(var[j] > 0.0)) {
      n.channel_std[j] = 1.0;
      n.zero_variance_channels.push_back(j);
    } else {
      n.channel_std[j] = std::sqrt(var[j]);
    }
  }
  if (!n.zero_variance_channels.empty())
    spdlog::warn("{} channel(s) have zero variance in the training pool; std set to 1",
                 n.zero_variance_channels.size());
}

void finalize_target(Normalizer& n, const std::vector<double>& targets) {
  double s = 0.0;
  for (double y : targets) s += y;
  n.target_mean = s / static_cast<double>(targets.size());
  double v = 0.0;
  for (double y : targets) v += (y - n.target_mean) * (y - n.target_mean);
  v /= static_cast<double>(targets.size());
  if (!(v > 0.0)) {
    spdlog::warn("training targets have zero variance; target std set to 1");
    n.target_std = 1.0;
  } else {
    n.target_std = std::sqrt(v);
  }
}

}  // namespace

Normalizer fit_normalizer(const std::vector<WindowSample>& training) {
  if (training.size() < 2) throw ValidationError("fit_normalizer needs at least 2 samples");
  const std::size_t c = training.front().input.cols();
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  double count = 0.0;
  for (const auto& s : training) {
    if (s.input.cols() != c) throw ValidationError("channel count differs between samples");
    for (std::size_t t = 0; t < s.input.rows(); ++t) {
      const auto row = s.input.row(t);
      for (std::size_t j = 0; j < c; ++j) mean[j] += row[j];
    }
    count += static_cast<double>(s.input.rows());
  }
  for (double& m : mean) m /= count;
  for (const auto& s : training)
    for (std::size_t t = 0; t < s.input.rows(); ++t) {
      const auto row = s.input.row(t);
      for (std::size_t j = 0; j < c; ++j) var[j] += (row[j] - mean[j]) * (row[j] - mean[j]);
    }
  for (double& v : var) v /= count;

  Normalizer n;
  finalize_channels(n, mean, var);
  std::vector<double> targets;
  targets.reserve(training.size());
  for (const auto& s : training) targets.push_back(s.target);
  finalize_target(n, targets);
  return n;
}

namespace {

// Number of windows (under `spec`) that contain frame t of an n-frame scan.
std::vector<double> coverage(std::size_t n, const WindowSpec& spec) {
  std::vector<double> w(n, 0.0);
  const std::size_t count = spec.count(n);
  // Difference array over window starts.
  std::vector<long> diff(n + 1, 0);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t s = k * spec.stride;
    diff[s] += 1;
    diff[s + spec.window_len] -= 1;
  }
  long run = 0;
  for (std::size_t t = 0; t < n; ++t) {
    run += diff[t];
    w[t] = static_cast<double>(run);
  }
  return w;
}

}  // namespace

Normalizer fit_normalizer(const std::vector<const RoiMatrix*>& rois,
                          const std::vector<const HrvSeries*>& targets,
                          const WindowSpec& spec) {
  spec.validate();
  if (rois.size() != targets.size()) throw ValidationError("rois and targets differ in count");
  if (rois.empty()) throw ValidationError("fit_normalizer needs at least one scan");
  const std::size_t c = rois.front()->n_channels();
  std::vector<double> mean(c, 0.0), var(c, 0.0);
  double total = 0.0;
  std::size_t n_samples = 0;
  std::vector<std::vector<double>> cov(rois.size());
  for (std::size_t i = 0; i < rois.size(); ++i) {
    const RoiMatrix& r = *rois[i];
    if (r.n_channels() != c) throw ValidationError("channel count differs between scans");
    if (targets[i]->values.size() != r.n_frames())
      throw ValidationError("hrv length does not match ROI frames");
    cov[i] = coverage(r.n_frames(), spec);
    n_samples += spec.count(r.n_frames());
    for (std::size_t t = 0; t < r.n_frames(); ++t) {
      const double w = cov[i][t];
      if (w == 0.0) continue;
      const auto row = r.values.row(t);
      for (std::size_t j = 0; j < c; ++j) mean[j] += w * row[j];
      total += w;
    }
  }
  if (n_samples < 2) throw ValidationError("fit_normalizer needs at least 2 samples");
  for (double& m : mean) m /= total;
  for (std::size_t i = 0; i < rois.size(); ++i) {
    const RoiMatrix& r = *rois[i];
    for (std::size_t t = 0; t < r.n_frames(); ++t) {
      const double w = cov[i][t];
      if (w == 0.0) continue;
      const auto row = r.values.row(t);
      for (std::size_t j = 0; j < c; ++j) var[j] += w * (row[j] - mean[j]) * (row[j] - mean[j]);
    }
  }
  for (double& v : var) v /= total;

  Normalizer n;
  finalize_channels(n, mean, var);
  std::vector<double> ys;
  ys.reserve(n_samples);
  for (std::size_t i = 0; i < rois.size(); ++i) {
    const std::size_t count = spec.count(rois[i]->n_frames());
    for (std::size_t k = 0; k < count; ++k)
      ys.push_back(targets[i]->values[k * spec.stride + spec.target_offset]);
  }
  finalize_target(n, ys);
  return n;
}

namespace {
void check_channels(const Normalizer& n, std::size_t c) {
  if (n.n_channels() != c)
    throw ValidationError("normalizer has " + std::to_string(n.n_channels()) +
                          " channels, data has " + std::to_string(c));
}
}  // namespace

Matrix apply_normalizer(const Normalizer& n, const Matrix& values) {
  check_channels(n, values.cols());
  Matrix out(values.rows(), values.cols());
  for (std::size_t t = 0; t < values.rows(); ++t)
    for (std::size_t j = 0; j < values.cols(); ++j)
      out(t, j) = (values(t, j) - n.channel_mean[j]) / n.channel_std[j];
  return out;
}

std::vector<WindowSample> apply_normalizer(const Normalizer& n,
                                           std::vector<WindowSample> samples) {
  for (auto& s : samples) {
    s.input = apply_normalizer(n, s.input);
    s.target = n.standardize_target(s.target);
  }
  return samples;
}

std::vector<WindowSample> invert_normalizer(const Normalizer& n,
                                            std::vector<WindowSample> samples) {
  for (auto& s : samples) {
    check_channels(n, s.input.cols());
    for (std::size_t t = 0; t < s.input.rows(); ++t)
      for (std::size_t j = 0; j < s.input.cols(); ++j)
        s.input(t, j) = s.input(t, j) * n.channel_std[j] + n.channel_mean[j];
    s.target = n.restore_target(s.target);
  }
  return samples;
}

std::vector<std::string> FoldAssignment::test_ids(std::size_t fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of)
    if (f == fold) out.push_back(id);
  return out;
}

std::vector<std::string> FoldAssignment::train_ids(std::size_t fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of)
    if (f != fold) out.push_back(id);
  return out;
}

std::vector<std::size_t> FoldAssignment::sizes() const {
  std::vector<std::size_t> s(k, 0);
  for (const auto& [id, f] : fold_of) ++s[f];
  return s;
}

namespace {
void check_k(std::size_t k, std::size_t n, const char* unit) {
  if (k < 2) throw ValidationError("k must be at least 2 so every fold has held-out data");
  if (k > n)
    throw ValidationError("k=" + std::to_string(k) + " exceeds the number of " + unit + " (" +
                          std::to_string(n) + ")");
}
}  // namespace

FoldAssignment assign_folds(const std::vector<std::string>& scan_ids, std::size_t k,
                            std::uint64_t seed) {
  std::vector<std::string> ids = scan_ids;
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw ValidationError("duplicate scan id in fold assignment");
  check_k(k, ids.size(), "scans");
  CounterRng rng(derive_seed(seed, "folds"));
  shuffle(ids, rng);
  FoldAssignment fa;
  fa.k = k;
  for (std::size_t i = 0; i < ids.size(); ++i) fa.fold_of[ids[i]] = i % k;
  return fa;
}

FoldAssignment assign_folds_by_subject(const std::vector<std::string>& scan_ids,
                                       const std::vector<std::string>& subject_ids,
                                       std::size_t k, std::uint64_t seed) {
  if (scan_ids.size() != subject_ids.size())
    throw ValidationError("scan and subject id lists differ in length");
  std::set<std::string> subj_set(subject_ids.begin(), subject_ids.end());
  std::vector<std::string> subjects(subj_set.begin(), subj_set.end());
  check_k(k, subjects.size(), "subjects");
  CounterRng rng(derive_seed(seed, "folds"));
  shuffle(subjects, rng);
  std::map<std::string, std::size_t> subj_fold;
  for (std::size_t i = 0; i < subjects.size(); ++i) subj_fold[subjects[i]] = i % k;
  FoldAssignment fa;
  fa.k = k;
  for (std::size_t i = 0; i < scan_ids.size(); ++i) {
    if (!fa.fold_of.emplace(scan_ids[i], subj_fold[subject_ids[i]]).second)
      throw ValidationError("duplicate scan id in fold assignment");
  }
  return fa;
}

namespace {
constexpr char kCacheMagic[8] = {'H', 'R', 'V', 'W', 'I', 'N', 'D', '1'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put(std::ofstream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& in, const std::filesystem::path& p) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated window cache: " + p.string());
  return v;
}
}  // namespace

void write_window_cache(const std::filesystem::path& path, const WindowSpec& spec,
                        const std::vector<WindowSample>& samples) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw DataError("cannot write window cache: " + path.string());
  o.write(kCacheMagic, sizeof kCacheMagic);
  put(o, kCacheVersion);
  put<std::uint64_t>(o, spec.hash());
  put<std::uint64_t>(o, samples.size());
  const std::uint64_t c = samples.empty() ? 0 : samples.front().input.cols();
  put<std::uint64_t>(o, c);
  for (const auto& s : samples) {
    put<std::uint64_t>(o, s.scan_id.size());
    o.write(s.scan_id.data(), static_cast<std::streamsize>(s.scan_id.size()));
    put<std::uint64_t>(o, s.target_frame);
    put(o, s.target);
    o.write(reinterpret_cast<const char*>(s.input.data()),
            static_cast<std::streamsize>(s.input.storage().size() * sizeof(double)));
  }
  if (!o) throw DataError("failed writing window cache: " + path.string());
}

std::vector<WindowSample> read_window_cache(const std::filesystem::path& path,
                                            const WindowSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open window cache: " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0)
    throw DataError("not a window cache: " + path.string());
  if (get<std::uint32_t>(in, path) != kCacheVersion)
    throw DataError("unsupported window cache version: " + path.string());
  if (get<std::uint64_t>(in, path) != spec.hash())
    throw DataError("window cache built with a different window spec: " + path.string());
  const auto n = get<std::uint64_t>(in, path);
  const auto c = get<std::uint64_t>(in, path);
  std::vector<WindowSample> out(n);
  for (auto& s : out) {
    const auto len = get<std::uint64_t>(in, path);
    if (len > 4096) throw DataError("corrupt window cache: " + path.string());
    s.scan_id.resize(len);
    in.read(s.scan_id.data(), static_cast<std::streamsize>(len));
    s.target_frame = get<std::uint64_t>(in, path);
    s.target = get<double>(in, path);
    s.input = Matrix(spec.window_len, c);
    in.read(reinterpret_cast<char*>(s.input.data()),
            static_cast<std::streamsize>(s.input.storage().size() * sizeof(double)));
    if (!in) throw DataError("truncated window cache: " + path.string());
  }
  return out;
}

std::filesystem::path window_cache_path(const std::filesystem::path& dir,
                                        const std::string& scan_id, const WindowSpec& spec) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(spec.hash()));
  return dir / (scan_id + "." + buf + ".win");
}

}  // namespace hrvfmri::dataset
