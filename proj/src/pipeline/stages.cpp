// SPDX-License-Identifier: Apache-2.0
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hrvfmri/error.hpp"
#include "hrvfmri/pipeline.hpp"
#include "hrvfmri/rng.hpp"

namespace fs = std::filesystem;

namespace hrvfmri::pipeline {

std::vector<sim::DefectKind> assign_defects(const std::map<std::string, double>& mix,
                                            std::size_t n, std::uint64_t seed) {
  if (mix.empty()) throw ValidationError("defect mix is empty");
  double total = 0.0;
  std::vector<std::pair<sim::DefectKind, double>> parts;
  for (const auto& [name, p] : mix) {
    sim::DefectKind kind;
    try {
      kind = sim::defect_from_name(name);
    } catch (const Error&) {
      throw ValidationError("unknown defect kind '" + name + "' in defect mix");
    }
    if (!(p >= 0.0) || !std::isfinite(p))
      throw ValidationError("defect mix proportion for " + name + " must be non-negative");
    total += p;
    parts.emplace_back(kind, p);
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("defect mix proportions sum to " + format_double(total) + ", not 1");

  // Largest remainder; ties broken by enum order.
  std::vector<std::size_t> counts(parts.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const double exact = parts[i].second * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    rem.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(rem.begin(), rem.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return parts[a.second].first < parts[b.second].first;
  });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[rem[r % rem.size()].second];

  std::vector<std::pair<sim::DefectKind, std::size_t>> ordered;
  for (std::size_t i = 0; i < parts.size(); ++i) ordered.emplace_back(parts[i].first, counts[i]);
  std::sort(ordered.begin(), ordered.end());
  std::vector<sim::DefectKind> out;
  for (const auto& [kind, c] : ordered) out.insert(out.end(), c, kind);
  CounterRng rng(derive_seed(seed, "defects"));
  shuffle(out, rng);
  return out;
}

namespace {

RoiConfig simulated_roi_config(const SimulateOptions& s) {
  const RoiConfig canonical = make_roi_config(s.roi_label);
  if (s.n_channels == 0) return canonical;
  const double scale = static_cast<double>(s.n_channels) / static_cast<double>(canonical.total());
  RoiConfig cfg = make_scaled_roi_config(s.roi_label, scale);
  if (cfg.total() != s.n_channels)
    throw ValidationError("simulate.n_channels=" + std::to_string(s.n_channels) +
                          " cannot be split proportionally over the " + label_name(s.roi_label) +
                          " groups; nearest total is " + std::to_string(cfg.total()));
  return cfg;
}

std::string index_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", prefix, i);
  return buf;
}

}  // namespace

std::vector<std::string> list_scans(const fs::path& data_root) {
  if (!fs::is_directory(data_root))
    throw DataError("data root does not exist: " + data_root.string());
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(data_root))
    if (e.is_directory() && fs::exists(e.path() / "roi.csv"))
      ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<ManifestEntry> cmd_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto& s = cfg.simulate;
  const RoiConfig roi_cfg = simulated_roi_config(s);
  const auto defects = assign_defects(s.defect_mix, s.n_scans, cfg.seed);

  std::vector<ManifestEntry> manifest;
  std::set<std::string> planned;
  for (std::size_t i = 0; i < s.n_scans; ++i) planned.insert(index_id("scan", i));
  if (fs::is_directory(cfg.data_root))
    for (const auto& id : list_scans(cfg.data_root))
      if (!planned.contains(id))
        throw ValidationError("data root " + cfg.data_root.string() + " already holds scan '" +
                              id + "' that this simulation would not produce; use an empty directory");
  fs::create_directories(cfg.data_root);

  for (std::size_t i = 0; i < s.n_scans; ++i) {
    const std::uint64_t scan_seed = cfg.seed + i;
    CounterRng rng(derive_seed(scan_seed, "scan-params"));
    sim::CardiacSimConfig cardiac;
    cardiac.duration_frames = s.n_frames;
    cardiac.tr_seconds = s.tr_seconds;
    cardiac.mean_hr_bpm = rng.uniform(s.mean_hr_min, s.mean_hr_max);
    cardiac.hr_modulation_depth = rng.uniform(s.depth_min, s.depth_max);
    cardiac.hr_modulation_timescale_s = s.timescale_s;
    cardiac.hr_jitter_bpm = s.jitter_bpm;
    cardiac.seed = scan_seed;
    sim::BoldSimConfig bold = sim::BoldSimConfig::with_defaults(roi_cfg);
    bold.snr = s.snr;
    bold.seed = derive_seed(scan_seed, "bold");
    sim::DefectSpec defect;
    defect.kind = defects[i];

    ManifestEntry m;
    m.scan_id = index_id("scan", i);
    m.subject_id = index_id("sub", i / s.scans_per_subject);
    m.defect = sim::defect_name(defect.kind);
    m.seed = scan_seed;
    m.mean_hr_bpm = cardiac.mean_hr_bpm;
    m.modulation_depth = cardiac.hr_modulation_depth;
    const ScanRecord rec =
        sim::simulate_scan(cardiac, bold, defect, {m.scan_id, m.subject_id}, s.ppg_sample_rate_hz);
    write_scan(rec, cfg.data_root / m.scan_id);
    manifest.push_back(std::move(m));
  }
  write_manifest(cfg.data_root / "manifest.csv", manifest);
  spdlog::info("simulated {} scans into {}", manifest.size(), cfg.data_root.string());
  return manifest;
}

void write_manifest(const fs::path& path, const std::vector<ManifestEntry>& m) {
  std::ofstream o(path);
  if (!o) throw DataError("cannot write " + path.string());
  o << "scan_id,subject_id,defect,seed,mean_hr_bpm,modulation_depth\n";
  for (const auto& e : m)
    o << e.scan_id << ',' << e.subject_id << ',' << e.defect << ',' << e.seed << ','
      << format_double(e.mean_hr_bpm) << ',' << format_double(e.modulation_depth) << '\n';
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest not found: " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("scan_id,", 0) != 0) throw DataError("unexpected manifest header in " + path.string());
  std::vector<ManifestEntry> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() < 2) throw DataError(path.string() + ":" + std::to_string(lineno) + ": too few fields");
    ManifestEntry e;
    e.scan_id = f[0];
    e.subject_id = f[1];
    try {
      if (f.size() > 2) e.defect = f[2];
      if (f.size() > 3 && !f[3].empty()) e.seed = std::stoull(f[3]);
      if (f.size() > 4 && !f[4].empty()) e.mean_hr_bpm = std::stod(f[4]);
      if (f.size() > 5 && !f[5].empty()) e.modulation_depth = std::stod(f[5]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
    out.push_back(std::move(e));
  }
  return out;
}

QcSummary cmd_qc(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto ids = list_scans(cfg.data_root);
  if (ids.empty()) throw DataError("no scans found under " + cfg.data_root.string());
  fs::create_directories(cfg.out_root);
  QcSummary sum;
  std::vector<ManifestEntry> kept;
  std::size_t labelled = 0, correct = 0;
  for (const auto& id : ids) {
    const fs::path dir = cfg.data_root / id;
    ScanRecord rec = read_scan(dir);
    QcRow row;
    row.scan_id = id;
    if (!rec.ppg) {
      row.label = QualityLabel::NoRecording;
    } else {
      row.expected = rec.ppg->quality;
      const auto q = ppg::classify_quality(*rec.ppg, cfg.qc);
      row.label = q.value;
      row.diagnostics = q.diagnostics;
      if (row.label == QualityLabel::CorrectableSpikes) {
        const auto fixed = ppg::correct_spikes(*rec.ppg, cfg.qc);
        write_column_csv(dir / "ppg_corrected.csv", "ppg", fixed.values);
      }
    }
    row.kept = ppg::is_usable(row.label);
    if (row.expected) {
      ++labelled;
      if (*row.expected == row.label) ++correct;
    }
    ++sum.class_counts[quality_name(row.label)];
    if (row.kept) {
      ++sum.kept;
      kept.push_back({id, rec.subject_id, "", 0, 0.0, 0.0});
    }
    sum.rows.push_back(std::move(row));
  }
  if (labelled > 0) sum.accuracy = static_cast<double>(correct) / static_cast<double>(labelled);

  std::ofstream o(cfg.out_root / "qc_report.csv");
  if (!o) throw DataError("cannot write qc_report.csv under " + cfg.out_root.string());
  o << "scan_id,label,expected,kept,spike_fraction,clip_fraction,gap_fraction,"
       "constant_fraction,amplitude_ratio\n";
  auto diag = [](const QcRow& r, const char* k) {
    auto it = r.diagnostics.find(k);
    return it == r.diagnostics.end() ? std::string() : format_double(it->second);
  };
  for (const auto& r : sum.rows)
    o << r.scan_id << ',' << quality_name(r.label) << ','
      << (r.expected ? quality_name(*r.expected) : "") << ',' << (r.kept ? 1 : 0) << ','
      << diag(r, "spike_fraction") << ',' << diag(r, "clip_fraction") << ','
      << diag(r, "gap_fraction") << ',' << diag(r, "constant_fraction") << ','
      << diag(r, "amplitude_ratio") << '\n';
  write_manifest(cfg.out_root / "manifest_kept.csv", kept);

  json j;
  j["n_scans"] = sum.rows.size();
  j["kept"] = sum.kept;
  j["summary"] = std::to_string(sum.kept) + " of " + std::to_string(sum.rows.size()) +
                 " scans kept for training";
  json counts = json::object();
  for (const auto& [k, v] : sum.class_counts) counts[k] = v;
  j["class_counts"] = counts;
  j["accuracy_vs_labels"] = sum.accuracy ? json(*sum.accuracy) : json(nullptr);
  std::ofstream js(cfg.out_root / "qc_summary.json");
  js << j.dump(2) << '\n';
  spdlog::info("{}", j["summary"].get<std::string>());
  return sum;
}

std::vector<WindowCount> cmd_windows(const ExperimentConfig& cfg, bool write_cache) {
  cfg.validate();
  const auto ids = list_scans(cfg.data_root);
  if (ids.empty()) throw DataError("no scans found under " + cfg.data_root.string());
  fs::create_directories(cfg.out_root);
  if (write_cache) fs::create_directories(cfg.out_root / "cache");
  std::vector<WindowCount> out;
  for (const auto& id : ids) {
    const ScanRecord rec = read_scan(cfg.data_root / id);
    WindowCount w{id, rec.roi.n_frames(), cfg.window.count(rec.roi.n_frames())};
    if (write_cache) {
      std::optional<HrvSeries> target = rec.hrv;
      if (!target && rec.ppg) {
        try {
          target = ppg::extract_hrv(*rec.ppg, rec.tr_seconds, rec.roi.n_frames());
        } catch (const Error& e) {
          spdlog::warn("scan {}: no target for the window cache ({})", id, e.what());
        }
      }
      if (target) {
        const auto samples = dataset::build_windows(id, rec.roi, *target, cfg.window);
        dataset::write_window_cache(
            dataset::window_cache_path(cfg.out_root / "cache", id, cfg.window), cfg.window, samples);
      }
    }
    out.push_back(w);
  }
  std::ofstream o(cfg.out_root / "windows_report.csv");
  if (!o) throw DataError("cannot write windows_report.csv under " + cfg.out_root.string());
  o << "scan_id,n_frames,n_windows\n";
  std::size_t total = 0;
  for (const auto& w : out) {
    o << w.scan_id << ',' << w.n_frames << ',' << w.n_windows << '\n';
    total += w.n_windows;
  }
  spdlog::info("{} windows across {} scans", total, out.size());
  return out;
}

}  // namespace hrvfmri::pipeline
