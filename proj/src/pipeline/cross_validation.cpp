// SPDX-License-Identifier: Apache-2.0
#include <omp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "hrvfmri/error.hpp"
#include "hrvfmri/nn/checkpoint.hpp"
#include "hrvfmri/pipeline.hpp"
#include "hrvfmri/rng.hpp"

namespace fs = std::filesystem;

namespace hrvfmri::pipeline {

namespace {

std::string fold_dir_name(std::size_t f) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "fold_%02zu", f);
  return buf;
}

json summary_json(const metrics::MetricSummary& s) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"mean", num(s.mean)}, {"median", num(s.median)}, {"n", s.n}, {"n_excluded", s.n_excluded}};
}

json metric_block(const std::vector<metrics::ScanEvaluation>& evals) {
  std::vector<double> mae, mse, r, dtw;
  std::size_t undefined = 0;
  for (const auto& e : evals) {
    mae.push_back(e.mae);
    mse.push_back(e.mse);
    dtw.push_back(e.dtw);
    if (e.pearson_r) r.push_back(*e.pearson_r);
    else ++undefined;
  }
  return {{"mae", summary_json(metrics::summarize(mae))},
          {"mse", summary_json(metrics::summarize(mse))},
          {"pearson_r", summary_json(metrics::summarize(r, undefined))},
          {"dtw", summary_json(metrics::summarize(dtw))}};
}

void write_prediction_csv(const fs::path& path, const std::vector<double>& pred,
                          const std::vector<double>& measured) {
  std::ofstream o(path);
  if (!o) throw DataError("cannot write " + path.string());
  o << "frame,predicted,measured\n";
  for (std::size_t t = 0; t < pred.size(); ++t)
    o << t << ',' << (std::isfinite(pred[t]) ? format_double(pred[t]) : "") << ','
      << format_double(measured[t]) << '\n';
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream o(path);
  if (!o) throw DataError("cannot write " + path.string());
  o << j.dump(2) << '\n';
}

}  // namespace

namespace {

// Copy of `norm` whose target statistics are the scan's own (population std;
// a constant series keeps std 1 as the fold normalizer would).
dataset::Normalizer with_scan_target_stats(dataset::Normalizer norm, const HrvSeries& hrv) {
  const auto& v = hrv.values;
  if (v.empty()) return norm;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(v.size()));
  norm.target_mean = mean;
  norm.target_std = sd > 0.0 ? sd : 1.0;
  return norm;
}

}  // namespace

std::vector<TrainingScan> load_training_scans(const ExperimentConfig& cfg) {
  const fs::path manifest = cfg.out_root / "manifest_kept.csv";
  if (!fs::exists(manifest))
    throw DataError("filtered manifest not found: " + manifest.string() + " (run qc first)");
  const auto entries = read_manifest(manifest);
  if (entries.empty()) throw DataError("filtered manifest lists no scans: " + manifest.string());
  std::vector<TrainingScan> out;
  for (const auto& e : entries) {
    const fs::path dir = cfg.data_root / e.scan_id;
    ScanRecord rec = read_scan(dir);
    TrainingScan ts;
    ts.scan_id = rec.scan_id;
    ts.subject_id = rec.subject_id;
    if (cfg.cv.target == TargetSource::GroundTruth) {
      if (!rec.hrv) throw DataError("scan " + e.scan_id + " has no ground-truth hrv.csv");
      ts.target = *rec.hrv;
    } else {
      if (!rec.ppg) throw DataError("scan " + e.scan_id + " has no PPG recording");
      PpgSignal p = *rec.ppg;
      if (fs::exists(dir / "ppg_corrected.csv"))
        p.values = read_column_csv(dir / "ppg_corrected.csv", "ppg");
      try {
        ts.target = ppg::extract_hrv(p, rec.tr_seconds, rec.roi.n_frames());
      } catch (const Error& err) {
        throw DataError("scan " + e.scan_id + ": HRV extraction failed: " + err.what());
      }
    }
    ts.roi = std::move(rec.roi);
    if (!out.empty() && ts.roi.channels != out.front().roi.channels)
      throw DataError("scan " + e.scan_id + " has a different channel layout from " +
                      out.front().scan_id);
    out.push_back(std::move(ts));
  }
  return out;
}

CvResult run_cv(const ExperimentConfig& cfg, const std::vector<TrainingScan>& scans,
                const fs::path& out_dir) {
  cfg.validate();
  omp_set_num_threads(cfg.jobs);
  if (scans.empty()) throw DataError("no scans to cross-validate");
  std::map<std::string, const TrainingScan*> by_id;
  std::vector<std::string> ids, subjects;
  for (const auto& s : scans) {
    if (!by_id.emplace(s.scan_id, &s).second) throw DataError("duplicate scan id " + s.scan_id);
    ids.push_back(s.scan_id);
    subjects.push_back(s.subject_id);
  }
  const auto folds = cfg.cv.group_by_subject
                         ? dataset::assign_folds_by_subject(ids, subjects, cfg.cv.k, cfg.seed)
                         : dataset::assign_folds(ids, cfg.cv.k, cfg.seed);
  fs::create_directories(out_dir / "predictions");

  dataset::WindowSpec train_spec = cfg.window;
  train_spec.stride = cfg.train_window_stride;
  dataset::WindowSpec eval_spec = cfg.window;
  eval_spec.stride = 1;
  const std::size_t n_channels = scans.front().roi.n_channels();

  CvResult res;
  json timing = json::object();
  json folds_json = json::array();
  auto finish_report = [&](const std::string& status) {
    auto sorted = res.evals;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.scan_id < b.scan_id; });
    res.evals = sorted;
    json r;
    r["status"] = status;
    r["n_scans"] = scans.size();
    r["n_evaluated"] = res.evals.size();
    r["k"] = cfg.cv.k;
    r["fold_unit"] = cfg.cv.group_by_subject ? "subject" : "scan";
    r["target_source"] = cfg.cv.target == TargetSource::Ppg ? "ppg" : "ground_truth";
    r["n_channels"] = n_channels;
    r["units"] = "mae in seconds, mse in seconds^2, dtw in seconds";
    r["across_scans"] = metric_block(res.evals);
    // Fold means first, then the mean of those.
    json by_fold = json::object();
    std::map<std::string, std::vector<double>> fold_means;
    for (const auto& f : res.folds) {
      const json b = metric_block(f.evals);
      for (const char* m : {"mae", "mse", "pearson_r", "dtw"})
        if (!b[m]["mean"].is_null()) fold_means[m].push_back(b[m]["mean"].get<double>());
    }
    for (const auto& [m, v] : fold_means) by_fold[m] = summary_json(metrics::summarize(v));
    r["across_folds_then_scans"] = by_fold;
    // Same errors expressed in training-fold target standard deviations.
    std::vector<double> mae_z, mse_z;
    for (const auto& f : res.folds)
      for (const auto& e : f.evals) {
        mae_z.push_back(e.mae / f.target_std);
        mse_z.push_back(e.mse / (f.target_std * f.target_std));
      }
    r["standardized_units"] = {{"mae", summary_json(metrics::summarize(mae_z))},
                               {"mse", summary_json(metrics::summarize(mse_z))}};
    try {
      const auto va = metrics::variability_accuracy_analysis(res.evals);
      auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
      r["variability_vs_accuracy"] = {{"slope", opt(va.slope)},      {"pearson", opt(va.pearson)},
                                      {"spearman", opt(va.spearman)}, {"n_used", va.n_used},
                                      {"n_excluded", va.n_excluded}};
    } catch (const ValidationError& e) {
      r["variability_vs_accuracy"] = {{"unavailable", e.what()}};
    }
    r["folds"] = folds_json;
    res.report = r;
    write_json(out_dir / "report.json", r);
    write_json(out_dir / "timing.json", timing);
    metrics::write_scan_metrics_csv(out_dir / "scan_metrics.csv", res.evals);
    metrics::write_scatter_csv(out_dir / "variability_scatter.csv", res.evals);
  };

  for (std::size_t f = 0; f < folds.k; ++f) {
    FoldResult fr;
    fr.fold = f;
    fr.test_ids = folds.test_ids(f);
    std::vector<std::string> rest = folds.train_ids(f);
    if (rest.size() < 2)
      throw ValidationError("fold " + std::to_string(f) + " leaves fewer than 2 training scans");
    CounterRng rng(derive_seed(cfg.seed, "val-split", f));
    shuffle(rest, rng);
    const std::size_t n_val = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(cfg.cv.val_fraction * static_cast<double>(rest.size()))),
        1, rest.size() - 1);
    fr.val_ids.assign(rest.begin(), rest.begin() + static_cast<long>(n_val));
    fr.train_ids.assign(rest.begin() + static_cast<long>(n_val), rest.end());
    std::sort(fr.val_ids.begin(), fr.val_ids.end());
    std::sort(fr.train_ids.begin(), fr.train_ids.end());

    std::vector<const RoiMatrix*> rois;
    std::vector<const HrvSeries*> targets;
    for (const auto& id : fr.train_ids) {
      rois.push_back(&by_id.at(id)->roi);
      targets.push_back(&by_id.at(id)->target);
    }
    const auto norm = dataset::fit_normalizer(rois, targets, train_spec);
    fr.target_std = norm.target_std;

    // Normalized matrices back the sample views, so they must outlive training.
    std::map<std::string, Matrix> normalized;
    std::vector<nn::Sample> train_s, val_s;
    auto add = [&](const std::string& id, std::vector<nn::Sample>& dst) {
      const auto& m = normalized.emplace(id, dataset::apply_normalizer(norm, by_id.at(id)->roi.values))
                          .first->second;
      const auto& hrv = by_id.at(id)->target;
      const auto s = nn::window_samples(
          m, hrv, train_spec,
          cfg.cv.target_scaling == TargetScaling::PerScan ? with_scan_target_stats(norm, hrv) : norm);
      dst.insert(dst.end(), s.begin(), s.end());
    };
    for (const auto& id : fr.train_ids) add(id, train_s);
    for (const auto& id : fr.val_ids) add(id, val_s);
    if (train_s.empty() || val_s.empty())
      throw DataError("fold " + std::to_string(f) + ": scans too short for the window length");

    const auto mcfg = cfg.model_for(n_channels, derive_seed(cfg.seed, "model", f));
    nn::TrainResult tr;
    try {
      tr = nn::train(mcfg, cfg.optimizer, train_s, val_s, derive_seed(cfg.seed, "train", f));
    } catch (const NumericalError& e) {
      folds_json.push_back({{"fold", f}, {"status", "diverged"}, {"error", e.what()}});
      finish_report("diverged");
      throw;
    }
    fr.report = tr.report;
    const fs::path fdir = out_dir / fold_dir_name(f);
    fs::create_directories(fdir);
    nn::write_checkpoint(fdir / "model.ckpt", {tr.params, cfg.optimizer, eval_spec, norm});
    json rep = hrvfmri::to_json(tr.report);
    rep["n_parameters"] = tr.params.values.size();
    write_json(fdir / "train_report.json", rep);
    timing[fold_dir_name(f)] = tr.report.wall_seconds;

    for (const auto& id : fr.test_ids) {
      const auto* s = by_id.at(id);
      const auto pred = nn::predict_scan(tr.params, s->roi, eval_spec, norm).dense();
      fr.evals.push_back(metrics::evaluate_scan(id, pred, s->target.values));
      write_prediction_csv(out_dir / "predictions" / (id + ".csv"), pred, s->target.values);
    }
    res.evals.insert(res.evals.end(), fr.evals.begin(), fr.evals.end());
    const json mb = metric_block(fr.evals);
    folds_json.push_back({{"fold", f},
                          {"status", "ok"},
                          {"n_train_scans", fr.train_ids.size()},
                          {"n_val_scans", fr.val_ids.size()},
                          {"test_ids", fr.test_ids},
                          {"n_train_windows", train_s.size()},
                          {"epochs_run", tr.report.train_loss.size()},
                          {"best_epoch", tr.report.best_epoch},
                          {"best_val_loss", tr.report.val_loss[tr.report.best_epoch]},
                          {"mean_pearson_r", mb["pearson_r"]["mean"]}});
    spdlog::info("fold {}/{}: {} epochs, mean held-out r {}", f + 1, folds.k,
                 tr.report.train_loss.size(), mb["pearson_r"]["mean"].dump());
    res.folds.push_back(std::move(fr));
  }
  finish_report("ok");
  return res;
}

CvResult cmd_train_cv(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto scans = load_training_scans(cfg);
  return run_cv(cfg, scans, cfg.out_root);
}

std::vector<std::size_t> select_channels(const std::vector<RoiChannel>& channels,
                                         RoiConfigLabel label, std::uint64_t seed) {
  std::vector<std::size_t> dynamic, wm;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i].group == RoiGroup::Cortical || channels[i].group == RoiGroup::Subcortical)
      dynamic.push_back(i);
    else if (channels[i].group == RoiGroup::WhiteMatter)
      wm.push_back(i);
  }
  if (dynamic.empty()) throw DataError("compare-rois needs cortical or subcortical channels");
  auto subsample = [&](std::vector<std::size_t> pool, double fraction) {
    const auto n = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool.size()))));
    CounterRng rng(seed);
    shuffle(pool, rng);
    pool.resize(std::min(n, pool.size()));
    std::sort(pool.begin(), pool.end());
    return pool;
  };
  std::vector<std::size_t> out;
  switch (label) {
    case RoiConfigLabel::DynamicPlusWM:
      out = dynamic;
      out.insert(out.end(), wm.begin(), wm.end());
      break;
    case RoiConfigLabel::DynamicOnly:
      out = dynamic;
      break;
    case RoiConfigLabel::StaticPlusWM:
      out = subsample(dynamic, 360.0 / 580.0);
      out.insert(out.end(), wm.begin(), wm.end());
      break;
    case RoiConfigLabel::StructuralOnly: {
      std::vector<std::size_t> all = dynamic;
      all.insert(all.end(), wm.begin(), wm.end());
      out = subsample(all, 69.0 / 628.0);
      break;
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

RoiMatrix subset_channels(const RoiMatrix& roi, const std::vector<std::size_t>& idx) {
  RoiMatrix out;
  for (auto i : idx) {
    if (i >= roi.n_channels()) throw ValidationError("channel index out of range");
    out.channels.push_back(roi.channels[i]);
  }
  out.values = Matrix(roi.n_frames(), idx.size());
  for (std::size_t t = 0; t < roi.n_frames(); ++t)
    for (std::size_t j = 0; j < idx.size(); ++j) out.values(t, j) = roi.values(t, idx[j]);
  return out;
}

metrics::ConfigComparison cmd_compare_rois(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto scans = load_training_scans(cfg);
  bool has_wm = false;
  for (const auto& ch : scans.front().roi.channels) has_wm = has_wm || ch.group == RoiGroup::WhiteMatter;
  if (!has_wm)
    throw DataError("compare-rois needs data simulated with the full DynamicPlusWM channel set");
  std::vector<std::string> labels;
  std::map<std::string, std::vector<metrics::ScanEvaluation>> evals;
  for (std::size_t li = 0; li < cfg.compare_labels.size(); ++li) {
    const auto label = cfg.compare_labels[li];
    const std::string name = label_name(label);
    const auto idx = select_channels(scans.front().roi.channels, label,
                                     derive_seed(cfg.seed, "roi-subset", static_cast<std::uint64_t>(label)));
    std::vector<TrainingScan> sub;
    sub.reserve(scans.size());
    for (const auto& s : scans) sub.push_back({s.scan_id, s.subject_id, subset_channels(s.roi, idx), s.target});
    const fs::path dir = cfg.out_root / name;
    fs::create_directories(dir);
    {
      std::ofstream o(dir / "channels.txt");
      for (auto i : idx) o << scans.front().roi.channels[i].name << '\n';
    }
    spdlog::info("compare-rois: {} with {} channels", name, idx.size());
    evals[name] = run_cv(cfg, sub, dir).evals;
    labels.push_back(name);
  }
  auto cmp = metrics::compare_configs(labels, evals);
  cmp.note =
      "StaticPlusWM and StructuralOnly are seeded channel subsamples of matching proportions, "
      "not real atlases; the comparison tests channel count and white-matter inclusion, not "
      "atlas identity.";
  metrics::write_comparison(cfg.out_root, cmp);
  return cmp;
}

}  // namespace hrvfmri::pipeline
