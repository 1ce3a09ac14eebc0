// SPDX-License-Identifier: Apache-2.0
#include <fstream>

#include "hrvfmri/error.hpp"
#include "hrvfmri/pipeline.hpp"
#include "hrvfmri/rng.hpp"

namespace hrvfmri::pipeline {

namespace {

std::string target_name(TargetSource t) { return t == TargetSource::Ppg ? "ppg" : "ground_truth"; }

TargetSource target_from_name(const std::string& s) {
  if (s == "ppg") return TargetSource::Ppg;
  if (s == "ground_truth") return TargetSource::GroundTruth;
  throw ValidationError("cv.target must be 'ppg' or 'ground_truth', got '" + s + "'");
}

std::string scaling_name(TargetScaling s) { return s == TargetScaling::Fold ? "fold" : "per_scan"; }

TargetScaling scaling_from_name(const std::string& s) {
  if (s == "fold") return TargetScaling::Fold;
  if (s == "per_scan") return TargetScaling::PerScan;
  throw ValidationError("cv.target_scaling must be 'fold' or 'per_scan', got '" + s + "'");
}

void read_range(const json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  const auto& r = j[key];
  if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
    throw ValidationError(std::string("simulate.") + key + " must be [min, max]");
  lo = r[0].get<double>();
  hi = r[1].get<double>();
}

void overlay_simulate(const json& j, SimulateOptions& s) {
  require_keys(j, {"n_scans", "n_channels", "roi_label", "snr", "n_frames", "tr_seconds",
                   "ppg_sample_rate_hz", "mean_hr_range", "depth_range", "timescale_s",
                   "jitter_bpm", "scans_per_subject", "defect_mix"},
               "simulate");
  read_opt(j, "n_scans", s.n_scans);
  read_opt(j, "n_channels", s.n_channels);
  if (j.contains("roi_label")) {
    std::string l;
    read_opt(j, "roi_label", l);
    try {
      s.roi_label = label_from_name(l);
    } catch (const Error&) {
      throw ValidationError("unknown ROI configuration '" + l + "'");
    }
  }
  read_opt(j, "snr", s.snr);
  read_opt(j, "n_frames", s.n_frames);
  read_opt(j, "tr_seconds", s.tr_seconds);
  read_opt(j, "ppg_sample_rate_hz", s.ppg_sample_rate_hz);
  read_range(j, "mean_hr_range", s.mean_hr_min, s.mean_hr_max);
  read_range(j, "depth_range", s.depth_min, s.depth_max);
  read_opt(j, "timescale_s", s.timescale_s);
  read_opt(j, "jitter_bpm", s.jitter_bpm);
  read_opt(j, "scans_per_subject", s.scans_per_subject);
  if (j.contains("defect_mix")) {
    s.defect_mix.clear();
    read_opt(j, "defect_mix", s.defect_mix);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  const auto& s = simulate;
  if (s.n_scans == 0) throw ValidationError("simulate.n_scans must be positive");
  if (!(s.snr > 0.0)) throw ValidationError("simulate.snr must be positive");
  if (!(s.tr_seconds > 0.0)) throw ValidationError("simulate.tr_seconds must be positive");
  if (!(s.ppg_sample_rate_hz >= 20.0))
    throw ValidationError("simulate.ppg_sample_rate_hz must be at least 20");
  if (!(s.mean_hr_min >= 50.0 && s.mean_hr_max <= 150.0 && s.mean_hr_min <= s.mean_hr_max))
    throw ValidationError("simulate.mean_hr_range must lie within [50, 150] and be ordered");
  if (!(s.depth_min >= 0.0 && s.depth_min <= s.depth_max))
    throw ValidationError("simulate.depth_range must be non-negative and ordered");
  if (!(s.timescale_s > 0.0)) throw ValidationError("simulate.timescale_s must be positive");
  if (!(s.jitter_bpm >= 0.0)) throw ValidationError("simulate.jitter_bpm must be non-negative");
  if (s.scans_per_subject == 0) throw ValidationError("simulate.scans_per_subject must be positive");
  if (s.n_frames < 2) throw ValidationError("simulate.n_frames must be at least 2");
  qc.validate();
  window.validate();
  if (train_window_stride == 0) throw ValidationError("train_window_stride must be positive");
  if (model_preset != "default" && model_preset != "small")
    throw ValidationError("model_preset must be 'default' or 'small'");
  optimizer.validate();
  if (cv.k < 2) throw ValidationError("cv.k must be at least 2");
  if (!(cv.val_fraction > 0.0 && cv.val_fraction < 1.0))
    throw ValidationError("cv.val_fraction must lie in (0, 1)");
  if (compare_labels.empty()) throw ValidationError("compare.labels must not be empty");
  if (jobs < 1) throw ValidationError("jobs must be at least 1");
}

nn::ModelConfig ExperimentConfig::model_for(std::size_t n_channels, std::uint64_t seed) const {
  nn::ModelConfig m = model_preset == "small" ? nn::ModelConfig::small(n_channels) : nn::ModelConfig{};
  hrvfmri::overlay(model_overrides, m);
  m.n_channels = n_channels;
  m.window_len = window.window_len;
  m.seed = seed;
  m.validate();
  return m;
}

void overlay(const json& j, ExperimentConfig& c) {
  require_keys(j, {"data_root", "out_root", "seed", "jobs", "simulate", "qc", "window",
                   "train_window_stride", "model_preset", "model", "optimizer", "cv", "compare"},
               "config");
  if (j.contains("data_root")) {
    std::string p;
    read_opt(j, "data_root", p);
    c.data_root = p;
  }
  if (j.contains("out_root")) {
    std::string p;
    read_opt(j, "out_root", p);
    c.out_root = p;
  }
  read_opt(j, "seed", c.seed);
  read_opt(j, "jobs", c.jobs);
  if (j.contains("simulate")) overlay_simulate(j["simulate"], c.simulate);
  if (j.contains("qc")) hrvfmri::overlay(j["qc"], c.qc);
  if (j.contains("window")) hrvfmri::overlay(j["window"], c.window);
  read_opt(j, "train_window_stride", c.train_window_stride);
  read_opt(j, "model_preset", c.model_preset);
  if (j.contains("model")) {
    // Validate keys now; values are applied per run in model_for.
    nn::ModelConfig probe;
    hrvfmri::overlay(j["model"], probe);
    for (auto it = j["model"].begin(); it != j["model"].end(); ++it)
      c.model_overrides[it.key()] = it.value();
  }
  if (j.contains("optimizer")) hrvfmri::overlay(j["optimizer"], c.optimizer);
  if (j.contains("cv")) {
    const auto& cv = j["cv"];
    require_keys(cv, {"k", "group_by_subject", "val_fraction", "target", "target_scaling"}, "cv");
    read_opt(cv, "k", c.cv.k);
    read_opt(cv, "group_by_subject", c.cv.group_by_subject);
    read_opt(cv, "val_fraction", c.cv.val_fraction);
    if (cv.contains("target")) {
      std::string t;
      read_opt(cv, "target", t);
      c.cv.target = target_from_name(t);
    }
    if (cv.contains("target_scaling")) {
      std::string t;
      read_opt(cv, "target_scaling", t);
      c.cv.target_scaling = scaling_from_name(t);
    }
  }
  if (j.contains("compare")) {
    const auto& cmp = j["compare"];
    require_keys(cmp, {"labels"}, "compare");
    if (cmp.contains("labels")) {
      std::vector<std::string> names;
      read_opt(cmp, "labels", names);
      c.compare_labels.clear();
      for (const auto& n : names) {
        try {
          c.compare_labels.push_back(label_from_name(n));
        } catch (const Error&) {
          throw ValidationError("unknown ROI configuration '" + n + "'");
        }
      }
    }
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  ExperimentConfig cfg;
  overlay(j, cfg);
  return cfg;
}

json to_json(const ExperimentConfig& c) {
  json mix = json::object();
  for (const auto& [k, v] : c.simulate.defect_mix) mix[k] = v;
  const auto& s = c.simulate;
  json labels = json::array();
  for (auto l : c.compare_labels) labels.push_back(label_name(l));
  return {
      {"data_root", c.data_root.string()},
      {"out_root", c.out_root.string()},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"simulate",
       {{"n_scans", s.n_scans},
        {"n_channels", s.n_channels},
        {"roi_label", label_name(s.roi_label)},
        {"snr", s.snr},
        {"n_frames", s.n_frames},
        {"tr_seconds", s.tr_seconds},
        {"ppg_sample_rate_hz", s.ppg_sample_rate_hz},
        {"mean_hr_range", {s.mean_hr_min, s.mean_hr_max}},
        {"depth_range", {s.depth_min, s.depth_max}},
        {"timescale_s", s.timescale_s},
        {"jitter_bpm", s.jitter_bpm},
        {"scans_per_subject", s.scans_per_subject},
        {"defect_mix", mix}}},
      {"qc", hrvfmri::to_json(c.qc)},
      {"window", hrvfmri::to_json(c.window)},
      {"train_window_stride", c.train_window_stride},
      {"model_preset", c.model_preset},
      {"model", c.model_overrides},
      {"optimizer", hrvfmri::to_json(c.optimizer)},
      {"cv",
       {{"k", c.cv.k},
        {"group_by_subject", c.cv.group_by_subject},
        {"val_fraction", c.cv.val_fraction},
        {"target", target_name(c.cv.target)},
        {"target_scaling", scaling_name(c.cv.target_scaling)}}},
      {"compare", {{"labels", labels}}},
  };
}

void write_run_json(const std::filesystem::path& dir, const std::string& command,
                    const ExperimentConfig& cfg, const json& extra) {
  std::filesystem::create_directories(dir);
  json j;
  j["command"] = command;
  j["config"] = to_json(cfg);
  j["master_seed"] = cfg.seed;
  j["derived_seeds"] = {{"folds", derive_seed(cfg.seed, "folds")},
                        {"defects", derive_seed(cfg.seed, "defects")},
                        {"roi_subset", derive_seed(cfg.seed, "roi-subset")},
                        {"train_fold_0", derive_seed(cfg.seed, "train", 0)},
                        {"model_fold_0", derive_seed(cfg.seed, "model", 0)}};
  j["scan_seed_rule"] = "master_seed + scan index";
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  std::ofstream o(dir / "run.json");
  if (!o) throw DataError("cannot write " + (dir / "run.json").string());
  o << j.dump(2) << '\n';
}

}  // namespace hrvfmri::pipeline
