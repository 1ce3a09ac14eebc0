// SPDX-License-Identifier: Apache-2.0
//
// hrvfmri: batch front end. Exit codes: 0 success, 2 validation error,
// 3 data error, 4 numerical divergence.
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "hrvfmri/error.hpp"
#include "hrvfmri/pipeline.hpp"

namespace fs = std::filesystem;
using namespace hrvfmri;

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::optional<int> jobs;
  std::string log_level = "info";
};

pipeline::ExperimentConfig resolve(const GlobalFlags& g) {
  pipeline::ExperimentConfig cfg;
  if (!g.config.empty()) cfg = pipeline::load_config(g.config);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out.empty()) cfg.out_root = g.out;
  if (!g.data.empty()) cfg.data_root = g.data;
  if (g.jobs) cfg.jobs = *g.jobs;
  cfg.validate();
  return cfg;
}

// "None=0.5,Clipping=0.5" or a JSON object.
std::map<std::string, double> parse_mix(const std::string& text) {
  std::map<std::string, double> mix;
  if (!text.empty() && text.front() == '{') {
    try {
      for (const auto& [k, v] : json::parse(text).items()) mix[k] = v.get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("--defect-mix: ") + e.what());
    }
    return mix;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("--defect-mix entry '" + item + "' lacks '='");
    try {
      mix[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("--defect-mix entry '" + item + "' has a malformed proportion");
    }
  }
  return mix;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HRV reconstruction from multi-ROI BOLD time series"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  GlobalFlags g;
  app.add_option("--config", g.config, "Experiment configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_option("--out", g.out, "Output root (overrides the config)");
  app.add_option("--data", g.data, "Data root holding scan directories (overrides the config)");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");

  auto* sim = app.add_subcommand("simulate", "Write a synthetic scan corpus to the data root");
  std::optional<std::size_t> n_scans;
  std::string mix_text;
  sim->add_option("--n-scans", n_scans, "Number of scans");
  sim->add_option("--defect-mix", mix_text, "Proportions, e.g. None=0.8,Clipping=0.2");

  auto* qc = app.add_subcommand("qc", "Classify PPG quality and write the filtered manifest");
  auto* win = app.add_subcommand("windows", "Report sliding-window sample counts per scan");
  bool cache = false;
  win->add_flag("--cache", cache, "Also write binary window caches");
  auto* train = app.add_subcommand("train-cv", "k-fold cross-validated training and evaluation");
  auto* cmp = app.add_subcommand("compare-rois", "Cross-validate every ROI configuration and compare");
  auto* rep = app.add_subcommand("report", "Render SVG plots and a markdown summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  spdlog::set_default_logger(spdlog::default_logger()->clone("hrvfmri"));
  spdlog::set_pattern("[%l] %v");
  const auto level = spdlog::level::from_str(g.log_level);
  if (level == spdlog::level::off && g.log_level != "off") {
    std::fprintf(stderr, "error: unknown log level '%s'\n", g.log_level.c_str());
    return 2;
  }
  spdlog::set_level(level);

  try {
    pipeline::ExperimentConfig cfg = resolve(g);
    if (sim->parsed()) {
      if (n_scans) cfg.simulate.n_scans = *n_scans;
      if (!mix_text.empty()) cfg.simulate.defect_mix = parse_mix(mix_text);
      cfg.validate();
      const auto m = pipeline::cmd_simulate(cfg);
      pipeline::write_run_json(cfg.data_root, "simulate", cfg, {{"n_scans_written", m.size()}});
    } else if (qc->parsed()) {
      const auto s = pipeline::cmd_qc(cfg);
      json extra = {{"kept", s.kept}, {"n_scans", s.rows.size()}};
      pipeline::write_run_json(cfg.out_root, "qc", cfg, extra);
      std::cout << s.kept << " of " << s.rows.size() << " scans kept";
      if (s.accuracy) std::cout << " (accuracy vs labels " << *s.accuracy << ")";
      std::cout << '\n';
    } else if (win->parsed()) {
      const auto w = pipeline::cmd_windows(cfg, cache);
      pipeline::write_run_json(cfg.out_root, "windows", cfg, {{"n_scans", w.size()}});
    } else if (train->parsed()) {
      pipeline::write_run_json(cfg.out_root, "train-cv", cfg);
      const auto r = pipeline::cmd_train_cv(cfg);
      std::cout << "mean held-out r: " << r.report["across_scans"]["pearson_r"]["mean"].dump()
                << " over " << r.evals.size() << " scans\n";
    } else if (cmp->parsed()) {
      pipeline::write_run_json(cfg.out_root, "compare-rois", cfg);
      const auto c = pipeline::cmd_compare_rois(cfg);
      for (const auto& l : c.labels)
        std::cout << l << ": mean r " << c.summary.at(l).at("pearson_r").mean << '\n';
    } else if (rep->parsed()) {
      const auto r = pipeline::cmd_report(cfg.out_root);
      pipeline::write_run_json(cfg.out_root / "report", "report", cfg, {{"n_svgs", r.svgs.size()}});
      std::cout << "wrote " << r.svgs.size() << " plots and " << r.summary.string() << '\n';
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return exit_code(ErrorKind::Data);
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return 1;
  }
  return 0;
}
