// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hrvfmri/error.hpp"
#include "hrvfmri/pipeline.hpp"
#include "hrvfmri/svg.hpp"

namespace fs = std::filesystem;

namespace hrvfmri::pipeline {

namespace {

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream o(p);
  if (!o) throw DataError("cannot write " + p.string());
  o << s;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(p.string() + " is not valid JSON: " + e.what());
  }
}

struct PredictionFile {
  std::vector<double> predicted, measured;
};

PredictionFile read_prediction(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  std::string line;
  std::getline(in, line);
  if (line != "frame,predicted,measured") throw DataError("unexpected header in " + p.string());
  PredictionFile out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw DataError("malformed row in " + p.string());
    const std::string pv = line.substr(c1 + 1, c2 - c1 - 1);
    try {
      out.predicted.push_back(pv.empty() ? std::numeric_limits<double>::quiet_NaN() : std::stod(pv));
      out.measured.push_back(std::stod(line.substr(c2 + 1)));
    } catch (const std::exception&) {
      throw DataError("malformed number in " + p.string());
    }
  }
  return out;
}

std::string fmt(const json& v) {
  if (v.is_null()) return "n/a";
  if (v.is_number_float()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v.get<double>());
    return buf;
  }
  return v.dump();
}

void report_cv(const fs::path& root, const fs::path& out, ReportOutput& res, std::ostringstream& md) {
  std::vector<std::string> missing;
  for (const char* f : {"report.json", "scan_metrics.csv"})
    if (!fs::exists(root / f)) missing.emplace_back(f);
  if (!fs::is_directory(root / "predictions")) missing.emplace_back("predictions/");
  if (!missing.empty()) {
    std::string m;
    for (const auto& s : missing) m += (m.empty() ? "" : ", ") + s;
    throw DataError("missing train-cv artifacts in " + root.string() + ": " + m);
  }
  const json rep = read_json(root / "report.json");
  const auto evals = metrics::read_scan_metrics_csv(root / "scan_metrics.csv");

  for (const auto& e : evals) {
    const fs::path pf = root / "predictions" / (e.scan_id + ".csv");
    if (!fs::exists(pf)) throw DataError("missing prediction file: predictions/" + e.scan_id + ".csv");
    const auto p = read_prediction(pf);
    char title[256];
    std::snprintf(title, sizeof title, "%s  MAE %.4g  MSE %.4g  r %s  DTW %.4g", e.scan_id.c_str(),
                  e.mae, e.mse, e.pearson_r ? fmt(json(*e.pearson_r)).c_str() : "n/a", e.dtw);
    const fs::path svg = out / ("overlay_" + e.scan_id + ".svg");
    write_text(svg, svg::line_plot(title,
                                   {{"measured", "#333333", p.measured},
                                    {"reconstructed", "#d62728", p.predicted}},
                                   1.0, "frame", "HRV (s)"));
    res.svgs.push_back(svg);
  }
  std::vector<std::pair<double, double>> pts;
  for (const auto& e : evals)
    if (e.pearson_r) pts.emplace_back(e.hrv_std, *e.pearson_r);
  const fs::path scatter = out / "variability_scatter.svg";
  write_text(scatter, svg::scatter_plot("HRV variability vs reconstruction accuracy", pts,
                                        "std of measured HRV (s)", "Pearson r"));
  res.svgs.push_back(scatter);

  md << "## Cross-validation\n\n"
     << "- scans evaluated: " << fmt(rep.value("n_evaluated", json(nullptr))) << " of "
     << fmt(rep.value("n_scans", json(nullptr))) << ", k = " << fmt(rep.value("k", json(nullptr)))
     << ", fold unit: " << rep.value("fold_unit", std::string("scan"))
     << ", target: " << rep.value("target_source", std::string("?")) << "\n"
     << "- status: " << rep.value("status", std::string("?")) << "\n\n"
     << "| metric | mean over scans | median over scans | mean over folds |\n"
     << "|---|---|---|---|\n";
  for (const char* m : {"pearson_r", "mae", "mse", "dtw"}) {
    const json a = rep["across_scans"].value(m, json::object());
    const json f = rep["across_folds_then_scans"].value(m, json::object());
    md << "| " << m << " | " << fmt(a.value("mean", json(nullptr))) << " | "
       << fmt(a.value("median", json(nullptr))) << " | " << fmt(f.value("mean", json(nullptr)))
       << " |\n";
  }
  const json va = rep.value("variability_vs_accuracy", json::object());
  md << "\nVariability vs accuracy: Spearman " << fmt(va.value("spearman", json(nullptr)))
     << ", Pearson " << fmt(va.value("pearson", json(nullptr))) << ", slope "
     << fmt(va.value("slope", json(nullptr))) << ".\n\n"
     << "Plots: " << evals.size() << " overlay plots (`overlay_<scan>.svg`) and "
     << "`variability_scatter.svg`.\n\n";
}

void report_comparison(const fs::path& root, const fs::path& out, ReportOutput& res,
                       std::ostringstream& md) {
  const json cmp = read_json(root / "comparison.json");
  std::vector<svg::ViolinGroup> groups;
  std::vector<std::string> missing;
  for (const auto& label : cmp.at("labels")) {
    const std::string name = label.get<std::string>();
    const fs::path v = root / ("violin_" + name + ".csv");
    if (!fs::exists(v)) {
      missing.push_back(v.filename().string());
      continue;
    }
    std::ifstream in(v);
    std::string line;
    std::getline(in, line);
    svg::ViolinGroup g{name, {}};
    while (std::getline(in, line)) {
      const auto c1 = line.find(','), c2 = line.find(',', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos) continue;
      const std::string r = line.substr(c1 + 1, c2 - c1 - 1);
      if (!r.empty()) g.values.push_back(std::stod(r));
    }
    groups.push_back(std::move(g));
  }
  if (!missing.empty()) {
    std::string m;
    for (const auto& s : missing) m += (m.empty() ? "" : ", ") + s;
    throw DataError("missing compare-rois artifacts in " + root.string() + ": " + m);
  }
  const fs::path svg = out / "violin_pearson_r.svg";
  write_text(svg, svg::violin_plot("Per-scan Pearson r by ROI configuration", groups, "Pearson r"));
  res.svgs.push_back(svg);

  md << "## ROI configuration comparison\n\n";
  if (cmp.contains("note")) md << "> " << cmp["note"].get<std::string>() << "\n\n";
  md << "Improvement is " << cmp.value("improvement_definition", std::string()) << ". Test: "
     << cmp.value("test", std::string()) << ".\n\n"
     << "| configuration | mean r | median r | mean MAE | improvement of best (%) |\n"
     << "|---|---|---|---|---|\n";
  for (const auto& label : cmp["labels"]) {
    const std::string name = label.get<std::string>();
    const json s = cmp["summary"][name];
    md << "| " << name << " | " << fmt(s["pearson_r"]["mean"]) << " | "
       << fmt(s["pearson_r"]["median"]) << " | " << fmt(s["mae"]["mean"]) << " | "
       << fmt(cmp["improvement_pct"][name]) << " |\n";
  }
  md << "\nBest configuration: " << cmp.value("best_label", std::string("?"))
     << ".\n\nPaired p-values (rows vs columns):\n\n|   |";
  for (const auto& l : cmp["labels"]) md << ' ' << l.get<std::string>() << " |";
  md << "\n|---|";
  for (std::size_t i = 0; i < cmp["labels"].size(); ++i) md << "---|";
  md << '\n';
  for (std::size_t i = 0; i < cmp["labels"].size(); ++i) {
    md << "| " << cmp["labels"][i].get<std::string>() << " |";
    for (const auto& p : cmp["p_matrix"][i]) md << ' ' << fmt(p) << " |";
    md << '\n';
  }
  md << "\nPlot: `violin_pearson_r.svg` (white circle median, black line mean).\n\n";
}

}  // namespace

ReportOutput cmd_report(const fs::path& root) {
  const bool has_cv = fs::exists(root / "scan_metrics.csv") || fs::exists(root / "report.json");
  const bool has_cmp = fs::exists(root / "comparison.json");
  if (!has_cv && !has_cmp)
    throw DataError("no evaluation artifacts in " + root.string() +
                    "; expected report.json, scan_metrics.csv and predictions/<scan>.csv "
                    "(from train-cv) or comparison.json and violin_<label>.csv (from compare-rois)");
  const fs::path out = root / "report";
  fs::create_directories(out);
  ReportOutput res;
  std::ostringstream md;
  md << "# HRV reconstruction report\n\n";
  if (has_cv) report_cv(root, out, res, md);
  if (has_cmp) report_comparison(root, out, res, md);
  res.summary = out / "summary.md";
  write_text(res.summary, md.str());
  return res;
}

}  // namespace hrvfmri::pipeline
