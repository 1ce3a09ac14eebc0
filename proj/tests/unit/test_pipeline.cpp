// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fstream>
#include <set>
#include <sstream>

#include "hrvfmri/error.hpp"
#include "hrvfmri/pipeline.hpp"
#include "hrvfmri/rng.hpp"
#include "support/temp_dir.hpp"

using namespace hrvfmri;
using namespace hrvfmri::pipeline;
namespace fs = std::filesystem;
using hrvfmri::testing::TempDir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fast settings: short scans, few channels, one or two epochs.
ExperimentConfig quick_config(const TempDir& dir, std::size_t n_scans = 6) {
  ExperimentConfig c;
  c.data_root = dir / "data";
  c.out_root = dir / "out";
  c.seed = 11;
  c.simulate.n_scans = n_scans;
  c.simulate.n_channels = 16;
  c.simulate.n_frames = 90;
  c.model_preset = "small";
  c.train_window_stride = 3;
  c.optimizer.max_epochs = 2;
  c.optimizer.batch_size = 16;
  c.cv.k = 3;
  return c;
}

std::vector<TrainingScan> random_scans(std::size_t n, std::size_t frames, std::size_t ch,
                                       std::uint64_t seed) {
  std::vector<TrainingScan> out;
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    TrainingScan s;
    s.scan_id = "scan_" + std::to_string(100 + i);
    s.subject_id = "sub_" + std::to_string(i);
    for (std::size_t c = 0; c < ch; ++c) s.roi.channels.push_back({"r" + std::to_string(c)});
    s.roi.values = Matrix(frames, ch);
    for (double& v : s.roi.values.storage()) v = rng.normal();
    for (std::size_t t = 0; t < frames; ++t)
      s.target.values.push_back(0.05 + 0.01 * s.roi.values(t, 0) + 0.001 * rng.normal());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(Config, ParsesAndRoundTrips) {
  TempDir dir("cfg");
  std::ofstream(dir / "c.json") << R"({"seed": 5, "simulate": {"n_scans": 7, "defect_mix":
      {"None": 0.75, "Clipping": 0.25}}, "cv": {"k": 4, "target_scaling": "fold"},
      "optimizer": {"max_epochs": 3, "learning_rate": 0.01}})";
  const auto c = load_config(dir / "c.json");
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.simulate.n_scans, 7u);
  EXPECT_EQ(c.cv.k, 4u);
  EXPECT_EQ(c.cv.target_scaling, TargetScaling::Fold);
  EXPECT_EQ(c.optimizer.max_epochs, 3u);
  EXPECT_EQ(c.optimizer.adam.learning_rate, 0.01);
  ExperimentConfig back;
  overlay(to_json(c), back);
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  ExperimentConfig c;
  EXPECT_THROW(overlay(json::parse(R"({"sed": 1})"), c), ValidationError);
  EXPECT_THROW(overlay(json::parse(R"({"cv": {"kk": 1}})"), c), ValidationError);
  EXPECT_THROW(overlay(json::parse(R"({"cv": {"target": "ecg"}})"), c), ValidationError);
  EXPECT_THROW(overlay(json::parse(R"({"simulate": {"roi_label": "Atlas9"}})"), c),
               ValidationError);
  TempDir dir("cfg");
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_config(dir / "bad.json"), ValidationError);
  EXPECT_THROW(load_config(dir / "missing.json"), ValidationError);
}

TEST(AssignDefects, LargestRemainderCountsAndDeterminism) {
  const std::map<std::string, double> mix = {{"None", 0.5}, {"Clipping", 0.3}, {"Gaps", 0.2}};
  const auto a = assign_defects(mix, 7, 3);
  ASSERT_EQ(a.size(), 7u);
  std::map<sim::DefectKind, int> n;
  for (auto k : a) ++n[k];
  // Exact 3.5 / 2.1 / 1.4: floors 3/2/1, the single extra goes to the largest remainder.
  EXPECT_EQ(n[sim::DefectKind::None], 4);
  EXPECT_EQ(n[sim::DefectKind::Clipping], 2);
  EXPECT_EQ(n[sim::DefectKind::Gaps], 1);
  EXPECT_EQ(assign_defects(mix, 7, 3), a);
  EXPECT_THROW(assign_defects({{"None", 0.6}, {"Gaps", 0.3}}, 5, 1), ValidationError);
  EXPECT_THROW(assign_defects({{"Sparkles", 1.0}}, 5, 1), ValidationError);
  EXPECT_THROW(assign_defects({{"None", 1.5}, {"Gaps", -0.5}}, 5, 1), ValidationError);
}

TEST(Simulate, DeterministicAndClean) {
  TempDir a("sim"), b("sim");
  auto ca = quick_config(a, 10), cb = quick_config(b, 10);
  const auto ma = cmd_simulate(ca);
  cmd_simulate(cb);
  ASSERT_EQ(ma.size(), 10u);
  for (const auto& m : ma) {
    EXPECT_EQ(m.defect, "None");
    for (const char* f : {"roi.csv", "ppg.csv", "hrv.csv"})
      EXPECT_EQ(slurp(ca.data_root / m.scan_id / f), slurp(cb.data_root / m.scan_id / f))
          << m.scan_id << " " << f;
  }
  EXPECT_EQ(slurp(ca.data_root / "manifest.csv"), slurp(cb.data_root / "manifest.csv"));
  const auto q = cmd_qc(ca);
  EXPECT_EQ(q.kept, 10u);
  EXPECT_EQ(q.class_counts.at("Clean"), 10u);
  ASSERT_TRUE(q.accuracy.has_value());
  EXPECT_EQ(*q.accuracy, 1.0);
}

TEST(Simulate, RefusesForeignScansInDataRoot) {
  TempDir dir("sim");
  auto c = quick_config(dir, 2);
  fs::create_directories(c.data_root / "other");
  std::ofstream(c.data_root / "other" / "roi.csv") << "x\n";
  EXPECT_THROW(cmd_simulate(c), ValidationError);
}

TEST(Qc, ClassifiesDropsAndCorrects) {
  TempDir dir("qc");
  auto c = quick_config(dir, 7);
  c.simulate.defect_mix = {{"None", 1.0 / 7}, {"CorrectableSpikes", 2.0 / 7},
                           {"UncorrectableSpikes", 1.0 / 7}, {"Clipping", 1.0 / 7},
                           {"NoRecording", 2.0 / 7}};
  c.simulate.n_frames = 150;
  const auto man = cmd_simulate(c);
  // Drop the PPG file of one scan entirely.
  std::string removed;
  for (const auto& m : man)
    if (m.defect == "None") removed = m.scan_id;
  ASSERT_FALSE(removed.empty());
  {
    auto rec = read_scan(c.data_root / removed);
    rec.ppg.reset();
    fs::remove_all(c.data_root / removed);
    write_scan(rec, c.data_root / removed);
  }
  const auto q = cmd_qc(c);
  ASSERT_EQ(q.rows.size(), 7u);
  std::set<std::string> kept_ids;
  for (const auto& r : q.rows) {
    if (r.scan_id == removed) {
      EXPECT_EQ(r.label, QualityLabel::NoRecording);
      EXPECT_FALSE(r.kept);
    }
    if (r.kept) kept_ids.insert(r.scan_id);
    EXPECT_EQ(r.kept, ppg::is_usable(r.label));
    EXPECT_EQ(fs::exists(c.data_root / r.scan_id / "ppg_corrected.csv"),
              r.label == QualityLabel::CorrectableSpikes)
        << r.scan_id;
  }
  EXPECT_EQ(kept_ids.size(), 2u);  // the two correctable scans
  std::set<std::string> listed;
  for (const auto& m : read_manifest(c.out_root / "manifest_kept.csv")) listed.insert(m.scan_id);
  EXPECT_EQ(listed, kept_ids);
  for (const char* f : {"qc_report.csv", "qc_summary.json"}) EXPECT_TRUE(fs::exists(c.out_root / f));
  const auto summary = json::parse(slurp(c.out_root / "qc_summary.json"));
  EXPECT_EQ(summary["summary"], "2 of 7 scans kept for training");
}

TEST(Qc, EmptyDataRootIsDataError) {
  TempDir dir("qc");
  auto c = quick_config(dir);
  fs::create_directories(c.data_root);
  EXPECT_THROW(cmd_qc(c), DataError);
  c.data_root = dir / "nope";
  EXPECT_THROW(cmd_qc(c), DataError);
}

TEST(Windows, CountsAndCache) {
  TempDir dir("win");
  auto c = quick_config(dir, 3);
  cmd_simulate(c);
  const auto w = cmd_windows(c, true);
  ASSERT_EQ(w.size(), 3u);
  for (const auto& x : w) {
    EXPECT_EQ(x.n_frames, 90u);
    EXPECT_EQ(x.n_windows, 26u);
    EXPECT_TRUE(fs::exists(dataset::window_cache_path(c.out_root / "cache", x.scan_id, c.window)));
  }
  EXPECT_TRUE(fs::exists(c.out_root / "windows_report.csv"));
}

TEST(TrainCv, EndToEndDeterministicWithReport) {
  TempDir a("cv"), b("cv");
  auto ca = quick_config(a), cb = quick_config(b);
  cmd_simulate(ca);
  cmd_simulate(cb);
  cmd_qc(ca);
  cmd_qc(cb);
  const auto r = cmd_train_cv(ca);
  cmd_train_cv(cb);
  EXPECT_EQ(r.folds.size(), 3u);
  ASSERT_EQ(r.evals.size(), 6u);
  for (const auto& e : r.evals) {
    EXPECT_TRUE(std::isfinite(e.mae));
    EXPECT_EQ(e.n_frames, 90u - 64u);
  }
  EXPECT_EQ(slurp(ca.out_root / "report.json"), slurp(cb.out_root / "report.json"));
  EXPECT_EQ(slurp(ca.out_root / "scan_metrics.csv"), slurp(cb.out_root / "scan_metrics.csv"));
  EXPECT_EQ(slurp(ca.out_root / "fold_00" / "model.ckpt"),
            slurp(cb.out_root / "fold_00" / "model.ckpt"));

  // Every scan is tested exactly once.
  std::multiset<std::string> tested;
  for (const auto& f : r.folds) tested.insert(f.test_ids.begin(), f.test_ids.end());
  EXPECT_EQ(tested.size(), 6u);
  EXPECT_EQ(std::set<std::string>(tested.begin(), tested.end()).size(), 6u);

  const auto rep = cmd_report(ca.out_root);
  EXPECT_EQ(rep.svgs.size(), 6u + 1u);  // one overlay per scan plus the scatter
  for (const auto& svg : rep.svgs) {
    boost::property_tree::ptree tree;
    EXPECT_NO_THROW(boost::property_tree::read_xml(svg.string(), tree)) << svg;
    EXPECT_EQ(tree.count("svg"), 1u) << svg;
  }
  EXPECT_TRUE(fs::exists(rep.summary));
}

TEST(TrainCv, RejectsTooManyFoldsAndMissingManifest) {
  TempDir dir("cv");
  auto c = quick_config(dir, 4);
  cmd_simulate(c);
  EXPECT_THROW(cmd_train_cv(c), DataError);  // qc not run yet
  cmd_qc(c);
  c.cv.k = 5;
  EXPECT_THROW(cmd_train_cv(c), ValidationError);
}

TEST(Report, EmptyRootNamesExpectedFiles) {
  TempDir dir("rep");
  try {
    cmd_report(dir.path());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("report.json"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("comparison.json"), std::string::npos);
  }
}

TEST(SelectChannels, SubsetsAndDeterminism) {
  const auto cfg = make_scaled_roi_config(RoiConfigLabel::DynamicPlusWM, 0.2);
  std::vector<RoiChannel> ch;
  for (const auto& [group, n] : cfg.group_counts)
    for (std::size_t i = 0; i < n; ++i) ch.push_back({"c", group});
  std::size_t dyn = 0, wm = 0;
  for (const auto& c : ch) (c.group == RoiGroup::WhiteMatter ? wm : dyn)++;
  EXPECT_EQ(select_channels(ch, RoiConfigLabel::DynamicPlusWM, 1).size(), ch.size());
  EXPECT_EQ(select_channels(ch, RoiConfigLabel::DynamicOnly, 1).size(), dyn);
  EXPECT_EQ(select_channels(ch, RoiConfigLabel::StaticPlusWM, 1).size(),
            static_cast<std::size_t>(std::llround(dyn * 360.0 / 580.0)) + wm);
  EXPECT_EQ(select_channels(ch, RoiConfigLabel::StructuralOnly, 1).size(),
            static_cast<std::size_t>(std::llround(ch.size() * 69.0 / 628.0)));
  const auto a = select_channels(ch, RoiConfigLabel::StructuralOnly, 4);
  EXPECT_EQ(a, select_channels(ch, RoiConfigLabel::StructuralOnly, 4));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_NE(a, select_channels(ch, RoiConfigLabel::StructuralOnly, 5));
}

TEST(CompareRois, OutputsShape) {
  TempDir dir("cmp");
  auto c = quick_config(dir, 6);
  c.optimizer.max_epochs = 1;
  c.cv.k = 2;
  cmd_simulate(c);
  cmd_qc(c);
  const auto cmp = cmd_compare_rois(c);
  ASSERT_EQ(cmp.labels.size(), 4u);
  ASSERT_EQ(cmp.p_matrix.size(), 4u);
  for (const auto& row : cmp.p_matrix) EXPECT_EQ(row.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(cmp.p_matrix[i][i], 1.0);
    EXPECT_TRUE(fs::exists(c.out_root / ("violin_" + cmp.labels[i] + ".csv")));
    EXPECT_TRUE(fs::exists(c.out_root / cmp.labels[i] / "report.json"));
  }
  EXPECT_TRUE(fs::exists(c.out_root / "comparison.json"));
  const auto rep = cmd_report(c.out_root);
  EXPECT_FALSE(rep.svgs.empty());
}

TEST(CompareRois, NeedsWhiteMatterChannels) {
  TempDir dir("cmp");
  auto c = quick_config(dir, 4);
  c.simulate.roi_label = RoiConfigLabel::DynamicOnly;
  cmd_simulate(c);
  cmd_qc(c);
  EXPECT_THROW(cmd_compare_rois(c), DataError);
}

// Changing every value of the scans held out in fold 0 must leave fold 0's
// normalizer and trained model byte-identical.
TEST(Leakage, TestFoldContentsDoNotReachTraining) {
  TempDir a("leak"), b("leak");
  ExperimentConfig c;
  c.seed = 3;
  c.model_preset = "small";
  c.train_window_stride = 4;
  c.optimizer.max_epochs = 1;
  c.cv.k = 4;
  auto scans = random_scans(12, 80, 5, 9);
  run_cv(c, scans, a.path());
  const auto folds = dataset::assign_folds(
      [&] {
        std::vector<std::string> ids;
        for (const auto& s : scans) ids.push_back(s.scan_id);
        return ids;
      }(),
      c.cv.k, c.seed);
  const auto held = folds.test_ids(0);
  ASSERT_FALSE(held.empty());
  for (auto& s : scans)
    if (std::find(held.begin(), held.end(), s.scan_id) != held.end()) {
      for (double& v : s.roi.values.storage()) v = 1e3 * v + 50.0;
      for (double& v : s.target.values) v *= 7.0;
    }
  run_cv(c, scans, b.path());
  EXPECT_EQ(slurp(a / "fold_00" / "model.ckpt"), slurp(b / "fold_00" / "model.ckpt"));
  EXPECT_NE(slurp(a / "fold_01" / "model.ckpt"), slurp(b / "fold_01" / "model.ckpt"));
}
