// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "hrvfmri/error.hpp"
#include "hrvfmri/ppg.hpp"
#include "hrvfmri/rng.hpp"
#include "hrvfmri/simulator.hpp"

using namespace hrvfmri;

namespace {

PpgSignal clean_ppg(std::uint64_t seed, std::size_t frames = 150, double hr = 75.0) {
  sim::CardiacSimConfig c;
  c.duration_frames = frames;
  c.mean_hr_bpm = hr;
  c.seed = seed;
  return sim::synth_ppg(sim::gen_beat_times(c), 100.0, c.duration_s(), {}, seed);
}

PpgSignal noiseless_train(double period_s, double duration_s) {
  PpgSignal p;
  const auto n = static_cast<std::size_t>(duration_s * 100.0);
  p.values.assign(n, 0.0);
  // Every pulse peak lies inside the recording.
  for (double tb = 0.5 * period_s; tb < duration_s; tb += period_s)
    for (std::size_t i = 0; i < n; ++i) p.values[i] += sim::pulse_template(i / 100.0 - tb);
  return p;
}

}  // namespace

TEST(ClassifyQuality, AllZeroIsNoRecording) {
  PpgSignal p;
  p.values.assign(6000, 0.0);
  EXPECT_EQ(ppg::classify_quality(p).value, QualityLabel::NoRecording);
}

TEST(ClassifyQuality, ScaledCleanIsLowAmplitude) {
  auto p = clean_ppg(1);
  EXPECT_EQ(ppg::classify_quality(p).value, QualityLabel::Clean);
  for (double& v : p.values) v *= 0.02;
  EXPECT_EQ(ppg::classify_quality(p).value, QualityLabel::LowAmplitude);
}

TEST(ClassifyQuality, FiveSpikesAreCorrectable) {
  auto p = clean_ppg(2);
  ASSERT_EQ(p.values.size(), 12000u);  // 120 s at 100 Hz
  sim::DefectSpec d{sim::DefectKind::CorrectableSpikes};
  d.spike_count = 5;
  d.spike_height = 20.0;
  sim::apply_defect(p.values, 100.0, d, 9);
  const auto q = ppg::classify_quality(p);
  EXPECT_EQ(q.value, QualityLabel::CorrectableSpikes);
  EXPECT_NEAR(q.diagnostics.at("spike_fraction"), 5.0 / 12000.0, 1e-12);
}

TEST(ClassifyQuality, ConstantMiddleIsGaps) {
  auto p = clean_ppg(3);
  const std::size_t n = p.values.size();
  for (std::size_t i = 2 * n / 5; i < 3 * n / 5; ++i) p.values[i] = p.values[2 * n / 5];
  EXPECT_EQ(ppg::classify_quality(p).value, QualityLabel::Gaps);
}

TEST(ClassifyQuality, TotalOnDegenerateInputs) {
  for (const auto& vals : {std::vector<double>{}, std::vector<double>(500, 3.0),
                           std::vector<double>{1.0}, std::vector<double>{1.0, -1.0}}) {
    PpgSignal p;
    p.values = vals;
    EXPECT_NO_THROW(ppg::classify_quality(p));
  }
}

TEST(ClassifyQuality, DiagnosticsInRange) {
  const auto q = ppg::classify_quality(clean_ppg(4));
  for (const char* k : {"spike_fraction", "clip_fraction", "gap_fraction", "constant_fraction"}) {
    EXPECT_GE(q.diagnostics.at(k), 0.0);
    EXPECT_LE(q.diagnostics.at(k), 1.0);
  }
  EXPECT_GE(q.diagnostics.at("amplitude_ratio"), 0.0);
}

// Raising the injected spike fraction past the threshold flips the class
// once and never back.
TEST(ClassifyQuality, SpikeSeverityIsMonotone) {
  const auto base = clean_ppg(5);
  bool flipped = false;
  for (double frac = 0.0005; frac <= 0.06; frac *= 1.25) {
    auto p = base;
    sim::DefectSpec d{sim::DefectKind::UncorrectableSpikes};
    d.spike_fraction = frac;
    sim::apply_defect(p.values, 100.0, d, 17);
    const auto q = ppg::classify_quality(p).value;
    ASSERT_TRUE(q == QualityLabel::CorrectableSpikes || q == QualityLabel::UncorrectableSpikes)
        << quality_name(q) << " at " << frac;
    if (q == QualityLabel::UncorrectableSpikes) flipped = true;
    if (flipped) EXPECT_EQ(q, QualityLabel::UncorrectableSpikes) << frac;
  }
  EXPECT_TRUE(flipped);
}

TEST(ClassifyQuality, BalancedSmallCorpus) {
  int correct = 0, total = 0;
  for (int k = 0; k < 7; ++k)
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto kind = static_cast<sim::DefectKind>(k);
      sim::CardiacSimConfig c;
      c.duration_frames = 150;
      c.seed = 100 + 10 * k + s;
      auto p = sim::synth_ppg(sim::gen_beat_times(c), 100.0, c.duration_s(), {kind}, c.seed);
      correct += ppg::classify_quality(p).value == sim::expected_quality(kind);
      ++total;
    }
  EXPECT_GE(static_cast<double>(correct) / total, 0.95);
}

TEST(CorrectSpikes, CleanSignalUnchanged) {
  const auto p = clean_ppg(6);
  EXPECT_EQ(ppg::correct_spikes(p).values, p.values);
}

TEST(CorrectSpikes, SingleLargeSpikeRestoredNearPreInjection) {
  const double sigma = sim::kPpgNoiseFraction;
  int within = 0;
  std::vector<double> worst;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto pre = clean_ppg(200 + s, 60, 55.0 + static_cast<double>(s % 60));
    auto spiked = pre;
    CounterRng rng(s, 3);
    const auto pos = 5 + rng.below(pre.values.size() - 10);
    spiked.values[pos] += (s % 2 ? 50.0 : -50.0) * sigma;
    const auto fixed = ppg::correct_spikes(spiked);
    double dev = 0.0;
    for (std::size_t i = 0; i < pre.values.size(); ++i)
      dev = std::max(dev, std::abs(fixed.values[i] - pre.values[i]));
    worst.push_back(dev / sigma);
    within += dev < 3.0 * sigma;
  }
  std::sort(worst.begin(), worst.end());
  // The pre-injection noise at the spiked sample is unrecoverable, so a small
  // fraction of draws land just outside 3 sigma.
  EXPECT_GE(within, 95);
  EXPECT_LT(worst[50], 1.5);
  EXPECT_LT(worst.back(), 5.0);
}

TEST(CorrectSpikes, SpikeAtStartCopiesFirstGoodValue) {
  auto p = clean_ppg(7);
  p.values[0] += 50.0 * sim::kPpgNoiseFraction;
  const auto fixed = ppg::correct_spikes(p);
  const auto mask = ppg::detail::spike_mask(p.values, 6.0);
  ASSERT_TRUE(mask[0]);
  std::size_t first_good = 0;
  while (mask[first_good]) ++first_good;
  for (std::size_t i = 0; i < first_good; ++i) EXPECT_EQ(fixed.values[i], p.values[first_good]);
}

TEST(CorrectSpikes, Idempotent) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto p = clean_ppg(300 + s);
    sim::DefectSpec d{sim::DefectKind::CorrectableSpikes};
    sim::apply_defect(p.values, 100.0, d, s);
    const auto once = ppg::correct_spikes(p);
    EXPECT_EQ(ppg::correct_spikes(once).values, once.values);
  }
}

TEST(DetectPeaks, WhiteNoiseHasNoRhythm) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    PpgSignal p;
    CounterRng rng(s, 4);
    for (int i = 0; i < 6000; ++i) p.values.push_back(rng.normal());
    try {
      ppg::detect_peaks(p);
      ADD_FAILURE() << "seed " << s << ": expected DataError";
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find("no cardiac rhythm"), std::string::npos);
    }
  }
}

TEST(DetectPeaks, AlternatingIntervalsRecovered) {
  sim::BeatTimes b;
  double t = 0.3;
  for (int i = 0; t < 120.0; ++i) {
    b.times_s.push_back(t);
    t += i % 2 ? 1.0 : 0.8;
  }
  const auto p = sim::synth_ppg(b, 100.0, 120.0, {}, 21);
  const auto peaks = ppg::detect_peaks(p);
  ASSERT_EQ(peaks.times_s.size(), b.times_s.size());
  for (std::size_t i = 1; i < b.times_s.size(); ++i) {
    const double truth = b.times_s[i] - b.times_s[i - 1];
    EXPECT_NEAR(peaks.times_s[i] - peaks.times_s[i - 1], truth, 0.02) << i;
  }
}

TEST(DetectPeaks, StrictlyIncreasing) {
  const auto peaks = ppg::detect_peaks(clean_ppg(8, 400, 130.0));
  for (std::size_t i = 1; i < peaks.times_s.size(); ++i)
    EXPECT_GT(peaks.times_s[i], peaks.times_s[i - 1]);
}

TEST(ExtractHrv, RegularBeatsGiveZero) {
  const auto h = ppg::extract_hrv(noiseless_train(1.0, 120.0), 0.8, 150);
  for (double v : h.values) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(ExtractHrv, MatchesSimulatorGroundTruth) {
  auto bold = sim::BoldSimConfig::with_defaults(make_scaled_roi_config(RoiConfigLabel::DynamicOnly, 0.01));
  std::size_t ok = 0, total = 0;
  for (std::uint64_t s = 0; s < 5; ++s) {
    sim::CardiacSimConfig c;
    c.seed = 400 + s;
    c.mean_hr_bpm = 60.0 + 10.0 * s;
    const auto rec = sim::simulate_scan(c, bold, {}, {"s", "p"});
    const auto h = ppg::extract_hrv(*rec.ppg, rec.tr_seconds, rec.roi.n_frames());
    for (std::size_t k = 0; k < h.values.size(); ++k) {
      ok += std::abs(h.values[k] - rec.hrv->values[k]) < 0.01;
      ++total;
    }
  }
  EXPECT_GE(static_cast<double>(ok) / total, 0.99);
}

TEST(ExtractHrv, FramesBeyondCoverageCopyNearest) {
  const auto p = clean_ppg(9, 100);  // 80 s of PPG
  const auto h = ppg::extract_hrv(p, 0.8, 130);
  ASSERT_EQ(h.values.size(), 130u);
  // Frame 104 (83.2 s) already has no intervals in its window.
  for (std::size_t k = 105; k < 130; ++k) EXPECT_EQ(h.values[k], h.values[104]);
}

TEST(Thresholds, ValidateRejectsNonsense) {
  ppg::QcThresholds th;
  th.spike_z = -1.0;
  EXPECT_THROW(th.validate(), ValidationError);
  th = {};
  th.clip_fraction = 2.0;
  EXPECT_THROW(th.validate(), ValidationError);
}
