// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/json_io.hpp"

#include "hrvfmri/error.hpp"

namespace hrvfmri {

void require_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  if (!j.is_object()) throw ValidationError(std::string(where) + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ValidationError("unknown key '" + it.key() + "' in " + where);
  }
}

json to_json(const dataset::WindowSpec& v) {
  return {{"window_len", v.window_len}, {"target_offset", v.target_offset}, {"stride", v.stride}};
}

void overlay(const json& j, dataset::WindowSpec& v) {
  require_keys(j, {"window_len", "target_offset", "stride"}, "window");
  read_opt(j, "window_len", v.window_len);
  read_opt(j, "target_offset", v.target_offset);
  read_opt(j, "stride", v.stride);
  v.validate();
}

json to_json(const dataset::Normalizer& v) {
  return {{"channel_mean", v.channel_mean},
          {"channel_std", v.channel_std},
          {"target_mean", v.target_mean},
          {"target_std", v.target_std},
          {"zero_variance_channels", v.zero_variance_channels}};
}

void overlay(const json& j, dataset::Normalizer& v) {
  require_keys(j, {"channel_mean", "channel_std", "target_mean", "target_std",
                   "zero_variance_channels"},
               "normalizer");
  read_opt(j, "channel_mean", v.channel_mean);
  read_opt(j, "channel_std", v.channel_std);
  read_opt(j, "target_mean", v.target_mean);
  read_opt(j, "target_std", v.target_std);
  read_opt(j, "zero_variance_channels", v.zero_variance_channels);
  if (v.channel_mean.size() != v.channel_std.size())
    throw ValidationError("normalizer mean and std lengths differ");
}

json to_json(const nn::ModelConfig& v) {
  json blocks = json::array();
  for (const auto& b : v.conv_blocks)
    blocks.push_back({{"filters", b.filters},
                      {"kernel", b.kernel},
                      {"stride", b.stride},
                      {"pool", nn::pool_name(b.pool)}});
  return {{"n_channels", v.n_channels},     {"window_len", v.window_len},
          {"conv_blocks", blocks},          {"gru_hidden", v.gru_hidden},
          {"dense_hidden", v.dense_hidden}, {"activation", nn::activation_name(v.activation)},
          {"seed", v.seed}};
}

void overlay(const json& j, nn::ModelConfig& v) {
  require_keys(j, {"n_channels", "window_len", "conv_blocks", "gru_hidden", "dense_hidden",
                   "activation", "seed"},
               "model");
  read_opt(j, "n_channels", v.n_channels);
  read_opt(j, "window_len", v.window_len);
  read_opt(j, "gru_hidden", v.gru_hidden);
  read_opt(j, "dense_hidden", v.dense_hidden);
  read_opt(j, "seed", v.seed);
  if (j.contains("activation")) {
    std::string a;
    read_opt(j, "activation", a);
    v.activation = nn::activation_from_name(a);
  }
  if (j.contains("conv_blocks")) {
    if (!j["conv_blocks"].is_array()) throw ValidationError("model.conv_blocks must be an array");
    v.conv_blocks.clear();
    for (const auto& jb : j["conv_blocks"]) {
      require_keys(jb, {"filters", "kernel", "stride", "pool"}, "model.conv_blocks[]");
      nn::ConvBlock b;
      read_opt(jb, "filters", b.filters);
      read_opt(jb, "kernel", b.kernel);
      read_opt(jb, "stride", b.stride);
      if (jb.contains("pool")) {
        std::string p;
        read_opt(jb, "pool", p);
        b.pool = nn::pool_from_name(p);
      }
      v.conv_blocks.push_back(b);
    }
  }
}

json to_json(const nn::TrainHyper& v) {
  return {{"learning_rate", v.adam.learning_rate},
          {"beta1", v.adam.beta1},
          {"beta2", v.adam.beta2},
          {"epsilon", v.adam.epsilon},
          {"weight_decay", v.adam.weight_decay},
          {"batch_size", v.batch_size},
          {"max_epochs", v.max_epochs},
          {"patience", v.patience},
          {"min_improvement", v.min_improvement}};
}

void overlay(const json& j, nn::TrainHyper& v) {
  require_keys(j, {"learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "batch_size",
                   "max_epochs", "patience", "min_improvement"},
               "optimizer");
  read_opt(j, "learning_rate", v.adam.learning_rate);
  read_opt(j, "beta1", v.adam.beta1);
  read_opt(j, "beta2", v.adam.beta2);
  read_opt(j, "epsilon", v.adam.epsilon);
  read_opt(j, "weight_decay", v.adam.weight_decay);
  read_opt(j, "batch_size", v.batch_size);
  read_opt(j, "max_epochs", v.max_epochs);
  read_opt(j, "patience", v.patience);
  read_opt(j, "min_improvement", v.min_improvement);
  v.validate();
}

json to_json(const ppg::QcThresholds& v) {
  json j = {{"spike_z", v.spike_z},
            {"max_correctable_spike_fraction", v.max_correctable_spike_fraction},
            {"clip_fraction", v.clip_fraction},
            {"gap_fraction", v.gap_fraction},
            {"min_amplitude_ratio", v.min_amplitude_ratio},
            {"zero_fraction_for_norec", v.zero_fraction_for_norec},
            {"min_gap_s", v.min_gap_s},
            {"reference_pulse_amplitude", v.reference_pulse_amplitude}};
  j["corpus_robust_amplitude"] =
      v.corpus_robust_amplitude ? json(*v.corpus_robust_amplitude) : json(nullptr);
  return j;
}

void overlay(const json& j, ppg::QcThresholds& v) {
  require_keys(j, {"spike_z", "max_correctable_spike_fraction", "clip_fraction", "gap_fraction",
                   "min_amplitude_ratio", "zero_fraction_for_norec", "min_gap_s",
                   "reference_pulse_amplitude", "corpus_robust_amplitude"},
               "qc");
  read_opt(j, "spike_z", v.spike_z);
  read_opt(j, "max_correctable_spike_fraction", v.max_correctable_spike_fraction);
  read_opt(j, "clip_fraction", v.clip_fraction);
  read_opt(j, "gap_fraction", v.gap_fraction);
  read_opt(j, "min_amplitude_ratio", v.min_amplitude_ratio);
  read_opt(j, "zero_fraction_for_norec", v.zero_fraction_for_norec);
  read_opt(j, "min_gap_s", v.min_gap_s);
  read_opt(j, "reference_pulse_amplitude", v.reference_pulse_amplitude);
  if (j.contains("corpus_robust_amplitude")) {
    if (j["corpus_robust_amplitude"].is_null()) {
      v.corpus_robust_amplitude.reset();
    } else {
      double a = 0.0;
      read_opt(j, "corpus_robust_amplitude", a);
      v.corpus_robust_amplitude = a;
    }
  }
  v.validate();
}

json to_json(const sim::CardiacSimConfig& v) {
  return {{"duration_frames", v.duration_frames},
          {"tr_seconds", v.tr_seconds},
          {"mean_hr_bpm", v.mean_hr_bpm},
          {"hr_modulation_depth", v.hr_modulation_depth},
          {"hr_modulation_timescale_s", v.hr_modulation_timescale_s},
          {"hr_jitter_bpm", v.hr_jitter_bpm}};
}

void overlay(const json& j, sim::CardiacSimConfig& v) {
  require_keys(j, {"duration_frames", "tr_seconds", "mean_hr_bpm", "hr_modulation_depth",
                   "hr_modulation_timescale_s", "hr_jitter_bpm"},
               "cardiac");
  read_opt(j, "duration_frames", v.duration_frames);
  read_opt(j, "tr_seconds", v.tr_seconds);
  read_opt(j, "mean_hr_bpm", v.mean_hr_bpm);
  read_opt(j, "hr_modulation_depth", v.hr_modulation_depth);
  read_opt(j, "hr_modulation_timescale_s", v.hr_modulation_timescale_s);
  read_opt(j, "hr_jitter_bpm", v.hr_jitter_bpm);
}

json to_json(const nn::TrainReport& v) {
  return {{"train_loss", v.train_loss},
          {"val_loss", v.val_loss},
          {"best_epoch", v.best_epoch},
          {"epochs_run", v.train_loss.size()},
          {"early_stopped", v.early_stopped},
          {"seed", v.seed},
          {"hyper", to_json(v.hyper)}};
}

}  // namespace hrvfmri
