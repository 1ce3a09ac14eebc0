// SPDX-License-Identifier: Apache-2.0
//
// JSON mapping of every configuration type. Reading is a partial overlay: keys
// that are absent keep their current value, unknown keys are rejected.
#pragma once

#include <nlohmann/json.hpp>

#include "hrvfmri/dataset.hpp"
#include "hrvfmri/error.hpp"
#include "hrvfmri/nn/config.hpp"
#include "hrvfmri/nn/train.hpp"
#include "hrvfmri/ppg.hpp"
#include "hrvfmri/simulator.hpp"

namespace hrvfmri {

using json = nlohmann::ordered_json;

json to_json(const dataset::WindowSpec& v);
void overlay(const json& j, dataset::WindowSpec& v);

json to_json(const dataset::Normalizer& v);
void overlay(const json& j, dataset::Normalizer& v);

json to_json(const nn::ModelConfig& v);
void overlay(const json& j, nn::ModelConfig& v);

json to_json(const nn::TrainHyper& v);
void overlay(const json& j, nn::TrainHyper& v);

json to_json(const ppg::QcThresholds& v);
void overlay(const json& j, ppg::QcThresholds& v);

json to_json(const sim::CardiacSimConfig& v);
void overlay(const json& j, sim::CardiacSimConfig& v);

json to_json(const nn::TrainReport& v);

/// Rejects keys outside `allowed` with a ValidationError naming `where`.
void require_keys(const json& j, std::initializer_list<const char*> allowed, const char* where);

/// Reads the value at `key` if present; wraps type errors as ValidationError.
template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace hrvfmri
