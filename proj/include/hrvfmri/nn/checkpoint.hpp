// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container:
//   8-byte magic "HRVCKPT1", u32 version, u64 header length, JSON header
//   (model config, optimizer hyper, window spec, normalizer), u64 parameter
//   count, then the flat parameters as host-order doubles.
#pragma once

#include <filesystem>

#include "hrvfmri/dataset.hpp"
#include "hrvfmri/nn/model.hpp"
#include "hrvfmri/nn/train.hpp"

namespace hrvfmri::nn {

struct Checkpoint {
  ModelParams params;
  TrainHyper hyper;
  dataset::WindowSpec window;
  dataset::Normalizer normalizer;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace hrvfmri::nn
