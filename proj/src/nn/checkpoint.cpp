// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "hrvfmri/error.hpp"
#include "hrvfmri/json_io.hpp"

namespace hrvfmri::nn {

namespace {
constexpr char kMagic[8] = {'H', 'R', 'V', 'C', 'K', 'P', 'T', '1'};

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& p) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated checkpoint: " + p.string());
  return v;
}
}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const json header = {{"model", to_json(ck.params.cfg)},
                       {"optimizer", to_json(ck.hyper)},
                       {"window", to_json(ck.window)},
                       {"normalizer", to_json(ck.normalizer)}};
  const std::string text = header.dump();
  std::ofstream o(path, std::ios::binary);
  if (!o) throw DataError("cannot write checkpoint: " + path.string());
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t hlen = text.size(), n = ck.params.values.size();
  o.write(kMagic, sizeof kMagic);
  o.write(reinterpret_cast<const char*>(&version), sizeof version);
  o.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
  o.write(text.data(), static_cast<std::streamsize>(hlen));
  o.write(reinterpret_cast<const char*>(&n), sizeof n);
  o.write(reinterpret_cast<const char*>(ck.params.values.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!o) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = get<std::uint64_t>(in, path);
  if (hlen > (64u << 20)) throw DataError("corrupt checkpoint header: " + path.string());
  std::string text(hlen, '\0');
  in.read(text.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError("truncated checkpoint: " + path.string());

  Checkpoint ck;
  try {
    const json header = json::parse(text);
    ModelConfig cfg;
    overlay(header.at("model"), cfg);
    overlay(header.at("optimizer"), ck.hyper);
    overlay(header.at("window"), ck.window);
    overlay(header.at("normalizer"), ck.normalizer);
    ck.params = zero_params(cfg);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint header: " + std::string(e.what()));
  } catch (const ValidationError& e) {
    throw DataError("invalid checkpoint header: " + std::string(e.what()));
  }
  const auto n = get<std::uint64_t>(in, path);
  if (n != ck.params.values.size())
    throw DataError("checkpoint holds " + std::to_string(n) + " parameters, config implies " +
                    std::to_string(ck.params.values.size()));
  in.read(reinterpret_cast<char*>(ck.params.values.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw DataError("truncated checkpoint parameters: " + path.string());
  if (!ck.params.all_finite()) throw DataError("checkpoint contains non-finite parameters");
  return ck;
}

}  // namespace hrvfmri::nn
