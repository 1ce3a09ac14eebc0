// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/core_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hrvfmri/error.hpp"

namespace hrvfmri {
namespace fs = std::filesystem;
using nlohmann::json;

std::string group_tag(RoiGroup g) {
  switch (g) {
    case RoiGroup::Cortical: return "CTX";
    case RoiGroup::Subcortical: return "SUB";
    case RoiGroup::WhiteMatter: return "WM";
    case RoiGroup::Structural: return "STR";
  }
  return "?";
}

RoiGroup group_from_tag(const std::string& tag) {
  if (tag == "CTX") return RoiGroup::Cortical;
  if (tag == "SUB") return RoiGroup::Subcortical;
  if (tag == "WM") return RoiGroup::WhiteMatter;
  if (tag == "STR") return RoiGroup::Structural;
  throw DataError("unknown ROI group tag '" + tag + "'");
}

std::string group_name(RoiGroup g) {
  switch (g) {
    case RoiGroup::Cortical: return "Cortical";
    case RoiGroup::Subcortical: return "Subcortical";
    case RoiGroup::WhiteMatter: return "WhiteMatter";
    case RoiGroup::Structural: return "Structural";
  }
  return "?";
}

std::string label_name(RoiConfigLabel label) {
  switch (label) {
    case RoiConfigLabel::DynamicPlusWM: return "DynamicPlusWM";
    case RoiConfigLabel::DynamicOnly: return "DynamicOnly";
    case RoiConfigLabel::StaticPlusWM: return "StaticPlusWM";
    case RoiConfigLabel::StructuralOnly: return "StructuralOnly";
  }
  return "?";
}

RoiConfigLabel label_from_name(const std::string& name) {
  for (auto l : kAllRoiConfigs)
    if (label_name(l) == name) return l;
  throw ValidationError("unknown ROI configuration '" + name + "'");
}

std::size_t RoiConfig::total() const {
  std::size_t n = 0;
  for (const auto& [g, c] : group_counts) n += c;
  return n;
}

RoiConfig make_roi_config(RoiConfigLabel label) {
  RoiConfig cfg{label, {}};
  switch (label) {
    case RoiConfigLabel::DynamicPlusWM:
      cfg.group_counts = {{RoiGroup::Cortical, 518},
                          {RoiGroup::Subcortical, 62},
                          {RoiGroup::WhiteMatter, 48}};
      break;
    case RoiConfigLabel::DynamicOnly:
      cfg.group_counts = {{RoiGroup::Cortical, 518}, {RoiGroup::Subcortical, 62}};
      break;
    case RoiConfigLabel::StaticPlusWM:
      cfg.group_counts = {{RoiGroup::Cortical, 360}, {RoiGroup::WhiteMatter, 48}};
      break;
    case RoiConfigLabel::StructuralOnly:
      cfg.group_counts = {{RoiGroup::Structural, 69}};
      break;
  }
  return cfg;
}

RoiConfig make_scaled_roi_config(RoiConfigLabel label, double scale) {
  if (!(scale > 0.0)) throw ValidationError("ROI scale must be positive");
  RoiConfig cfg = make_roi_config(label);
  for (auto& [g, c] : cfg.group_counts) {
    const auto scaled = static_cast<std::size_t>(std::floor(static_cast<double>(c) * scale + 0.5));
    c = std::max<std::size_t>(1, scaled);
  }
  return cfg;
}

std::vector<RoiChannel> make_channels(const RoiConfig& cfg) {
  std::vector<RoiChannel> out;
  out.reserve(cfg.total());
  for (const auto& [g, c] : cfg.group_counts)
    for (std::size_t i = 0; i < c; ++i)
      out.push_back({group_tag(g) + "_" + std::to_string(i), g});
  return out;
}

std::string quality_name(QualityLabel q) {
  switch (q) {
    case QualityLabel::Clean: return "Clean";
    case QualityLabel::CorrectableSpikes: return "CorrectableSpikes";
    case QualityLabel::UncorrectableSpikes: return "UncorrectableSpikes";
    case QualityLabel::Clipping: return "Clipping";
    case QualityLabel::Gaps: return "Gaps";
    case QualityLabel::LowAmplitude: return "LowAmplitude";
    case QualityLabel::NoRecording: return "NoRecording";
  }
  return "?";
}

QualityLabel quality_from_name(const std::string& name) {
  for (int i = 0; i <= static_cast<int>(QualityLabel::NoRecording); ++i) {
    auto q = static_cast<QualityLabel>(i);
    if (quality_name(q) == name) return q;
  }
  throw DataError("unknown quality class '" + name + "'");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Validation

void validate(const RoiMatrix& roi) {
  if (roi.channels.size() != roi.values.cols())
    throw DataError("ROI header has " + std::to_string(roi.channels.size()) +
                    " channels but matrix has " + std::to_string(roi.values.cols()));
  std::set<std::string> names;
  for (const auto& ch : roi.channels)
    if (!names.insert(ch.name).second)
      throw DataError("duplicate ROI channel name '" + ch.name + "'");
  for (std::size_t r = 0; r < roi.values.rows(); ++r)
    for (std::size_t c = 0; c < roi.values.cols(); ++c)
      if (!std::isfinite(roi.values(r, c)))
        throw DataError("non-finite ROI value at row " + std::to_string(r + 1) +
                        ", column " + std::to_string(c + 1) + " (" + roi.channels[c].name + ")");
}

void validate(const HrvSeries& hrv) {
  for (std::size_t i = 0; i < hrv.values.size(); ++i)
    if (!std::isfinite(hrv.values[i]) || hrv.values[i] < 0.0)
      throw DataError("HRV value at frame " + std::to_string(i) + " is negative or non-finite");
}

void validate(const ScanRecord& record) {
  if (record.scan_id.empty()) throw DataError("scan_id is empty");
  if (!(record.tr_seconds > 0.0) || !std::isfinite(record.tr_seconds))
    throw DataError("tr_seconds must be positive, got " + format_double(record.tr_seconds));
  validate(record.roi);
  if (record.ppg) {
    if (!(record.ppg->sample_rate_hz > 0.0))
      throw DataError("PPG sample rate must be positive");
    for (std::size_t i = 0; i < record.ppg->values.size(); ++i)
      if (!std::isfinite(record.ppg->values[i]))
        throw DataError("non-finite PPG value at sample " + std::to_string(i));
  }
  if (record.hrv) {
    if (record.hrv->values.size() != record.roi.n_frames())
      throw DataError("HRV length " + std::to_string(record.hrv->values.size()) +
                      " does not match ROI frame count " +
                      std::to_string(record.roi.n_frames()));
    validate(*record.hrv);
  }
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const fs::path& file, std::size_t row,
                    std::size_t col) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first < last && *first == ' ') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw DataError(file.filename().string() + ": cannot parse '" + s + "' at row " +
                    std::to_string(row) + ", column " + std::to_string(col));
  if (!std::isfinite(v))
    throw DataError(file.filename().string() + ": non-finite value at row " +
                    std::to_string(row) + ", column " + std::to_string(col));
  return v;
}

std::ifstream open_in(const fs::path& path, const std::string& what) {
  if (!fs::exists(path)) throw DataError(what + " not found: " + path.string());
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

RoiMatrix read_roi_csv(const fs::path& path) {
  auto in = open_in(path, "ROI matrix");
  std::string line;
  if (!std::getline(in, line) || line.empty()) throw DataError(path.string() + ": missing header");
  RoiMatrix roi;
  for (const auto& col : split(line, ',')) {
    const auto colon = col.find(':');
    if (colon == std::string::npos)
      throw DataError(path.string() + ": header column '" + col + "' lacks a group tag");
    roi.channels.push_back({col.substr(colon + 1), group_from_tag(col.substr(0, colon))});
  }
  const std::size_t n_ch = roi.channels.size();
  std::vector<double> values;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row;
    const auto cells = split(line, ',');
    if (cells.size() != n_ch)
      throw DataError(path.string() + ": row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " values, header has " +
                      std::to_string(n_ch));
    for (std::size_t c = 0; c < n_ch; ++c)
      values.push_back(parse_double(cells[c], path, row, c + 1));
  }
  roi.values = Matrix(row, n_ch);
  roi.values.storage() = std::move(values);
  return roi;
}

}  // namespace

std::vector<double> read_column_csv(const fs::path& path, const std::string& header) {
  auto in = open_in(path, header + " file");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header)
    throw DataError(path.string() + ": expected header '" + header + "', got '" + line + "'");
  std::vector<double> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row;
    if (line.find(',') != std::string::npos)
      throw DataError(path.string() + ": row " + std::to_string(row) + " has more than one column");
    out.push_back(parse_double(line, path, row, 1));
  }
  return out;
}

void write_column_csv(const fs::path& path, const std::string& header,
                      const std::vector<double>& values) {
  auto out = open_out(path);
  out << header << '\n';
  for (double v : values) out << format_double(v) << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Scan directories

ScanRecord read_scan(const fs::path& dir, const std::optional<RoiConfig>& expected) {
  if (!fs::is_directory(dir)) throw DataError("scan directory not found: " + dir.string());
  const auto meta_path = dir / "meta.json";
  if (!fs::exists(meta_path)) throw DataError("sidecar not found: " + meta_path.string());

  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed sidecar " + meta_path.string() + ": " + e.what());
  }

  ScanRecord rec;
  try {
    rec.scan_id = meta.at("scan_id").get<std::string>();
    rec.subject_id = meta.at("subject_id").get<std::string>();
    rec.tr_seconds = meta.at("tr_seconds").get<double>();
    const bool ppg_present = meta.at("ppg_present").get<bool>();
    const bool hrv_present = meta.value("hrv_present", false);
    rec.roi = read_roi_csv(dir / "roi.csv");
    if (ppg_present) {
      PpgSignal ppg;
      ppg.sample_rate_hz = meta.at("ppg_sample_rate_hz").get<double>();
      ppg.values = read_column_csv(dir / "ppg.csv", "ppg");
      if (meta.contains("ppg_quality") && !meta["ppg_quality"].is_null())
        ppg.quality = quality_from_name(meta["ppg_quality"].get<std::string>());
      rec.ppg = std::move(ppg);
    }
    if (hrv_present) rec.hrv = HrvSeries{read_column_csv(dir / "hrv.csv", "hrv")};
  } catch (const json::exception& e) {
    throw DataError("sidecar " + meta_path.string() + ": " + e.what());
  }

  validate(rec);
  if (expected) {
    std::map<RoiGroup, std::size_t> counts;
    for (const auto& ch : rec.roi.channels) ++counts[ch.group];
    if (counts != expected->group_counts)
      throw DataError("scan " + rec.scan_id + " has " + std::to_string(rec.roi.n_channels()) +
                      " channels, configuration " + label_name(expected->label) + " expects " +
                      std::to_string(expected->total()));
  }
  return rec;
}

void write_scan(const ScanRecord& record, const fs::path& dir) {
  validate(record);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());

  {
    auto out = open_out(dir / "roi.csv");
    const auto& chans = record.roi.channels;
    for (std::size_t c = 0; c < chans.size(); ++c)
      out << (c ? "," : "") << group_tag(chans[c].group) << ':' << chans[c].name;
    out << '\n';
    std::string line;
    for (std::size_t r = 0; r < record.roi.n_frames(); ++r) {
      line.clear();
      const auto row = record.roi.values.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) line.push_back(',');
        line += format_double(row[c]);
      }
      out << line << '\n';
    }
    if (!out) throw DataError("write failed: " + (dir / "roi.csv").string());
  }

  json meta = {{"scan_id", record.scan_id},
               {"subject_id", record.subject_id},
               {"tr_seconds", record.tr_seconds},
               {"ppg_present", record.ppg.has_value()},
               {"hrv_present", record.hrv.has_value()}};
  meta["ppg_sample_rate_hz"] = record.ppg ? json(record.ppg->sample_rate_hz) : json(nullptr);
  if (record.ppg && record.ppg->quality) meta["ppg_quality"] = quality_name(*record.ppg->quality);

  fs::remove(dir / "ppg.csv", ec);
  fs::remove(dir / "hrv.csv", ec);
  if (record.ppg) write_column_csv(dir / "ppg.csv", "ppg", record.ppg->values);
  if (record.hrv) write_column_csv(dir / "hrv.csv", "hrv", record.hrv->values);

  auto out = open_out(dir / "meta.json");
  out << meta.dump(2) << '\n';
}

}  // namespace hrvfmri
