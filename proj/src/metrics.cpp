// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "hrvfmri/error.hpp"
#include "hrvfmri/json_io.hpp"

namespace hrvfmri::metrics {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  if (a.empty()) throw ValidationError(std::string(what) + ": empty input");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!std::isfinite(a[i]) || !std::isfinite(b[i]))
      throw ValidationError(std::string(what) + ": non-finite value at index " +
                            std::to_string(i));
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double mae(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

double mse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return s / static_cast<double>(pred.size());
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "pearson");
  if (x.size() < 2) throw ValidationError("pearson: needs at least 2 points");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y, "spearman");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

double dtw(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw ValidationError("dtw: empty input");
  // Keep the shorter sequence along the stored row.
  if (y.size() > x.size()) std::swap(x, y);
  const std::size_t m = y.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j)
      cur[j] = std::abs(x[i - 1] - y[j - 1]) + std::min({prev[j], cur[j - 1], prev[j - 1]});
    std::swap(prev, cur);
  }
  return prev[m];
}

namespace {
double population_std(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}
}  // namespace

ScanEvaluation evaluate_scan(const std::string& scan_id, std::span<const double> pred,
                             std::span<const double> measured) {
  if (pred.size() != measured.size())
    throw ValidationError("evaluate_scan " + scan_id + ": prediction and measured lengths differ");
  std::vector<double> p, m;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (std::isfinite(pred[i])) {
      p.push_back(pred[i]);
      m.push_back(measured[i]);
    }
  if (p.empty()) throw ValidationError("evaluate_scan " + scan_id + ": no overlapping frames");
  ScanEvaluation e;
  e.scan_id = scan_id;
  e.mae = mae(p, m);
  e.mse = mse(p, m);
  e.pearson_r = p.size() >= 2 ? pearson(p, m) : std::nullopt;
  e.dtw = dtw(p, m);
  e.hrv_std = population_std(m);
  e.n_frames = p.size();
  return e;
}

namespace {
std::vector<const ScanEvaluation*> sorted_by_id(std::span<const ScanEvaluation> evals) {
  std::vector<const ScanEvaluation*> v;
  for (const auto& e : evals) v.push_back(&e);
  std::sort(v.begin(), v.end(), [](auto a, auto b) { return a->scan_id < b->scan_id; });
  return v;
}
}  // namespace

VariabilityAnalysis variability_accuracy_analysis(std::span<const ScanEvaluation> evals) {
  VariabilityAnalysis out;
  std::vector<double> xs, ys;
  for (const auto* e : sorted_by_id(evals)) {
    if (!e->pearson_r) {
      ++out.n_excluded;
      continue;
    }
    xs.push_back(e->hrv_std);
    ys.push_back(*e->pearson_r);
    out.scatter.emplace_back(e->hrv_std, *e->pearson_r);
  }
  out.n_used = xs.size();
  if (evals.size() > 0 && xs.empty())
    throw ValidationError("variability analysis: r is undefined for every scan");
  if (xs.size() < 3)
    throw ValidationError("variability analysis needs at least 3 scans with defined r, got " +
                          std::to_string(xs.size()));
  out.pearson = pearson(xs, ys);
  out.spearman = spearman(xs, ys);
  const double mx = mean_of(xs), my = mean_of(ys);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx > 0.0) out.slope = sxy / sxx;
  return out;
}

void write_scatter_csv(const std::filesystem::path& path, std::span<const ScanEvaluation> evals) {
  std::ofstream o(path);
  if (!o) throw DataError("cannot write " + path.string());
  o << "scan_id,hrv_std,pearson_r\n";
  for (const auto* e : sorted_by_id(evals)) {
    if (!e->pearson_r) continue;
    o << e->scan_id << ',' << format_double(e->hrv_std) << ',' << format_double(*e->pearson_r)
      << '\n';
  }
}

std::pair<double, double> signed_rank_tails(std::span<const double> ranks, double w_plus) {
  // Doubled ranks are integers even with mid-rank ties.
  std::vector<std::size_t> r2;
  std::size_t total = 0;
  for (double r : ranks) {
    r2.push_back(static_cast<std::size_t>(std::llround(2.0 * r)));
    total += r2.back();
  }
  std::vector<double> count(total + 1, 0.0);
  count[0] = 1.0;
  std::size_t reach = 0;
  for (std::size_t r : r2) {
    for (std::size_t s = reach + 1; s-- > 0;)
      if (count[s] != 0.0) count[s + r] += count[s];
    reach += r;
  }
  const auto w2 = static_cast<std::size_t>(std::llround(2.0 * w_plus));
  double upper = 0.0, lower = 0.0, all = 0.0;
  for (std::size_t s = 0; s <= total; ++s) {
    all += count[s];
    if (s >= w2) upper += count[s];
    if (s <= w2) lower += count[s];
  }
  return {upper / all, lower / all};
}

PairedTest paired_test(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "paired_test");
  if (a.size() < 6)
    throw ValidationError("paired_test needs at least 6 pairs, got " + std::to_string(a.size()));
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = b[i] - a[i];

  PairedTest out;
  {
    std::vector<double> s = diff;
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    out.median_difference = n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
  }
  std::vector<double> nz;
  for (double d : diff)
    if (d != 0.0) nz.push_back(d);
  out.n_nonzero = nz.size();
  if (nz.empty()) {
    out.p_value = 1.0;
    out.direction = 0;
    return out;
  }
  std::vector<double> absd(nz.size());
  for (std::size_t i = 0; i < nz.size(); ++i) absd[i] = std::abs(nz[i]);
  const auto ranks = average_ranks(absd);
  for (std::size_t i = 0; i < nz.size(); ++i)
    if (nz[i] > 0.0) out.w_plus += ranks[i];

  const double n = static_cast<double>(nz.size());
  const double mean_w = n * (n + 1.0) / 4.0;
  if (nz.size() <= kExactWilcoxonMaxN) {
    const auto [upper, lower] = signed_rank_tails(ranks, out.w_plus);
    out.p_value = std::min(1.0, 2.0 * std::min(upper, lower));
    out.exact = true;
  } else {
    std::map<double, std::size_t> ties;
    for (double r : ranks) ++ties[r];
    double tie_term = 0.0;
    for (const auto& [r, t] : ties) {
      const double tt = static_cast<double>(t);
      tie_term += tt * tt * tt - tt;
    }
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    const double z = std::max(0.0, std::abs(out.w_plus - mean_w) - 0.5) / std::sqrt(var);
    out.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    out.exact = false;
  }
  if (out.median_difference > 0.0) out.direction = 1;
  else if (out.median_difference < 0.0) out.direction = -1;
  else out.direction = out.w_plus > mean_w ? 1 : (out.w_plus < mean_w ? -1 : 0);
  return out;
}

MetricSummary summarize(std::vector<double> values, std::size_t excluded) {
  MetricSummary s;
  s.n = values.size();
  s.n_excluded = excluded;
  if (values.empty()) {
    s.mean = s.median = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.mean = mean_of(values);
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  return s;
}

double improvement_percent(double mean_best, double mean_other) {
  return (mean_best - mean_other) / mean_other * 100.0;
}

ConfigComparison compare_configs(const std::vector<std::string>& labels,
                                 const std::map<std::string, std::vector<ScanEvaluation>>& evals) {
  if (labels.empty()) throw ValidationError("compare_configs: no configurations");
  ConfigComparison c;
  c.labels = labels;
  std::set<std::string> ref;
  for (const auto& label : labels) {
    auto it = evals.find(label);
    if (it == evals.end()) throw ValidationError("compare_configs: no evaluations for " + label);
    std::set<std::string> ids;
    for (const auto& e : it->second)
      if (!ids.insert(e.scan_id).second)
        throw ValidationError("compare_configs: duplicate scan " + e.scan_id + " in " + label);
    if (label == labels.front()) ref = ids;
    else if (ids != ref)
      throw ValidationError("compare_configs: scan set of " + label + " differs from " +
                            labels.front());
    auto sorted = it->second;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.scan_id < b.scan_id; });
    c.per_scan[label] = std::move(sorted);
  }
  c.scan_ids.assign(ref.begin(), ref.end());

  for (const auto& label : labels) {
    const auto& v = c.per_scan[label];
    std::vector<double> r, mae_v, mse_v, dtw_v;
    std::size_t undefined = 0;
    for (const auto& e : v) {
      if (e.pearson_r) r.push_back(*e.pearson_r);
      else ++undefined;
      mae_v.push_back(e.mae);
      mse_v.push_back(e.mse);
      dtw_v.push_back(e.dtw);
    }
    c.summary[label]["pearson_r"] = summarize(r, undefined);
    c.summary[label]["mae"] = summarize(mae_v);
    c.summary[label]["mse"] = summarize(mse_v);
    c.summary[label]["dtw"] = summarize(dtw_v);
  }
  c.best_label = labels.front();
  for (const auto& label : labels)
    if (c.summary[label]["pearson_r"].mean > c.summary[c.best_label]["pearson_r"].mean)
      c.best_label = label;
  for (const auto& label : labels)
    c.improvement_pct[label] = improvement_percent(c.summary[c.best_label]["pearson_r"].mean,
                                                   c.summary[label]["pearson_r"].mean);

  const std::size_t k = labels.size();
  c.p_matrix.assign(k, std::vector<double>(k, 1.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      const auto& vi = c.per_scan[labels[i]];
      const auto& vj = c.per_scan[labels[j]];
      std::vector<double> a, b;
      for (std::size_t s = 0; s < vi.size(); ++s)
        if (vi[s].pearson_r && vj[s].pearson_r) {
          a.push_back(*vi[s].pearson_r);
          b.push_back(*vj[s].pearson_r);
        }
      const double p = a.size() >= 6 ? paired_test(a, b).p_value
                                     : std::numeric_limits<double>::quiet_NaN();
      c.p_matrix[i][j] = c.p_matrix[j][i] = p;
    }
  return c;
}

namespace {
std::string opt_str(const std::optional<double>& v) { return v ? format_double(*v) : ""; }
}  // namespace

void write_scan_metrics_csv(const std::filesystem::path& path,
                            std::span<const ScanEvaluation> evals) {
  std::ofstream o(path);
  if (!o) throw DataError("cannot write " + path.string());
  o << "scan_id,mae,mse,pearson_r,dtw,hrv_std,n_frames\n";
  for (const auto* e : sorted_by_id(evals))
    o << e->scan_id << ',' << format_double(e->mae) << ',' << format_double(e->mse) << ','
      << opt_str(e->pearson_r) << ',' << format_double(e->dtw) << ','
      << format_double(e->hrv_std) << ',' << e->n_frames << '\n';
}

std::vector<ScanEvaluation> read_scan_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (line.rfind("scan_id,mae,mse,pearson_r,dtw,hrv_std", 0) != 0)
    throw DataError("unexpected header in " + path.string());
  std::vector<ScanEvaluation> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() < 7) throw DataError(path.string() + ":" + std::to_string(lineno) + ": too few fields");
    try {
      ScanEvaluation e;
      e.scan_id = f[0];
      e.mae = std::stod(f[1]);
      e.mse = std::stod(f[2]);
      if (!f[3].empty()) e.pearson_r = std::stod(f[3]);
      e.dtw = std::stod(f[4]);
      e.hrv_std = std::stod(f[5]);
      e.n_frames = std::stoul(f[6]);
      out.push_back(std::move(e));
    } catch (const std::exception&) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

void write_comparison(const std::filesystem::path& dir, const ConfigComparison& c) {
  std::filesystem::create_directories(dir);
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j;
  j["improvement_definition"] =
      "(mean r of best - mean r of other) / mean r of other * 100, on matched scans";
  if (!c.note.empty()) j["note"] = c.note;
  j["test"] = "two-sided Wilcoxon signed-rank on per-scan r";
  j["labels"] = c.labels;
  j["n_scans"] = c.scan_ids.size();
  j["best_label"] = c.best_label;
  json summ = json::object();
  for (const auto& label : c.labels) {
    json m = json::object();
    for (const auto& [metric, s] : c.summary.at(label))
      m[metric] = {{"mean", num(s.mean)}, {"median", num(s.median)}, {"n", s.n},
                   {"n_excluded", s.n_excluded}};
    summ[label] = m;
  }
  j["summary"] = summ;
  json imp = json::object();
  for (const auto& label : c.labels) imp[label] = num(c.improvement_pct.at(label));
  j["improvement_pct"] = imp;
  json pm = json::array();
  for (const auto& row : c.p_matrix) {
    json r = json::array();
    for (double p : row) r.push_back(num(p));
    pm.push_back(r);
  }
  j["p_matrix"] = pm;
  std::ofstream o(dir / "comparison.json");
  if (!o) throw DataError("cannot write " + (dir / "comparison.json").string());
  o << j.dump(2) << '\n';

  for (const auto& label : c.labels) {
    std::ofstream v(dir / ("violin_" + label + ".csv"));
    v << "scan_id,pearson_r,mae,mse,dtw\n";
    for (const auto& e : c.per_scan.at(label))
      v << e.scan_id << ',' << opt_str(e.pearson_r) << ',' << format_double(e.mae) << ','
        << format_double(e.mse) << ',' << format_double(e.dtw) << '\n';
  }
}

}  // namespace hrvfmri::metrics
