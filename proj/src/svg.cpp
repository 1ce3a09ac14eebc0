// SPDX-License-Identifier: Apache-2.0
#include "hrvfmri/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <sstream>

namespace hrvfmri::svg {

namespace {

constexpr double kW = 720, kH = 360, kL = 70, kR = 20, kT = 40, kB = 50;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  double px(double x) const { return kL + (x - x0) / (x1 - x0) * (kW - kL - kR); }
  double py(double y) const { return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB); }
};

void widen(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

void header(std::ostringstream& o, const std::string& title) {
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(title) << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f, const std::string& xl, const std::string& yl,
          bool x_ticks = true) {
  o << "<g stroke=\"#444\" fill=\"none\"><line x1=\"" << kL << "\" y1=\"" << kH - kB << "\" x2=\""
    << kW - kR << "\" y2=\"" << kH - kB << "\"/><line x1=\"" << kL << "\" y1=\"" << kT
    << "\" x2=\"" << kL << "\" y2=\"" << kH - kB << "\"/></g>\n";
  for (int i = 0; i <= 4; ++i) {
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o << "<text x=\"" << kL - 6 << "\" y=\"" << num(f.py(yv) + 4)
      << "\" text-anchor=\"end\">" << tick(yv) << "</text>\n";
    if (x_ticks) {
      const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
      o << "<text x=\"" << num(f.px(xv)) << "\" y=\"" << kH - kB + 16
        << "\" text-anchor=\"middle\">" << tick(xv) << "</text>\n";
    }
  }
  o << "<text x=\"" << (kL + kW - kR) / 2 << "\" y=\"" << kH - 10 << "\" text-anchor=\"middle\">"
    << escape(xl) << "</text>\n"
    << "<text transform=\"translate(16," << (kT + kH - kB) / 2
    << ") rotate(-90)\" text-anchor=\"middle\">" << escape(yl) << "</text>\n";
}

}  // namespace

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string line_plot(const std::string& title, const std::vector<Series>& series, double x_step,
                      const std::string& x_label, const std::string& y_label) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 1;
  for (const auto& s : series) {
    n = std::max(n, s.values.size());
    for (double v : s.values)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  widen(lo, hi);
  Frame f{0.0, std::max(1.0, static_cast<double>(n - 1)) * x_step, lo, hi};
  std::ostringstream o;
  header(o, title);
  axes(o, f, x_label, y_label);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    std::string d;
    bool pen = false;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (!std::isfinite(s.values[i])) {
        pen = false;
        continue;
      }
      d += (pen ? "L" : "M") + num(f.px(static_cast<double>(i) * x_step)) + ',' +
           num(f.py(s.values[i])) + ' ';
      pen = true;
    }
    o << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << escape(s.color)
      << "\" stroke-width=\"1.5\"/>\n"
      << "<text x=\"" << kW - kR - 150 << "\" y=\"" << kT + 14 + 16 * si << "\" fill=\""
      << escape(s.color) << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string scatter_plot(const std::string& title, const std::vector<std::pair<double, double>>& pts,
                         const std::string& x_label, const std::string& y_label) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& [x, y] : pts) {
    xlo = std::min(xlo, x);
    xhi = std::max(xhi, x);
    ylo = std::min(ylo, y);
    yhi = std::max(yhi, y);
  }
  widen(xlo, xhi);
  widen(ylo, yhi);
  Frame f{xlo, xhi, ylo, yhi};
  std::ostringstream o;
  header(o, title);
  axes(o, f, x_label, y_label);
  for (const auto& [x, y] : pts)
    o << "<circle cx=\"" << num(f.px(x)) << "\" cy=\"" << num(f.py(y))
      << "\" r=\"3.5\" fill=\"#1f77b4\" fill-opacity=\"0.7\"/>\n";
  o << "</svg>\n";
  return o.str();
}

std::string violin_plot(const std::string& title, const std::vector<ViolinGroup>& groups,
                        const std::string& y_label) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& g : groups)
    for (double v : g.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  widen(lo, hi);
  Frame f{0.0, static_cast<double>(std::max<std::size_t>(1, groups.size())), lo, hi};
  std::ostringstream o;
  header(o, title);
  axes(o, f, "", y_label, false);
  const double slot = (kW - kL - kR) / std::max<std::size_t>(1, groups.size());
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    const double cx = kL + slot * (static_cast<double>(gi) + 0.5);
    o << "<text x=\"" << num(cx) << "\" y=\"" << kH - kB + 16 << "\" text-anchor=\"middle\">"
      << escape(g.name) << "</text>\n";
    if (g.values.empty()) continue;
    std::vector<double> v = g.values;
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double sd = 0.0;
    for (double x : v) sd += (x - mean) * (x - mean);
    sd = std::sqrt(sd / std::max(1.0, n - 1.0));
    // Silverman's rule; fall back to a sliver of the axis range for constant data.
    const double bw = sd > 0.0 ? 1.06 * sd * std::pow(n, -0.2) : 0.01 * (hi - lo);
    const int steps = 60;
    std::vector<double> ys(steps + 1), dens(steps + 1);
    double dmax = 0.0;
    for (int i = 0; i <= steps; ++i) {
      ys[i] = v.front() - 2 * bw + (v.back() - v.front() + 4 * bw) * i / steps;
      double d = 0.0;
      for (double x : v) d += std::exp(-0.5 * ((ys[i] - x) / bw) * ((ys[i] - x) / bw));
      dens[i] = d;
      dmax = std::max(dmax, d);
    }
    const double half = 0.4 * slot;
    std::string path;
    for (int i = 0; i <= steps; ++i)
      path += (i == 0 ? "M" : "L") + num(cx + half * dens[i] / dmax) + ',' + num(f.py(ys[i])) + ' ';
    for (int i = steps; i >= 0; --i)
      path += "L" + num(cx - half * dens[i] / dmax) + ',' + num(f.py(ys[i])) + ' ';
    o << "<path d=\"" << path << "Z\" fill=\"#9ecae1\" stroke=\"#3182bd\"/>\n";
    const std::size_t m = v.size();
    const double median = m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
    o << "<line x1=\"" << num(cx - half * 0.5) << "\" x2=\"" << num(cx + half * 0.5) << "\" y1=\""
      << num(f.py(mean)) << "\" y2=\"" << num(f.py(mean)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n"
      << "<circle cx=\"" << num(cx) << "\" cy=\"" << num(f.py(median))
      << "\" r=\"4\" fill=\"white\" stroke=\"black\"/>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace hrvfmri::svg
