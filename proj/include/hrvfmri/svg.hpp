// SPDX-License-Identifier: Apache-2.0
//
// Minimal standalone SVG renderers for the report plots.
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace hrvfmri::svg {

struct Series {
  std::string name;
  std::string color;
  std::vector<double> values;  // NaN breaks the line
};

/// Line plot of series against their sample index scaled by `x_step`.
std::string line_plot(const std::string& title, const std::vector<Series>& series, double x_step,
                      const std::string& x_label, const std::string& y_label);

std::string scatter_plot(const std::string& title, const std::vector<std::pair<double, double>>& pts,
                         const std::string& x_label, const std::string& y_label);

struct ViolinGroup {
  std::string name;
  std::vector<double> values;
};

/// Gaussian-kernel density outlines; white circle marks the median, black
/// line the mean.
std::string violin_plot(const std::string& title, const std::vector<ViolinGroup>& groups,
                        const std::string& y_label);

std::string escape(const std::string& s);

}  // namespace hrvfmri::svg
