// SPDX-License-Identifier: Apache-2.0
// Brute-force references shared by unit and acceptance tests. They share no
// code with the library implementations they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace hrvfmri::testing {

/// Minimum cost over every monotone alignment path from (0,0) to (n-1,m-1),
/// enumerated by explicit recursion (no memoization).
inline double brute_dtw(const std::vector<double>& x, const std::vector<double>& y) {
  double best = std::numeric_limits<double>::infinity();
  auto walk = [&](auto&& self, std::size_t i, std::size_t j, double acc) -> void {
    acc += std::abs(x[i] - y[j]);
    if (i + 1 == x.size() && j + 1 == y.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < x.size()) self(self, i + 1, j, acc);
    if (j + 1 < y.size()) self(self, i, j + 1, acc);
    if (i + 1 < x.size() && j + 1 < y.size()) self(self, i + 1, j + 1, acc);
  };
  walk(walk, 0, 0, 0.0);
  return best;
}

/// Mid-ranks by pairwise counting: rank = #less + (#equal + 1) / 2.
inline std::vector<double> brute_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double u : v) {
      less += u < v[i];
      equal += u == v[i];
    }
    r[i] = less + (equal + 1.0) / 2.0;
  }
  return r;
}

/// Two-sided Wilcoxon signed-rank p for differences b - a by enumerating all
/// 2^n sign flips of the nonzero differences.
inline double brute_signed_rank_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> mag;
  std::vector<bool> pos;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = b[i] - a[i];
    if (d == 0.0) continue;
    mag.push_back(std::abs(d));
    pos.push_back(d > 0.0);
  }
  if (mag.empty()) return 1.0;
  const auto ranks = brute_ranks(mag);
  double observed = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i)
    if (pos[i]) observed += ranks[i];
  const std::size_t n = ranks.size();
  const std::size_t total = std::size_t{1} << n;
  std::size_t ge = 0, le = 0;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) w += ranks[i];
    ge += w >= observed - 1e-9;
    le += w <= observed + 1e-9;
  }
  const double p = 2.0 * static_cast<double>(std::min(ge, le)) / static_cast<double>(total);
  return std::min(1.0, p);
}

}  // namespace hrvfmri::testing
