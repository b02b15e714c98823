#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"

namespace qsvr {

inline double mean_of(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("mean of an empty list");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Pearson correlation. A constant x yields 0; a constant y is degenerate.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidInput("pearson: length mismatch");
  if (x.size() < 2) throw InvalidInput("pearson: need at least two samples");
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (syy == 0.0) throw DegenerateData("pearson: constant targets");
  if (sxx == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct Selection {
  std::vector<std::size_t> indices;  // ascending
  Vector scores;                     // |r| per input column
  std::vector<Vector> reduced;       // rows restricted to `indices`
};

inline constexpr std::size_t kMaxSelected = 9;

inline std::vector<Vector> select_columns(const std::vector<Vector>& rows, std::span<const std::size_t> cols) {
  std::vector<Vector> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    Vector v;
    v.reserve(cols.size());
    for (std::size_t c : cols) {
      detail::require(c < r.size(), "select_columns: column index out of range");
      v.push_back(r[c]);
    }
    out.push_back(std::move(v));
  }
  return out;
}

/// Keeps the `count` columns with the largest |r| against the targets; ties
/// go to the lower column index.
inline Selection pearson_select(const std::vector<Vector>& rows, std::span<const double> targets, std::size_t count) {
  if (count < 1 || count > kMaxSelected) throw InvalidInput("pearson_select: count must be in [1, 9]");
  if (rows.size() != targets.size()) throw InvalidInput("pearson_select: rows/targets length mismatch");
  if (rows.size() < 2) throw InvalidInput("pearson_select: need at least two samples");
  const std::size_t cols = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != cols) throw InvalidInput("pearson_select: ragged feature rows");
  if (count > cols) throw InvalidInput("pearson_select: count exceeds column count");

  Selection s;
  s.scores.resize(cols);
  Vector column(rows.size());
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = rows[i][c];
    s.scores[c] = std::abs(pearson(column, targets));
  }
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  s.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(s.indices.begin(), s.indices.end());
  s.reduced = select_columns(rows, s.indices);
  return s;
}

}  // namespace qsvr
