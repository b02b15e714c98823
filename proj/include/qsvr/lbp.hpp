#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <vector>

#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"
#include "qsvr/image.hpp"

namespace qsvr {

inline constexpr int kLbpPoints = 8;
inline constexpr std::size_t kLbpBins = 59;
inline constexpr std::size_t kGridCells = 3;
inline constexpr std::size_t kFeatureCount = kGridCells * kGridCells * kLbpBins;  // 531

/// Feature row, either the full spatial histogram or a selected subset.
struct FeatureVector {
  Vector values;
  std::optional<std::vector<std::size_t>> selection;  // nullopt: full 531-vector

  bool full() const noexcept { return !selection.has_value(); }
};

/// Number of 0/1 transitions around the circular 8-bit pattern.
inline int lbp_transitions(std::uint8_t code) {
  const auto rotated = static_cast<std::uint8_t>((code >> 1) | (code << 7));
  return std::popcount(static_cast<unsigned>(code ^ rotated));
}

/// Histogram bin per code: the 58 uniform codes in ascending order take bins
/// 0..57, everything else bin 58.
inline const std::array<std::uint8_t, 256>& lbp_bin_table() {
  static const std::array<std::uint8_t, 256> table = [] {
    std::array<std::uint8_t, 256> t{};
    std::uint8_t next = 0;
    for (int code = 0; code < 256; ++code)
      t[static_cast<std::size_t>(code)] =
          lbp_transitions(static_cast<std::uint8_t>(code)) <= 2 ? next++ : static_cast<std::uint8_t>(kLbpBins - 1);
    return t;
  }();
  return table;
}

namespace detail {

struct LbpOffset {
  double dr, dc;
};

/// Circular (8, 1) neighbourhood, counter-clockwise from the right-hand
/// neighbour, rounded to 5 decimals so axis-aligned taps land on pixels.
inline const std::array<LbpOffset, kLbpPoints>& lbp_offsets() {
  static const std::array<LbpOffset, kLbpPoints> offs = [] {
    std::array<LbpOffset, kLbpPoints> o{};
    for (int p = 0; p < kLbpPoints; ++p) {
      const double t = 2.0 * std::numbers::pi * p / kLbpPoints;
      o[static_cast<std::size_t>(p)] = {std::round(-std::sin(t) * 1e5) / 1e5, std::round(std::cos(t) * 1e5) / 1e5};
    }
    return o;
  }();
  return offs;
}

/// Bilinear sample with edge replication outside the image.
inline double sample_clamped(const NormalizedImage& img, double r, double c) {
  const long n = static_cast<long>(kNormSide);
  const double rf = std::floor(r), cf = std::floor(c);
  const double fy = r - rf, fx = c - cf;
  const auto clampi = [n](double v) { return static_cast<std::size_t>(std::clamp(static_cast<long>(v), 0L, n - 1)); };
  const std::size_t r0 = clampi(rf), r1 = clampi(rf + 1), c0 = clampi(cf), c1 = clampi(cf + 1);
  const double v00 = img(r0, c0), v01 = img(r0, c1), v10 = img(r1, c0), v11 = img(r1, c1);
  const double top = v00 + fx * (v01 - v00);
  const double bot = v10 + fx * (v11 - v10);
  return top + fy * (bot - top);
}

}  // namespace detail

/// 8-bit LBP code per pixel; bit p is set when neighbour p >= centre.
inline std::vector<std::uint8_t> lbp_codes(const NormalizedImage& img) {
  const auto& offs = detail::lbp_offsets();
  std::vector<std::uint8_t> codes(kNormSide * kNormSide);
  for (std::size_t r = 0; r < kNormSide; ++r)
    for (std::size_t c = 0; c < kNormSide; ++c) {
      const double centre = img(r, c);
      unsigned code = 0;
      for (int p = 0; p < kLbpPoints; ++p) {
        const auto& o = offs[static_cast<std::size_t>(p)];
        const double v = detail::sample_clamped(img, static_cast<double>(r) + o.dr, static_cast<double>(c) + o.dc);
        if (v >= centre) code |= 1u << p;
      }
      codes[r * kNormSide + c] = static_cast<std::uint8_t>(code);
    }
  return codes;
}

/// Spatially enhanced histogram: one L1-normalised 59-bin uniform-LBP
/// histogram per cell of a 3x3 grid, concatenated row-major.
inline FeatureVector lbp_features(const NormalizedImage& img) {
  const auto codes = lbp_codes(img);
  const auto& bins = lbp_bin_table();
  constexpr std::size_t cell = kNormSide / kGridCells;
  FeatureVector out;
  out.values.assign(kFeatureCount, 0.0);
  for (std::size_t r = 0; r < kNormSide; ++r)
    for (std::size_t c = 0; c < kNormSide; ++c) {
      const std::size_t seg = (r / cell) * kGridCells + c / cell;
      out.values[seg * kLbpBins + bins[codes[r * kNormSide + c]]] += 1.0;
    }
  for (double& v : out.values) v /= static_cast<double>(cell * cell);
  return out;
}

}  // namespace qsvr
