#pragma once

#include <cmath>
#include <span>
#include <string_view>

#include "qsvr/error.hpp"
#include "qsvr/selection.hpp"

namespace qsvr {

inline constexpr double kDefaultFailThreshold = 0.1;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// e = |true - pred| / d.
inline double detection_error(Point truth, Point pred, double d) {
  if (!(d > 0.0)) throw InvalidInput("detection_error: normaliser d must be > 0");
  return std::hypot(truth.x - pred.x, truth.y - pred.y) / d;
}

inline double mnde(std::span<const double> errors) {
  if (errors.empty()) throw InvalidInput("mnde: empty error list");
  return mean_of(errors);
}

/// Fraction of errors strictly above the threshold.
inline double failure_rate(std::span<const double> errors, double e_th = kDefaultFailThreshold) {
  if (errors.empty()) throw InvalidInput("failure_rate: empty error list");
  if (!(e_th > 0.0)) throw InvalidInput("failure_rate: threshold must be > 0");
  std::size_t fails = 0;
  for (double e : errors) fails += e > e_th ? 1 : 0;
  return static_cast<double>(fails) / static_cast<double>(errors.size());
}

/// Population variance.
inline double variance(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

inline double stddev(std::span<const double> v) { return std::sqrt(variance(v)); }

enum class MneMode { Signed, Abs };

inline std::string_view to_string(MneMode m) { return m == MneMode::Signed ? "signed" : "abs"; }

inline MneMode parse_mne_mode(std::string_view s) {
  if (s == "signed") return MneMode::Signed;
  if (s == "abs") return MneMode::Abs;
  throw InvalidInput("unknown MNE mode '" + std::string(s) + "' (expected signed or abs)");
}

/// Mean normalised error per coordinate, mean((s - s~) / side); Abs mode
/// averages |s - s~| / side instead.
inline double mne(std::span<const double> truth, std::span<const double> pred, double side = 90.0,
                  MneMode mode = MneMode::Signed) {
  if (truth.size() != pred.size()) throw InvalidInput("mne: length mismatch");
  if (truth.empty()) throw InvalidInput("mne: empty input");
  if (!(side > 0.0)) throw InvalidInput("mne: side must be > 0");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double r = (truth[i] - pred[i]) / side;
    s += mode == MneMode::Abs ? std::abs(r) : r;
  }
  return s / static_cast<double>(truth.size());
}

}  // namespace qsvr
