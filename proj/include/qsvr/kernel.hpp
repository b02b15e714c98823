#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"

namespace qsvr {

enum class KernelKind { Linear, Polynomial, Gaussian };

inline std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Polynomial: return "polynomial";
    case KernelKind::Gaussian: return "gaussian";
  }
  return "?";
}

inline KernelKind parse_kernel_kind(std::string_view s) {
  if (s == "linear") return KernelKind::Linear;
  if (s == "polynomial") return KernelKind::Polynomial;
  if (s == "gaussian") return KernelKind::Gaussian;
  throw InvalidInput("unknown kernel kind: " + std::string(s));
}

/// Kernel choice and its parameters.
///
/// Linear:      K(a,b) = a.b
/// Polynomial:  K(a,b) = (a.b + shift)^degree   (any real shift is accepted)
/// Gaussian:    K(a,b) = exp(-eta |a-b|^2)
struct KernelSpec {
  KernelKind kind = KernelKind::Gaussian;
  double eta = 1.0;
  int degree = 2;
  double shift = 0.0;

  static KernelSpec linear() { return {KernelKind::Linear, 1.0, 2, 0.0}; }
  static KernelSpec polynomial(int degree, double shift = 0.0) {
    return {KernelKind::Polynomial, 1.0, degree, shift};
  }
  static KernelSpec gaussian(double eta) { return {KernelKind::Gaussian, eta, 2, 0.0}; }

  void validate() const {
    if (kind == KernelKind::Gaussian && !(eta > 0.0))
      throw InvalidInput("gaussian kernel requires eta > 0");
    if (kind == KernelKind::Polynomial && degree < 1)
      throw InvalidInput("polynomial kernel requires degree >= 1");
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline double eval_kernel(const KernelSpec& spec, std::span<const double> a,
                          std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("eval_kernel: dimension mismatch");
  if (a.empty()) throw InvalidInput("eval_kernel: empty feature vector");
  switch (spec.kind) {
    case KernelKind::Linear:
      return dot(a, b);
    case KernelKind::Polynomial: {
      const double base = dot(a, b) + spec.shift;
      double r = 1.0;
      for (int i = 0; i < spec.degree; ++i) r *= base;
      return r;
    }
    case KernelKind::Gaussian: {
      double sq = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
      }
      return std::exp(-spec.eta * sq);
    }
  }
  return 0.0;
}

/// Symmetric kernel matrix over a sample list.
struct GramMatrix {
  DenseMatrix entries;
  KernelSpec spec;

  std::size_t size() const noexcept { return entries.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return entries(i, j); }
};

inline GramMatrix gram(const KernelSpec& spec, const std::vector<Vector>& xs) {
  spec.validate();
  if (xs.empty()) throw InvalidInput("gram: empty sample list");
  const std::size_t f = xs.front().size();
  for (const auto& x : xs)
    if (x.size() != f) throw InvalidInput("gram: ragged feature vectors");

  const std::size_t m = xs.size();
  GramMatrix g{DenseMatrix(m, m), spec};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const double k = eval_kernel(spec, xs[i], xs[j]);
      g.entries(i, j) = k;
      g.entries(j, i) = k;
    }
  }
  return g;
}

/// Heuristic Gaussian width 1/(F sigma^2) for F features of variance sigma^2.
inline double default_eta(std::size_t feature_count, double variance) {
  if (feature_count < 1) throw InvalidInput("default_eta: feature count must be >= 1");
  if (!(variance > 0.0)) throw DegenerateData("default_eta: data variance must be positive");
  return 1.0 / (static_cast<double>(feature_count) * variance);
}

/// Population variance of all feature values in a sample list.
inline double pooled_variance(const std::vector<Vector>& xs) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& x : xs)
    for (double v : x) {
      sum += v;
      ++n;
    }
  if (n == 0) throw InvalidInput("pooled_variance: no data");
  const double mean = sum / static_cast<double>(n);
  for (const auto& x : xs)
    for (double v : x) sq += (v - mean) * (v - mean);
  return sq / static_cast<double>(n);
}

}  // namespace qsvr
