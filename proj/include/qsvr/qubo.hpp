#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"
#include "qsvr/kernel.hpp"
#include "qsvr/training_set.hpp"

namespace qsvr {

// The epsilon-SVR dual in single-vector form, over alpha = (alpha+ | alpha-):
//
//   minimise  1/2 alpha^T Q alpha + alpha . c
//   s.t.      sum(alpha+) == sum(alpha-),  0 <= alpha_i <= gamma
//
// with Q = [[K, -K], [-K, K]], c_i = eps - y_i, c_{M+i} = eps + y_i.
struct DualProblem {
  DenseMatrix q;
  Vector c;
  std::size_t m = 0;
  double epsilon = 0.0;

  std::size_t dimension() const noexcept { return 2 * m; }

  /// Dual objective without the equality penalty.
  double objective(std::span<const double> alpha) const {
    detail::require(alpha.size() == 2 * m, "DualProblem::objective: alpha length != 2M");
    Vector qa = multiply(q, alpha);
    return 0.5 * dot(alpha, qa) + dot(alpha, c);
  }
};

inline DualProblem build_dual(const TrainingSet& train, const KernelSpec& spec, double epsilon) {
  if (train.empty()) throw InvalidInput("build_dual: empty training set");
  if (!(epsilon >= 0.0)) throw InvalidInput("build_dual: epsilon must be >= 0");
  const GramMatrix k = gram(spec, train.xs());
  const std::size_t m = train.size();

  DualProblem d;
  d.m = m;
  d.epsilon = epsilon;
  d.q = DenseMatrix(2 * m, 2 * m);
  d.c.assign(2 * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double v = k(i, j);
      d.q(i, j) = v;
      d.q(m + i, m + j) = v;
      d.q(i, m + j) = -v;
      d.q(m + i, j) = -v;
    }
    d.c[i] = epsilon - train.ys()[i];
    d.c[m + i] = epsilon + train.ys()[i];
  }
  return d;
}

/// Fixed-point binary encoding of one multiplier: B bits total, B_f of them fractional.
/// alpha = 2^-B_f * sum_{i<B} 2^i a_i, so alpha ranges over [0, gamma] in steps of 2^-B_f.
struct Encoding {
  int bits = 4;
  int frac_bits = 0;

  void validate() const {
    if (bits < 1 || bits > 30) throw InvalidInput("Encoding: bits must be in [1, 30]");
    if (frac_bits < 0 || frac_bits >= bits)
      throw InvalidInput("Encoding: fractional bits must be in [0, bits)");
  }

  /// Largest representable multiplier, (2^B - 1) / 2^B_f.
  double gamma() const { return std::ldexp(std::ldexp(1.0, bits) - 1.0, -frac_bits); }

  /// Quantisation error bound 2^(-B_f-1).
  double precision() const { return std::ldexp(1.0, -frac_bits - 1); }

  double step() const { return std::ldexp(1.0, -frac_bits); }

  friend bool operator==(const Encoding&, const Encoding&) = default;
};

using BitString = std::vector<std::uint8_t>;

/// Decodes a bit string into multipliers, B consecutive bits (LSB first) per multiplier.
inline Vector decode(std::span<const std::uint8_t> bits, const Encoding& enc) {
  enc.validate();
  const auto b = static_cast<std::size_t>(enc.bits);
  if (bits.size() % b != 0) throw InvalidInput("decode: bit count not a multiple of B");
  Vector alpha(bits.size() / b, 0.0);
  for (std::size_t m = 0; m < alpha.size(); ++m) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < b; ++i) {
      const auto bit = bits[b * m + i];
      if (bit > 1) throw InvalidInput("decode: bit values must be 0 or 1");
      v |= static_cast<std::uint64_t>(bit) << i;
    }
    alpha[m] = std::ldexp(static_cast<double>(v), -enc.frac_bits);
  }
  return alpha;
}

/// Penalised dual objective 1/2 a^T Q a + a.c + lambda (sum alpha+ - sum alpha-)^2.
inline double lagrangian(const DualProblem& dual, double lambda, std::span<const double> alpha) {
  detail::require(alpha.size() == dual.dimension(), "lagrangian: alpha length != 2M");
  double diff = 0.0;
  for (std::size_t i = 0; i < dual.m; ++i) diff += alpha[i] - alpha[dual.m + i];
  return dual.objective(alpha) + lambda * diff * diff;
}

/// Symmetric QUBO matrix with optional provenance from an encoded dual problem.
struct QuboProblem {
  DenseMatrix qmatrix;
  std::optional<Encoding> encoding;
  double lambda = 0.0;
  std::shared_ptr<const DualProblem> source;

  std::size_t dimension() const noexcept { return qmatrix.rows(); }

  /// Wraps an arbitrary square matrix; the stored form is (A + A^T)/2, which
  /// leaves a^T A a unchanged.
  static QuboProblem from_matrix(const DenseMatrix& a) {
    if (!a.square()) throw InvalidInput("QuboProblem: matrix must be square");
    QuboProblem q;
    q.qmatrix = DenseMatrix(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = i; j < a.cols(); ++j) {
        const double v = i == j ? a(i, i) : 0.5 * (a(i, j) + a(j, i));
        q.qmatrix(i, j) = v;
        q.qmatrix(j, i) = v;
      }
    return q;
  }
};

/// Expands the penalised dual into QUBO form. Element (Bn+i, Bm+j) is
///
///   1/2 2^(i+j) / 2^(2B_f) Q_nm  +  2^i / 2^B_f delta_nm delta_ij c_n  +  lambda 2^(i+j) / 2^(2B_f)
///   - 2 lambda 2^(i+j) / 2^(2B_f) [ step'(m-M) step(n-M) + step'(n-M) step(m-M) ]
///
/// where step(k) = 1 for k >= 0 and step' = 1 - step.
inline QuboProblem build_qubo(const DualProblem& dual, const Encoding& enc, double lambda) {
  enc.validate();
  if (!(lambda >= 0.0)) throw InvalidInput("build_qubo: lambda must be >= 0");

  const auto step = [](long long k) -> double { return k >= 0 ? 1.0 : 0.0; };
  const auto step_bar = [&](long long k) -> double { return 1.0 - step(k); };

  const std::size_t b = static_cast<std::size_t>(enc.bits);
  const std::size_t n_mult = dual.dimension();
  const std::size_t dim = n_mult * b;
  const auto big_m = static_cast<long long>(dual.m);

  QuboProblem out;
  out.qmatrix = DenseMatrix(dim, dim);
  out.encoding = enc;
  out.lambda = lambda;
  out.source = std::make_shared<const DualProblem>(dual);

  for (std::size_t n = 0; n < n_mult; ++n) {
    for (std::size_t m = n; m < n_mult; ++m) {
      const auto nn = static_cast<long long>(n);
      const auto mm = static_cast<long long>(m);
      const double cross = step_bar(mm - big_m) * step(nn - big_m) + step_bar(nn - big_m) * step(mm - big_m);
      for (std::size_t i = 0; i < b; ++i) {
        for (std::size_t j = 0; j < b; ++j) {
          const std::size_t r = b * n + i;
          const std::size_t col = b * m + j;
          if (col < r) continue;
          const double w = std::ldexp(1.0, static_cast<int>(i + j) - 2 * enc.frac_bits);
          double v = 0.5 * w * dual.q(n, m) + lambda * w - 2.0 * lambda * w * cross;
          if (n == m && i == j) v += std::ldexp(1.0, static_cast<int>(i) - enc.frac_bits) * dual.c[n];
          out.qmatrix(r, col) = v;
          out.qmatrix(col, r) = v;
        }
      }
    }
  }
  return out;
}

/// E(a) = a^T Q a.
inline double energy(const QuboProblem& q, std::span<const std::uint8_t> bits) {
  if (bits.size() != q.dimension()) throw InvalidInput("energy: bit string length != QUBO dimension");
  double e = 0.0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    auto row = q.qmatrix.row(i);
    double acc = row[i];
    for (std::size_t j = i + 1; j < bits.size(); ++j)
      if (bits[j]) acc += 2.0 * row[j];
    e += acc;
  }
  return e;
}

struct Coupling {
  std::size_t i;
  std::size_t j;
  double value;
};

/// E(s) = sum h_i s_i + sum_{i<j} J_ij s_i s_j + offset, with s_i in {-1, +1}.
struct IsingModel {
  Vector h;
  std::vector<Coupling> couplings;  // i < j, nonzero only
  double offset = 0.0;

  double energy(std::span<const int> spins) const {
    detail::require(spins.size() == h.size(), "IsingModel::energy: spin count mismatch");
    double e = offset;
    for (std::size_t i = 0; i < h.size(); ++i) e += h[i] * spins[i];
    for (const auto& c : couplings) e += c.value * spins[c.i] * spins[c.j];
    return e;
  }
};

/// Rewrites the QUBO in spin variables via a_i = (s_i + 1) / 2.
inline IsingModel to_ising(const QuboProblem& q) {
  const std::size_t n = q.dimension();
  IsingModel model;
  model.h.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = q.qmatrix(i, i);
    model.h[i] += 0.5 * d;
    model.offset += 0.5 * d;
    for (std::size_t j = i + 1; j < n; ++j) {
      // a_i a_j appears twice in a^T Q a.
      const double w = q.qmatrix(i, j) + q.qmatrix(j, i);
      if (w == 0.0) continue;
      model.couplings.push_back({i, j, 0.25 * w});
      model.h[i] += 0.25 * w;
      model.h[j] += 0.25 * w;
      model.offset += 0.25 * w;
    }
  }
  return model;
}

/// Plain-text export: "qubo <dim>" then "i j value" for each nonzero entry with
/// i <= j, row-major. Values are the symmetric matrix entries, so an
/// off-diagonal pair contributes 2 * value * a_i a_j to the energy.
inline void write_qubo_text(std::ostream& os, const QuboProblem& q) {
  const std::size_t n = q.dimension();
  os << "qubo " << n << '\n';
  char buf[64];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = q.qmatrix(i, j);
      if (v == 0.0) continue;
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << i << ' ' << j << ' ' << buf << '\n';
    }
}

inline QuboProblem read_qubo_text(std::istream& is, const std::string& name = "<qubo>") {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(is, line)) throw ParseError(name, lineno, "missing header");
  std::istringstream header(line);
  std::string tag;
  std::size_t n = 0;
  if (!(header >> tag >> n) || tag != "qubo") throw ParseError(name, lineno, "expected 'qubo <dim>'");
  DenseMatrix m(n, n);
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t i = 0, j = 0;
    double v = 0.0;
    if (!(ss >> i >> j >> v) || i >= n || j >= n || j < i)
      throw ParseError(name, lineno, "expected 'i j value' with i <= j < dim");
    m(i, j) = v;
    m(j, i) = v;
  }
  return QuboProblem::from_matrix(m);
}

}  // namespace qsvr
