#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"
#include "qsvr/parallel.hpp"
#include "qsvr/qubo.hpp"
#include "qsvr/random.hpp"

namespace qsvr {

/// Simulated-annealing parameters. Sweeps visit every variable once, in index
/// order, under one inverse temperature taken from a geometric schedule.
struct SaConfig {
  std::size_t sweeps = 1000;
  std::size_t reads = 1000;
  std::uint64_t seed = 0;
  std::size_t keep_best = 20;
  /// Inverse-temperature range; derived from the matrix when unset.
  std::optional<double> beta_min;
  std::optional<double> beta_max;
  /// Worker threads for independent reads (0 = hardware concurrency).
  std::size_t threads = 1;

  void validate() const {
    if (sweeps < 1) throw InvalidInput("SaConfig: sweeps must be >= 1");
    if (reads < 1) throw InvalidInput("SaConfig: reads must be >= 1");
    if (keep_best < 1 || keep_best > reads)
      throw InvalidInput("SaConfig: keep_best must be in [1, reads]");
    if (beta_min && beta_max && !(*beta_min > 0.0 && *beta_min <= *beta_max))
      throw InvalidInput("SaConfig: need 0 < beta_min <= beta_max");
  }
};

struct Sample {
  BitString bits;
  double energy = 0.0;
};

/// Samples sorted ascending by energy, ties broken by lexicographic bit order.
struct SampleSet {
  std::vector<Sample> samples;
  std::optional<SaConfig> config;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  const Sample& best() const {
    if (samples.empty()) throw InvalidInput("SampleSet::best: empty sample set");
    return samples.front();
  }
};

namespace detail {

inline bool sample_less(const Sample& a, const Sample& b) {
  if (a.energy != b.energy) return a.energy < b.energy;
  return a.bits < b.bits;
}

inline void sort_samples(std::vector<Sample>& s) { std::sort(s.begin(), s.end(), sample_less); }

/// Keeps the `keep` smallest samples seen so far (max-heap on sample_less).
class TopK {
 public:
  explicit TopK(std::size_t keep) : keep_(keep) {}

  /// True when a candidate with this energy could enter the set.
  bool admits(double e) const noexcept {
    return heap_.size() < keep_ || e <= heap_.front().energy;
  }

  void offer(Sample s) {
    if (heap_.size() < keep_) {
      heap_.push_back(std::move(s));
      std::push_heap(heap_.begin(), heap_.end(), sample_less);
    } else if (sample_less(s, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), sample_less);
      heap_.back() = std::move(s);
      std::push_heap(heap_.begin(), heap_.end(), sample_less);
    }
  }

  std::vector<Sample> take() && { return std::move(heap_); }

 private:
  std::size_t keep_;
  std::vector<Sample> heap_;
};

}  // namespace detail

/// Default inverse-temperature range: the hot end gives a 50% acceptance
/// chance to the largest possible single-flip increase, the cold end a 1%
/// chance to the smallest nonzero coefficient.
inline std::pair<double, double> default_beta_range(const DenseMatrix& q) {
  const std::size_t n = q.rows();
  double max_delta = 0.0;
  double min_delta = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    double bound = std::abs(q(k, k));
    if (q(k, k) != 0.0) min_delta = std::min(min_delta, std::abs(q(k, k)));
    for (std::size_t j = 0; j < n; ++j) {
      if (j == k || q(k, j) == 0.0) continue;
      bound += 2.0 * std::abs(q(k, j));
      min_delta = std::min(min_delta, 2.0 * std::abs(q(k, j)));
    }
    max_delta = std::max(max_delta, bound);
  }
  if (max_delta == 0.0) return {0.1, 1.0};
  const double hot = std::log(2.0) / max_delta;
  const double cold = std::log(100.0) / min_delta;
  return {hot, std::max(hot, cold)};
}

namespace detail {

inline Sample anneal_once(const DenseMatrix& q, const std::vector<double>& betas, std::uint64_t seed) {
  const std::size_t n = q.rows();
  Rng rng(seed);
  BitString a(n);
  for (auto& bit : a) bit = static_cast<std::uint8_t>(rng() >> 63);

  // field[k] = sum_{j != k} Q_kj a_j
  std::vector<double> field(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    auto row = q.row(k);
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != k && a[j]) acc += row[j];
    field[k] = acc;
  }

  for (double beta : betas) {
    for (std::size_t k = 0; k < n; ++k) {
      const double sign = a[k] ? -1.0 : 1.0;
      const double delta = sign * (q(k, k) + 2.0 * field[k]);
      if (delta > 0.0 && uniform01(rng) >= std::exp(-beta * delta)) continue;
      a[k] ^= 1;
      auto col = q.row(k);  // symmetric
      for (std::size_t j = 0; j < n; ++j)
        if (j != k) field[j] += sign * col[j];
    }
  }
  return {std::move(a), 0.0};
}

}  // namespace detail

/// Single-spin-flip Metropolis annealing. Each read starts from a random state
/// with its own generator seeded from (seed, read), so results do not depend
/// on the thread count.
inline SampleSet solve_sa(const QuboProblem& q, const SaConfig& cfg) {
  cfg.validate();
  if (q.dimension() < 1) throw InvalidInput("solve_sa: empty QUBO");

  auto [lo, hi] = default_beta_range(q.qmatrix);
  const double bmin = cfg.beta_min.value_or(lo);
  const double bmax = cfg.beta_max.value_or(hi);
  std::vector<double> betas(cfg.sweeps);
  for (std::size_t s = 0; s < cfg.sweeps; ++s) {
    const double t = cfg.sweeps == 1 ? 1.0 : static_cast<double>(s) / static_cast<double>(cfg.sweeps - 1);
    betas[s] = bmin * std::pow(bmax / bmin, t);
  }

  SampleSet out;
  out.config = cfg;
  out.samples.resize(cfg.reads);
  parallel_for(cfg.reads, cfg.threads, [&](std::size_t r) {
    Sample s = detail::anneal_once(q.qmatrix, betas, derive_seed(cfg.seed, {r}));
    s.energy = energy(q, s.bits);
    out.samples[r] = std::move(s);
  });
  detail::sort_samples(out.samples);
  return out;
}

/// Largest number of free bits the exhaustive solvers will enumerate.
inline constexpr std::size_t kExactMaxBits = 24;

namespace detail {

inline BitString mask_to_bits(std::uint64_t mask, std::size_t n) {
  BitString b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>((mask >> i) & 1U);
  return b;
}

/// Gray-code walk over all 2^n assignments of an arbitrary QUBO.
inline std::vector<Sample> enumerate_bits(const QuboProblem& q, std::size_t keep) {
  const std::size_t n = q.dimension();
  const DenseMatrix& m = q.qmatrix;
  TopK top(keep);
  std::vector<double> field(n, 0.0);  // sum_{j != k} Q_kj a_j
  std::uint64_t state = 0;
  double e = 0.0;
  top.offer({mask_to_bits(0, n), 0.0});

  const std::uint64_t total = std::uint64_t{1} << n;
  for (std::uint64_t step = 1; step < total; ++step) {
    const auto k = static_cast<std::size_t>(std::countr_zero(step));
    const bool on = ((state >> k) & 1U) == 0;
    const double sign = on ? 1.0 : -1.0;
    e += sign * (m(k, k) + 2.0 * field[k]);
    state ^= std::uint64_t{1} << k;
    for (std::size_t j = 0; j < n; ++j)
      if (j != k) field[j] += sign * m(j, k);
    if ((step & 0xfff) == 0) e = energy(q, mask_to_bits(state, n));  // resync drift
    if (top.admits(e + 1e-9 * (1.0 + std::abs(e)))) top.offer({mask_to_bits(state, n), e});
  }
  return std::move(top).take();
}

/// Exhaustive search for QUBOs built from an encoded dual. Energy depends on
/// the bits only through the integer multiplier values v, as
/// E = s^2 v^T A v + s c.v with s = 2^-B_f and A = Q/2 + lambda sigma sigma^T.
/// All multipliers but the last are enumerated; the last one enters as a 1-D
/// quadratic whose lowest values sit next to its vertex (or at the ends of the
/// range when it is not convex), so only a small window is scored.
inline std::vector<Sample> enumerate_multipliers(const QuboProblem& q, std::size_t keep) {
  const DualProblem& d = *q.source;
  const Encoding& enc = *q.encoding;
  const std::size_t p = d.dimension();
  const auto b = static_cast<std::size_t>(enc.bits);
  const std::int64_t levels = std::int64_t{1} << b;
  const double s = enc.step();

  DenseMatrix a(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double si = i < d.m ? 1.0 : -1.0;
      const double sj = j < d.m ? 1.0 : -1.0;
      a(i, j) = s * s * (0.5 * d.q(i, j) + q.lambda * si * sj);
    }
  Vector lin(p);
  for (std::size_t i = 0; i < p; ++i) lin[i] = s * d.c[i];

  auto to_bits = [&](const std::vector<std::int64_t>& v) {
    BitString bits(p * b);
    for (std::size_t m = 0; m < p; ++m)
      for (std::size_t i = 0; i < b; ++i) bits[b * m + i] = static_cast<std::uint8_t>((v[m] >> i) & 1);
    return bits;
  };

  TopK top(keep);
  std::vector<std::int64_t> v(p, 0);
  // field[j] = sum over assigned k of A_jk v_k
  std::vector<double> field(p, 0.0);
  const std::size_t last = p - 1;
  const auto window = static_cast<std::int64_t>(keep);

  auto score_last = [&](double base) {
    const double qa = a(last, last);
    const double t = lin[last] + 2.0 * field[last];
    auto consider = [&](std::int64_t x) {
      const double xv = static_cast<double>(x);
      const double e = base + qa * xv * xv + t * xv;
      if (!top.admits(e + 1e-9 * (1.0 + std::abs(e)))) return;
      v[last] = x;
      top.offer({to_bits(v), e});
    };
    if (qa > 0.0) {
      const double vertex = -t / (2.0 * qa);
      const double clamped = std::clamp(vertex, 0.0, static_cast<double>(levels - 1));
      const auto c = static_cast<std::int64_t>(std::llround(clamped));
      for (std::int64_t x = std::max<std::int64_t>(0, c - window);
           x <= std::min<std::int64_t>(levels - 1, c + window); ++x)
        consider(x);
    } else {
      const std::int64_t w = std::min(window, levels);
      for (std::int64_t x = 0; x < w; ++x) consider(x);
      for (std::int64_t x = std::max(w, levels - w); x < levels; ++x) consider(x);
    }
  };

  auto recurse = [&](auto&& self, std::size_t depth, double base) -> void {
    if (depth == last) {
      score_last(base);
      return;
    }
    const double qa = a(depth, depth);
    for (std::int64_t x = 0; x < levels; ++x) {
      const double xv = static_cast<double>(x);
      const double e = base + qa * xv * xv + (lin[depth] + 2.0 * field[depth]) * xv;
      v[depth] = x;
      for (std::size_t j = depth + 1; j < p; ++j) field[j] += a(j, depth) * xv;
      self(self, depth + 1, e);
      for (std::size_t j = depth + 1; j < p; ++j) field[j] -= a(j, depth) * xv;
    }
    v[depth] = 0;
  };
  recurse(recurse, 0, 0.0);
  return std::move(top).take();
}

}  // namespace detail

/// Exhaustive minimisation, returning the `keep` lowest-energy bit strings.
///
/// QUBOs carrying their encoded dual are searched over multiplier values with
/// the last multiplier solved in closed form, so the enumerated width is
/// (2M - 1) * B bits; any other QUBO enumerates all of its bits. Either width
/// is capped at kExactMaxBits.
inline SampleSet solve_exact(const QuboProblem& q, std::size_t keep = 1) {
  if (keep < 1) throw InvalidInput("solve_exact: keep must be >= 1");
  if (q.dimension() < 1) throw InvalidInput("solve_exact: empty QUBO");

  std::vector<Sample> found;
  const bool structured = q.source && q.encoding &&
                          q.source->dimension() * static_cast<std::size_t>(q.encoding->bits) == q.dimension();
  if (structured &&
      (q.source->dimension() - 1) * static_cast<std::size_t>(q.encoding->bits) <= kExactMaxBits) {
    found = detail::enumerate_multipliers(q, keep);
  } else if (q.dimension() <= kExactMaxBits) {
    found = detail::enumerate_bits(q, keep);
  } else {
    throw CapacityError("solve_exact: " + std::to_string(q.dimension()) +
                        " variables exceed the exhaustive-search limit of " +
                        std::to_string(kExactMaxBits) + " enumerated bits");
  }
  for (auto& s : found) s.energy = energy(q, s.bits);
  detail::sort_samples(found);
  if (found.size() > keep) found.resize(keep);
  return {std::move(found), std::nullopt};
}

/// Element-wise mean of the decoded k lowest-energy samples.
inline Vector average_low_energy(const SampleSet& samples, std::size_t k, const Encoding& enc) {
  if (samples.empty()) throw InvalidInput("average_low_energy: empty sample set");
  if (k < 1 || k > samples.size()) throw InvalidInput("average_low_energy: k must be in [1, |samples|]");
  Vector mean;
  for (std::size_t i = 0; i < k; ++i) {
    Vector alpha = decode(samples.samples[i].bits, enc);
    if (mean.empty()) mean.assign(alpha.size(), 0.0);
    for (std::size_t j = 0; j < alpha.size(); ++j) mean[j] += alpha[j];
  }
  for (double& x : mean) x /= static_cast<double>(k);
  return mean;
}

struct BaselineResult {
  Vector alpha;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Euclidean projection onto {0 <= alpha <= gamma, sum(alpha+) == sum(alpha-)}.
/// The minimiser has the form clip(z_i - tau sigma_i) with sigma = (+1.., -1..);
/// tau is found by bisection on the monotone constraint residual.
inline Vector project_feasible(std::span<const double> z, std::size_t m, double gamma) {
  auto clipped = [&](double tau, Vector& out) {
    double resid = 0.0;
    for (std::size_t i = 0; i < 2 * m; ++i) {
      const double sigma = i < m ? 1.0 : -1.0;
      out[i] = std::clamp(z[i] - tau * sigma, 0.0, gamma);
      resid += sigma * out[i];
    }
    return resid;
  };
  Vector out(2 * m);
  double span = gamma;
  for (double v : z) span = std::max(span, std::abs(v) + gamma);
  double lo = -span, hi = span;  // resid(lo) >= 0 >= resid(hi)
  for (int it = 0; it < 200 && lo < hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (clipped(mid, out) > 0.0) lo = mid;
    else hi = mid;
  }
  Vector alt(2 * m);
  const double rhi = clipped(hi, alt);
  const double rlo = clipped(lo, out);
  return std::abs(rhi) < std::abs(rlo) ? alt : out;
}

namespace detail {

/// Exact solve of the equality-constrained quadratic over the multipliers that
/// are strictly inside the box, holding the rest at their bounds. Variables
/// whose solution leaves the box are pinned to the bound they crossed and the
/// system is re-solved. Returns nullopt when no feasible refinement exists.
inline std::optional<Vector> refine_free_set(const DualProblem& dual, double gamma, const Vector& alpha) {
  const std::size_t n = dual.dimension();
  Vector cur = alpha;
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < n; ++i)
    if (cur[i] > 0.0 && cur[i] < gamma) free.push_back(i);

  while (!free.empty()) {
    const auto k = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k + 1, k + 1);
    Eigen::VectorXd rhs(k + 1);
    std::vector<bool> is_free(n, false);
    for (std::size_t i : free) is_free[i] = true;
    double fixed_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!is_free[i]) fixed_sum += (i < dual.m ? 1.0 : -1.0) * cur[i];
    for (Eigen::Index r = 0; r < k; ++r) {
      const std::size_t i = free[static_cast<std::size_t>(r)];
      double b = -dual.c[i];
      for (std::size_t j = 0; j < n; ++j)
        if (!is_free[j]) b -= dual.q(i, j) * cur[j];
      rhs(r) = b;
      for (Eigen::Index c = 0; c < k; ++c) a(r, c) = dual.q(i, free[static_cast<std::size_t>(c)]);
      const double sigma = i < dual.m ? 1.0 : -1.0;
      a(r, k) = sigma;
      a(k, r) = sigma;
    }
    rhs(k) = -fixed_sum;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) return std::nullopt;
    const Eigen::VectorXd sol = lu.solve(rhs);

    std::vector<std::size_t> keep;
    for (Eigen::Index r = 0; r < k; ++r) {
      const std::size_t i = free[static_cast<std::size_t>(r)];
      const double v = sol(r);
      if (!std::isfinite(v)) return std::nullopt;
      if (v <= 0.0) {
        cur[i] = 0.0;
      } else if (v >= gamma) {
        cur[i] = gamma;
      } else {
        cur[i] = v;
        keep.push_back(i);
      }
    }
    if (keep.size() == free.size()) return cur;
    free = std::move(keep);
  }
  return std::nullopt;
}

}  // namespace detail

/// Projected-gradient descent on the dual objective with box and equality
/// constraints. Step lengths come from backtracking, so the objective never
/// increases between iterations. Stops when an iteration improves the
/// objective by less than `tol`, then refines the final iterate by solving
/// the optimality system on its free multipliers; the refinement is kept only
/// if it is feasible and no worse up to rounding.
inline BaselineResult solve_dual_baseline(const DualProblem& dual, double gamma, double tol = 1e-12,
                                          std::size_t max_iter = 100000,
                                          std::vector<double>* trace = nullptr) {
  if (!(gamma > 0.0)) throw InvalidInput("solve_dual_baseline: gamma must be > 0");
  const std::size_t n = dual.dimension();
  BaselineResult res;
  res.alpha.assign(n, 0.0);
  double f = dual.objective(res.alpha);
  if (trace) trace->push_back(f);

  // Lipschitz estimate from the largest absolute row sum; backtracking below
  // lets the step grow past this conservative value.
  double lip = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::abs(dual.q(i, j));
    lip = std::max(lip, s);
  }
  double step = lip > 0.0 ? 1.0 / lip : 1.0;

  Vector grad(n), cand(n);
  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    Vector qa = multiply(dual.q, res.alpha);
    for (std::size_t i = 0; i < n; ++i) grad[i] = qa[i] + dual.c[i];

    double fc = 0.0;
    bool accepted = false;
    step *= 2.0;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t i = 0; i < n; ++i) cand[i] = res.alpha[i] - step * grad[i];
      cand = project_feasible(cand, dual.m, gamma);
      double lin = 0.0, sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = cand[i] - res.alpha[i];
        lin += grad[i] * d;
        sq += d * d;
      }
      fc = dual.objective(cand);
      if (fc <= f + lin + sq / (2.0 * step) + 1e-15 * (1.0 + std::abs(f))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || fc > f) {
      res.converged = true;  // no descent direction left at machine precision
      break;
    }
    const double improvement = f - fc;
    res.alpha = cand;
    f = fc;
    if (trace) trace->push_back(f);
    if (improvement < tol) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }

  if (const auto refined = detail::refine_free_set(dual, gamma, res.alpha)) {
    // The refined point is the exact stationary point of the free set, so a
    // rise at rounding level still counts as no worse.
    const double fr = dual.objective(*refined);
    if (fr <= f + 1e-12 * std::max(1.0, std::abs(f))) {
      res.alpha = *refined;
      if (trace && fr <= f) trace->push_back(fr);
      f = fr;
    }
  }
  res.objective = f;
  return res;
}

}  // namespace qsvr
