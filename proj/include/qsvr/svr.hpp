#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"
#include "qsvr/kernel.hpp"
#include "qsvr/qubo.hpp"
#include "qsvr/random.hpp"
#include "qsvr/solvers.hpp"
#include "qsvr/training_set.hpp"

namespace qsvr {

/// Hyperparameters for one training run. The box bound comes either from a
/// binary encoding (annealing / exact paths) or from an explicit gamma
/// (baseline path), never both.
struct HyperParams {
  double epsilon = 0.1;
  KernelSpec kernel = KernelSpec::gaussian(1.0);
  std::optional<Encoding> encoding;
  std::optional<double> box;
  double lambda = 0.0;

  static HyperParams encoded(Encoding enc, KernelSpec kernel, double lambda, double epsilon = 0.1) {
    HyperParams hp;
    hp.epsilon = epsilon;
    hp.kernel = kernel;
    hp.encoding = enc;
    hp.lambda = lambda;
    return hp;
  }

  static HyperParams boxed(double gamma, KernelSpec kernel, double epsilon = 0.1) {
    HyperParams hp;
    hp.epsilon = epsilon;
    hp.kernel = kernel;
    hp.box = gamma;
    return hp;
  }

  double gamma() const {
    if (encoding) return encoding->gamma();
    if (box) return *box;
    throw InvalidInput("HyperParams: neither encoding nor gamma set");
  }

  void validate() const {
    if (encoding.has_value() == box.has_value())
      throw InvalidInput("HyperParams: exactly one of encoding and gamma must be set");
    if (!(epsilon >= 0.0)) throw InvalidInput("HyperParams: epsilon must be >= 0");
    if (!(lambda >= 0.0)) throw InvalidInput("HyperParams: lambda must be >= 0");
    if (encoding) encoding->validate();
    if (box && !(*box > 0.0)) throw InvalidInput("HyperParams: gamma must be > 0");
    kernel.validate();
  }
};

/// Membership tolerance for "strictly inside (0, gamma)". Decoded multipliers
/// land exactly on 0 or gamma; only genuinely interior values count as free.
inline constexpr double kInteriorTol = 1e-12;

inline bool above_zero(double a) { return a > kInteriorTol; }
inline bool below_gamma(double a, double gamma) { return a < gamma - kInteriorTol; }
inline bool interior(double a, double gamma) { return above_zero(a) && below_gamma(a, gamma); }

/// KKT bounds on the offset b for given multipliers:
///   b-_i = -eps + y_i - sum_j (a+_j - a-_j) K(x_j, x_i),  b+_i = b-_i + 2 eps
///   lower = max( {b-_i : a+_i < gamma} u {b+_i : a-_i > 0} )
///   upper = min( {b-_i : a+_i > 0}     u {b+_i : a-_i < gamma} )
struct OffsetBounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  Vector b_minus;
  Vector b_plus;
  std::vector<std::size_t> lower_minus, lower_plus;  // indices feeding `lower`
  std::vector<std::size_t> upper_minus, upper_plus;  // indices feeding `upper`

  bool consistent(double tol = 1e-9) const { return lower <= upper + tol; }
};

inline OffsetBounds offset_bounds(std::span<const double> alphas, const TrainingSet& train,
                                  const KernelSpec& kernel, double epsilon, double gamma) {
  const std::size_t m = train.size();
  if (alphas.size() != 2 * m) throw InvalidInput("offset_bounds: alphas length != 2M");
  if (!(gamma > 0.0)) throw InvalidInput("offset_bounds: gamma must be > 0");
  const GramMatrix k = gram(kernel, train.xs());

  OffsetBounds ob;
  ob.b_minus.resize(m);
  ob.b_plus.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double f = 0.0;
    for (std::size_t j = 0; j < m; ++j) f += (alphas[j] - alphas[m + j]) * k(j, i);
    ob.b_minus[i] = -epsilon + train.ys()[i] - f;
    ob.b_plus[i] = epsilon + train.ys()[i] - f;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double ap = alphas[i];
    const double am = alphas[m + i];
    if (below_gamma(ap, gamma)) ob.lower_minus.push_back(i);
    if (above_zero(am)) ob.lower_plus.push_back(i);
    if (above_zero(ap)) ob.upper_minus.push_back(i);
    if (below_gamma(am, gamma)) ob.upper_plus.push_back(i);
  }
  if (ob.lower_minus.empty() && ob.lower_plus.empty() && ob.upper_minus.empty() && ob.upper_plus.empty())
    throw std::logic_error("offset_bounds: no index contributes to either bound");

  for (std::size_t i : ob.lower_minus) ob.lower = std::max(ob.lower, ob.b_minus[i]);
  for (std::size_t i : ob.lower_plus) ob.lower = std::max(ob.lower, ob.b_plus[i]);
  for (std::size_t i : ob.upper_minus) ob.upper = std::min(ob.upper, ob.b_minus[i]);
  for (std::size_t i : ob.upper_plus) ob.upper = std::min(ob.upper, ob.b_plus[i]);
  return ob;
}

/// Offset estimate: the mean of b-_i over interior a+_i and b+_i over interior
/// a-_i; the midpoint of the bounds when no multiplier is interior. At an
/// optimum no index has both multipliers interior, so dividing by the
/// multiplier count equals dividing by the index count.
inline double estimate_offset(const OffsetBounds& bounds, std::span<const double> alphas, double gamma) {
  const std::size_t m = bounds.b_minus.size();
  if (alphas.size() != 2 * m) throw InvalidInput("estimate_offset: alphas length != 2M");
  double sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (interior(alphas[i], gamma)) {
      sum += bounds.b_minus[i];
      ++free_count;
    }
    if (interior(alphas[m + i], gamma)) {
      sum += bounds.b_plus[i];
      ++free_count;
    }
  }
  if (free_count > 0) return sum / static_cast<double>(free_count);

  double lo = bounds.lower, hi = bounds.upper;
  // One side can be unbounded when every multiplier sits at the same end of
  // the box; fall back to the finite side.
  if (!std::isfinite(lo)) return hi;
  if (!std::isfinite(hi)) return lo;
  return 0.5 * (lo + hi);
}

enum class Method { Annealing, Exact, Baseline };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::Annealing: return "annealing";
    case Method::Exact: return "exact";
    case Method::Baseline: return "baseline";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "annealing") return Method::Annealing;
  if (s == "exact") return Method::Exact;
  if (s == "baseline") return Method::Baseline;
  throw InvalidInput("unknown method: " + std::string(s));
}

/// Solver settings for train(). Only the fields for the chosen method are read.
struct TrainOptions {
  Method method = Method::Baseline;
  SaConfig sa;
  std::size_t ensemble = 20;
  double baseline_tol = 1e-12;
  std::size_t baseline_max_iter = 100000;
};

struct EnsembleMember {
  Vector alphas;
  double offset = 0.0;
  bool kkt_consistent = true;
};

struct ModelMetadata {
  Method method = Method::Baseline;
  std::vector<std::uint64_t> seeds;
  std::optional<Encoding> encoding;
  double lambda = 0.0;
  bool converged = true;
  bool kkt_consistent = true;
};

/// Trained epsilon-SVR: f(x) = sum_i (a+_i - a-_i) K(x_i, x) + b. Ensemble
/// training stores the mean multipliers and mean offset, which gives the mean
/// member prediction because f is affine in (alpha, b).
struct SvrModel {
  Vector alphas;
  std::vector<Vector> support_xs;
  double offset = 0.0;
  KernelSpec kernel;
  double epsilon = 0.1;
  double gamma = 0.0;
  ModelMetadata metadata;
  std::vector<EnsembleMember> members;

  std::size_t feature_dim() const { return support_xs.empty() ? 0 : support_xs.front().size(); }
};

inline double predict(const SvrModel& model, std::span<const double> x) {
  const std::size_t m = model.support_xs.size();
  if (model.alphas.size() != 2 * m) throw InvalidInput("predict: malformed model");
  if (x.size() != model.feature_dim()) throw InvalidInput("predict: feature dimension mismatch");
  double f = model.offset;
  for (std::size_t i = 0; i < m; ++i) {
    const double beta = model.alphas[i] - model.alphas[m + i];
    if (beta != 0.0) f += beta * eval_kernel(model.kernel, model.support_xs[i], x);
  }
  return f;
}

namespace detail {

/// Offset for one solution. With consistent KKT bounds the averaged estimate
/// is clamped into [lower, upper]; crossed bounds (possible for penalised or
/// sampled solutions) keep the plain estimate.
inline EnsembleMember assemble_member(Vector alphas, const TrainingSet& train, const HyperParams& hp) {
  const double gamma = hp.gamma();
  for (double& a : alphas) a = std::clamp(a, 0.0, gamma);
  const OffsetBounds bounds = offset_bounds(alphas, train, hp.kernel, hp.epsilon, gamma);
  double b = estimate_offset(bounds, alphas, gamma);
  const bool ok = bounds.consistent();
  if (ok) b = std::max(std::min(b, bounds.upper), bounds.lower);
  return {std::move(alphas), b, ok};
}

}  // namespace detail

/// Trains an epsilon-SVR model by solving the dual with the chosen method.
///   Annealing: one QUBO, `ensemble` SA runs with seeds derived from
///              opts.sa.seed; each run's keep_best lowest samples are decoded
///              and averaged into one member.
///   Exact:     exhaustive QUBO minimum (capacity-limited).
///   Baseline:  projected-gradient solution of the box/equality-constrained dual.
inline SvrModel train(const TrainingSet& train, const HyperParams& hp, const TrainOptions& opts) {
  hp.validate();
  if (opts.ensemble < 1) throw InvalidInput("train: ensemble must be >= 1");
  if (opts.method != Method::Baseline && !hp.encoding)
    throw InvalidInput("train: annealing and exact methods need an encoding");
  if (opts.method == Method::Baseline && !hp.box)
    throw InvalidInput("train: baseline method needs an explicit gamma");

  const DualProblem dual = build_dual(train, hp.kernel, hp.epsilon);

  SvrModel model;
  model.support_xs = train.xs();
  model.kernel = hp.kernel;
  model.epsilon = hp.epsilon;
  model.gamma = hp.gamma();
  model.metadata.method = opts.method;
  model.metadata.encoding = hp.encoding;
  model.metadata.lambda = hp.lambda;

  switch (opts.method) {
    case Method::Annealing: {
      const QuboProblem q = build_qubo(dual, *hp.encoding, hp.lambda);
      for (std::size_t e = 0; e < opts.ensemble; ++e) {
        SaConfig cfg = opts.sa;
        cfg.seed = derive_seed(opts.sa.seed, {e});
        model.metadata.seeds.push_back(cfg.seed);
        const SampleSet samples = solve_sa(q, cfg);
        Vector alpha = average_low_energy(samples, cfg.keep_best, *hp.encoding);
        model.members.push_back(detail::assemble_member(std::move(alpha), train, hp));
      }
      break;
    }
    case Method::Exact: {
      const QuboProblem q = build_qubo(dual, *hp.encoding, hp.lambda);
      const SampleSet best = solve_exact(q, 1);
      model.members.push_back(detail::assemble_member(decode(best.best().bits, *hp.encoding), train, hp));
      break;
    }
    case Method::Baseline: {
      const BaselineResult r = solve_dual_baseline(dual, *hp.box, opts.baseline_tol, opts.baseline_max_iter);
      model.metadata.converged = r.converged;
      model.members.push_back(detail::assemble_member(r.alpha, train, hp));
      break;
    }
  }

  model.alphas.assign(2 * train.size(), 0.0);
  for (const auto& mem : model.members) {
    for (std::size_t i = 0; i < mem.alphas.size(); ++i) model.alphas[i] += mem.alphas[i];
    model.offset += mem.offset;
    model.metadata.kkt_consistent = model.metadata.kkt_consistent && mem.kkt_consistent;
  }
  const auto count = static_cast<double>(model.members.size());
  for (double& a : model.alphas) a /= count;
  model.offset /= count;
  return model;
}

}  // namespace qsvr
