#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qsvr/error.hpp"
#include "qsvr/image.hpp"
#include "qsvr/kernel.hpp"
#include "qsvr/metrics.hpp"
#include "qsvr/parallel.hpp"
#include "qsvr/random.hpp"
#include "qsvr/svr.hpp"

namespace qsvr {

/// One candidate hyperparameter tuple: (gamma, eta) for the baseline solver,
/// (B, B_f, eta, lambda) for the encoded solvers.
struct HyperTuple {
  double eta = 1.0;
  std::optional<double> gamma;
  std::optional<Encoding> encoding;
  double lambda = 0.0;
  double epsilon = 0.1;

  HyperParams params() const {
    if (encoding) return HyperParams::encoded(*encoding, KernelSpec::gaussian(eta), lambda, epsilon);
    if (gamma) return HyperParams::boxed(*gamma, KernelSpec::gaussian(eta), epsilon);
    throw InvalidInput("HyperTuple: neither gamma nor encoding set");
  }

  /// Content hash; seeds derived from it do not depend on grid position.
  std::uint64_t fingerprint() const {
    std::uint64_t h = splitmix64(std::bit_cast<std::uint64_t>(eta));
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(gamma.value_or(-1.0)));
    h = splitmix64(h ^ static_cast<std::uint64_t>(encoding ? encoding->bits : -1));
    h = splitmix64(h ^ static_cast<std::uint64_t>(encoding ? encoding->frac_bits : -1));
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(lambda));
    return splitmix64(h ^ std::bit_cast<std::uint64_t>(epsilon));
  }

  std::string label() const {
    std::ostringstream os;
    if (encoding)
      os << "(B=" << encoding->bits << " Bf=" << encoding->frac_bits << " eta=" << eta << " lambda=" << lambda << ')';
    else
      os << "(gamma=" << gamma.value_or(0.0) << " eta=" << eta << ')';
    return os.str();
  }

  friend bool operator==(const HyperTuple&, const HyperTuple&) = default;
};

struct HyperGrid {
  std::vector<HyperTuple> tuples;

  std::size_t size() const noexcept { return tuples.size(); }

  static HyperGrid baseline(const std::vector<double>& gammas, const std::vector<double>& etas, double epsilon = 0.1) {
    HyperGrid g;
    for (double gm : gammas)
      for (double e : etas) g.tuples.push_back({e, gm, std::nullopt, 0.0, epsilon});
    return g;
  }

  static HyperGrid encoded(const std::vector<int>& bits, const std::vector<int>& frac_bits,
                           const std::vector<double>& etas, const std::vector<double>& lambdas, double epsilon = 0.1) {
    HyperGrid g;
    for (int b : bits)
      for (int bf : frac_bits)
        for (double e : etas)
          for (double l : lambdas) g.tuples.push_back({e, std::nullopt, Encoding{b, bf}, l, epsilon});
    return g;
  }

  /// gamma in {15, 31, 63}, eta in {4, 16, 64, 256}: 12 tuples.
  static HyperGrid default_baseline() { return baseline({15, 31, 63}, {4, 16, 64, 256}); }

  /// B in {4, 5, 6}, B_f = 0, eta in {4, 16, 64, 256}, lambda in {1, 5, 10}: 36 tuples.
  static HyperGrid default_encoded() { return encoded({4, 5, 6}, {0}, {4, 16, 64, 256}, {1, 5, 10}); }

  static HyperGrid default_for(Method m) { return m == Method::Baseline ? default_baseline() : default_encoded(); }
};

struct MccvOptions {
  std::size_t repeats = 50;
  double train_frac = 0.10;
  std::uint64_t seed = 0;
  MneMode mode = MneMode::Abs;
  std::size_t threads = 1;
};

struct MccvResult {
  std::size_t best = 0;
  HyperTuple tuple;
  Vector scores;  // mean score per grid tuple
  bool converged = true;
};

/// Monte-Carlo cross-validation over the grid. Every tuple sees the same
/// resamples; each repeat trains on round(train_frac * N) samples and is
/// scored on the rest in the 90-pixel frame. Signed mode scores |mean(s - s~)|/90
/// per repeat, Abs mode mean(|s - s~|)/90. Lowest mean score wins; ties go
/// to the earlier tuple.
inline MccvResult mccv(const TrainingSet& data, const HyperGrid& grid, const TrainOptions& train_opts,
                       const MccvOptions& opts) {
  if (grid.tuples.empty()) throw InvalidInput("mccv: empty grid");
  if (opts.repeats < 1) throw InvalidInput("mccv: repeats must be >= 1");
  if (!(opts.train_frac > 0.0 && opts.train_frac < 1.0)) throw InvalidInput("mccv: train fraction must be in (0, 1)");
  const std::size_t n = data.size();
  const auto t = static_cast<std::size_t>(std::llround(opts.train_frac * static_cast<double>(n)));
  if (t < 2 || t >= n) throw InvalidInput("mccv: split leaves " + std::to_string(t) + " of " + std::to_string(n) +
                                          " samples for training; need >= 2 and a nonempty validation set");

  struct Split {
    TrainingSet train;
    TrainingSet validate;
  };
  std::vector<Split> splits;
  splits.reserve(opts.repeats);
  for (std::size_t r = 0; r < opts.repeats; ++r) {
    Rng rng(derive_seed(opts.seed, {r}));
    auto tr = sample_without_replacement(n, t, rng);
    std::vector<bool> used(n, false);
    for (std::size_t i : tr) used[i] = true;
    std::vector<std::size_t> va;
    for (std::size_t i = 0; i < n; ++i)
      if (!used[i]) va.push_back(i);
    splits.push_back({data.subset(tr), data.subset(va)});
  }

  const std::size_t k = grid.size();
  Vector per(k * opts.repeats, 0.0);
  std::vector<char> conv(k * opts.repeats, 1);
  parallel_for(k * opts.repeats, opts.threads, [&](std::size_t w) {
    const std::size_t ti = w / opts.repeats, r = w % opts.repeats;
    const HyperTuple& tuple = grid.tuples[ti];
    TrainOptions to = train_opts;
    to.sa.seed = derive_seed(opts.seed, {tuple.fingerprint(), r});
    const SvrModel model = train(splits[r].train, tuple.params(), to);
    conv[w] = model.metadata.converged;
    const auto& val = splits[r].validate;
    Vector pred(val.size());
    for (std::size_t i = 0; i < val.size(); ++i) pred[i] = predict(model, val.xs()[i]);
    const double side = static_cast<double>(kNormSide);
    per[w] = opts.mode == MneMode::Abs ? mne(val.ys(), pred, side, MneMode::Abs)
                                       : std::abs(mne(val.ys(), pred, side, MneMode::Signed));
  });

  MccvResult res;
  res.scores.assign(k, 0.0);
  for (std::size_t ti = 0; ti < k; ++ti) {
    for (std::size_t r = 0; r < opts.repeats; ++r) {
      res.scores[ti] += per[ti * opts.repeats + r];
      res.converged = res.converged && conv[ti * opts.repeats + r];
    }
    res.scores[ti] /= static_cast<double>(opts.repeats);
  }
  for (std::size_t ti = 1; ti < k; ++ti)
    if (res.scores[ti] < res.scores[res.best]) res.best = ti;
  res.tuple = grid.tuples[res.best];
  return res;
}

}  // namespace qsvr
