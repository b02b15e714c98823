#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qsvr/dense.hpp"
#include "qsvr/error.hpp"

namespace qsvr {

/// Feature vectors with scalar targets for one single-output regression task.
class TrainingSet {
 public:
  TrainingSet() = default;
  TrainingSet(std::vector<Vector> xs, Vector ys) : xs_(std::move(xs)), ys_(std::move(ys)) {
    if (xs_.empty()) throw InvalidInput("TrainingSet: no samples");
    if (xs_.size() != ys_.size()) throw InvalidInput("TrainingSet: |xs| != |ys|");
    const std::size_t f = xs_.front().size();
    if (f == 0) throw InvalidInput("TrainingSet: zero-dimensional features");
    for (const auto& x : xs_)
      if (x.size() != f) throw InvalidInput("TrainingSet: ragged feature vectors");
  }

  std::size_t size() const noexcept { return xs_.size(); }
  std::size_t features() const noexcept { return xs_.empty() ? 0 : xs_.front().size(); }
  bool empty() const noexcept { return xs_.empty(); }

  const std::vector<Vector>& xs() const noexcept { return xs_; }
  const Vector& ys() const noexcept { return ys_; }

  /// Rows at the given indices, in that order.
  TrainingSet subset(std::span<const std::size_t> idx) const {
    std::vector<Vector> xs;
    Vector ys;
    xs.reserve(idx.size());
    ys.reserve(idx.size());
    for (std::size_t i : idx) {
      detail::require(i < size(), "TrainingSet::subset: index out of range");
      xs.push_back(xs_[i]);
      ys.push_back(ys_[i]);
    }
    return TrainingSet(std::move(xs), std::move(ys));
  }

 private:
  std::vector<Vector> xs_;
  Vector ys_;
};

}  // namespace qsvr
