#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "clapping/error.hpp"

namespace clapping::math {

using Vector = std::vector<double>;
using ConstView = std::span<const double>;
using MutView = std::span<double>;

inline double dot(ConstView a, ConstView b) {
  if (a.size() != b.size()) throw ContractViolation("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(ConstView a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

inline double norm(ConstView a) { return std::sqrt(squared_norm(a)); }

inline double squared_distance(ConstView a, ConstView b) {
  if (a.size() != b.size()) throw ContractViolation("squared_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double max_abs_difference(ConstView a, ConstView b) {
  if (a.size() != b.size()) throw ContractViolation("max_abs_difference: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::fmax(m, std::fabs(a[i] - b[i]));
  return m;
}

inline bool all_finite(ConstView a) {
  for (double v : a)
    if (!std::isfinite(v)) return false;
  return true;
}

/// Row-major block of `rows` vectors of equal length `cols`. Used for
/// batches of activations and activation gradients.
class Batch {
 public:
  Batch() = default;
  Batch(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  MutView row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  ConstView row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

}  // namespace clapping::math
