#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace clapping::engine {

/// Piecewise-constant function of the 1-based step t.
///
/// Each piece (start, value) holds from `start` until the next piece starts.
/// The first piece must start at step 1.
class Schedule {
 public:
  Schedule() : Schedule(0.0) {}
  Schedule(double constant);  // NOLINT: implicit on purpose, "0.1" reads as a constant schedule
  explicit Schedule(std::vector<std::pair<std::uint64_t, double>> pieces);

  /// value·factor^⌊(t−1)/every⌋, expanded up to step `horizon`.
  static Schedule geometric(double value, std::uint64_t every, double factor, std::uint64_t horizon);

  double at(std::uint64_t t) const;
  const std::vector<std::pair<std::uint64_t, double>>& pieces() const noexcept { return pieces_; }
  /// Steps (other than 1) where the value changes.
  std::vector<std::uint64_t> change_points() const;

  double min_value() const;
  double max_value() const;

 private:
  std::vector<std::pair<std::uint64_t, double>> pieces_;
};

}  // namespace clapping::engine
