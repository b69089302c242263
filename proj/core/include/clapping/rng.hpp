#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include <boost/random/mersenne_twister.hpp>

namespace clapping {

/// Mixes a master seed with a stream name. Stable across platforms and
/// compilers, so a named stream always yields the same sequence.
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view stream_name);

/// An independent, named random stream.
///
/// Every consumer of randomness (sampling, each stochastic compressor per
/// boundary and direction, data generation) owns its own stream, so that
/// reconfiguring one consumer never perturbs the draws seen by another.
/// The engine and distributions come from Boost.Random, whose algorithms are
/// fixed by the library rather than by the standard library vendor.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::string_view stream_name);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);
  /// Uniform integer in [0, n). `n` must be positive.
  std::size_t index(std::size_t n);
  /// True with probability `p`; p <= 0 is never, p >= 1 is always.
  bool bernoulli(double p);

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& name() const noexcept { return name_; }

 private:
  std::uint64_t seed_;
  std::string name_;
  boost::random::mt19937_64 engine_;
};

}  // namespace clapping
