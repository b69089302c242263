#include "clapping/rng.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "clapping/error.hpp"

namespace clapping {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view stream_name) {
  return splitmix64(splitmix64(master_seed) ^ fnv1a(stream_name));
}

RngStream::RngStream(std::uint64_t master_seed, std::string_view stream_name)
    : seed_(derive_seed(master_seed, stream_name)),
      name_(stream_name),
      engine_(seed_) {}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal(double mean, double stddev) {
  boost::random::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

std::size_t RngStream::index(std::size_t n) {
  if (n == 0) throw ContractViolation("RngStream::index: empty range");
  boost::random::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

bool RngStream::bernoulli(double p) {
  if (p >= 1.0) return true;
  if (p <= 0.0) return false;
  return uniform() < p;
}

}  // namespace clapping
