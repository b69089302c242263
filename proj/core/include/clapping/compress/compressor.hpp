#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "clapping/comms/wire.hpp"
#include "clapping/math/vector.hpp"
#include "clapping/rng.hpp"

namespace clapping::compress {

enum class CompressorKind { Identity, TopK, RandK, UniformQuant, NaturalComp, Compose, InjectUniform };

enum class InjectMode { Additive, Relative };

/// A compressor C(·).
///
/// Compose accepts one sparsifier (TopK or RandK) followed by at most one
/// value quantizer (UniformQuant or NaturalComp) that is applied to the
/// surviving entries only. InjectUniform is a stand-in for an unspecified
/// lossy codec: it perturbs every entry by Uniform(-a, a) (additively, or
/// multiplicatively in Relative mode), is not contractive, and ships dense.
struct CompressorSpec {
  CompressorKind kind = CompressorKind::Identity;
  std::size_t k = 0;
  unsigned bits = 0;
  std::vector<CompressorSpec> inner;
  /// Overrides the RNG stream name the engine would otherwise assign.
  std::string seed_stream;
  double amplitude = 0.0;
  InjectMode inject_mode = InjectMode::Additive;

  static CompressorSpec identity();
  static CompressorSpec topk(std::size_t k);
  static CompressorSpec randk(std::size_t k);
  static CompressorSpec uniform_quant(unsigned bits);
  static CompressorSpec natural();
  static CompressorSpec compose(std::vector<CompressorSpec> members);
  static CompressorSpec inject_uniform(double amplitude, InjectMode mode = InjectMode::Additive);

  /// Parses e.g. "topk(k=10)", "uniform_quant(bits=8)",
  /// "compose(topk(k=10),uniform_quant(bits=8))", "inject_uniform(a=0.2,mode=relative)".
  static CompressorSpec parse(std::string_view text);
  std::string to_string() const;

  bool stochastic() const;
  bool contractive() const;
  /// Structural checks, plus `k <= dim` when `dim` is nonzero.
  void validate(std::size_t dim = 0) const;

  friend bool operator==(const CompressorSpec&, const CompressorSpec&) = default;
};

struct CompressedPayload {
  math::Vector reconstruction;
  std::size_t encoded_bytes = 0;
  std::size_t value_bytes = 0;
  comms::WireBody body;
};

/// Applies C to x. Deterministic kinds never touch `rng`.
CompressedPayload compress(const CompressorSpec& spec, math::ConstView x, RngStream& rng);
/// Convenience overload for deterministic kinds; throws ConfigError otherwise.
CompressedPayload compress(const CompressorSpec& spec, math::ConstView x);
/// Same as `compress`, reusing the buffers held by `out`.
void compress_into(const CompressorSpec& spec, math::ConstView x, RngStream* rng, CompressedPayload& out);

/// Certified ω² with sup_x E‖x − C(x)‖² / ‖x‖² ≤ ω².
double contraction_bound(const CompressorSpec& spec, std::size_t dim);

/// Max of ‖x − C(x)‖²/‖x‖² over `trials` Gaussian vectors and the all-equal
/// vector.
double empirical_contraction(const CompressorSpec& spec, std::size_t dim, std::size_t trials,
                             RngStream& rng);

struct ContractionStats {
  double mean = 0.0;
  double standard_error = 0.0;
  double max = 0.0;
  std::size_t trials = 0;
};

/// Ratio statistics over `trials` draws, with a fresh Gaussian x per draw.
ContractionStats contraction_stats(const CompressorSpec& spec, std::size_t dim, std::size_t trials,
                                   RngStream& rng);

/// Nearest power of two in linear distance (ties to the larger), sign kept,
/// as a natural-compression byte. Magnitudes below 2^-64 map to zero and
/// above 2^63 saturate to 2^63.
std::uint8_t natural_code(double x);

}  // namespace clapping::compress
