#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "clapping/math/vector.hpp"

namespace clapping::comms {

enum class Direction : std::uint8_t { Forward = 0, Backward = 1 };

/// Body layouts. Every multi-byte integer and float is little-endian.
///
///   Dense         d × f32
///   Sparse        k × (u32 index, f32 value)
///   UniformQuant  f32 scale, ceil(d·bits/8) bytes of packed codes
///   Natural       d × u8 (bit 7 sign, bits 0-6 exponent code)
///   SparseQuant   f32 scale, k × u32 index, ceil(k·bits/8) bytes of codes
///   SparseNatural k × u32 index, k × u8 natural codes
enum class WireKind : std::uint8_t {
  Dense = 0,
  Sparse = 1,
  UniformQuant = 2,
  Natural = 3,
  SparseQuant = 4,
  SparseNatural = 5,
};

struct WireHeader {
  std::uint32_t step = 0;
  std::uint16_t boundary = 0;
  Direction direction = Direction::Forward;
  WireKind kind = WireKind::Dense;
};

inline constexpr std::size_t kHeaderBytes = 8;

/// The decoded content of one message body.
///
/// `values` holds Dense and Sparse values; they are written as f32, so only
/// f32-representable values survive a round trip bit for bit. `codes` holds
/// quantizer codes (UniformQuant/SparseQuant: k+L in [0, 2L]) or natural
/// codes, which reconstruct exactly.
struct WireBody {
  WireKind kind = WireKind::Dense;
  std::uint32_t dim = 0;
  unsigned bits = 0;
  float scale = 0.0f;
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::vector<std::uint16_t> codes;
};

/// Everything a receiver must know out of band to parse a body.
struct DecodeContext {
  WireKind kind = WireKind::Dense;
  std::uint32_t dim = 0;
  std::uint32_t k = 0;
  unsigned bits = 0;
};

/// Exact body size in bytes for the given kind and sizes.
std::size_t body_size(WireKind kind, std::size_t dim, std::size_t k, unsigned bits);
std::size_t body_size(const WireBody& body);
/// Body bytes minus index bytes.
std::size_t value_bytes(const WireBody& body);

std::vector<std::uint8_t> encode(const WireBody& body);
void encode_into(const WireBody& body, std::vector<std::uint8_t>& out);
WireBody decode(std::span<const std::uint8_t> bytes, const DecodeContext& ctx);

std::vector<std::uint8_t> encode_message(const WireHeader& header, const WireBody& body);
struct WireMessage {
  WireHeader header;
  WireBody body;
};
WireMessage decode_message(std::span<const std::uint8_t> bytes, const DecodeContext& ctx);

DecodeContext context_for(const WireBody& body);

/// The vector a receiver rebuilds from a body.
math::Vector reconstruct(const WireBody& body);
void reconstruct_into(const WireBody& body, math::MutView out);

/// Quantizer helpers shared with the compressors so that sender and receiver
/// compute the same reconstruction.
std::int32_t quant_levels(unsigned bits);  // L = 2^(bits-1) - 1
double quant_value(std::uint16_t code, float scale, unsigned bits);
double natural_value(std::uint8_t code);

}  // namespace clapping::comms
