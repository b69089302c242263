#include "clapping/comms/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "clapping/error.hpp"

namespace clapping::comms {

namespace {

std::size_t packed_bytes(std::size_t n, unsigned bits) { return (n * bits + 7) / 8; }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

// LSB-first bit packing of fixed-width codes (bits <= 16).
void pack_codes(std::vector<std::uint8_t>& out, const std::vector<std::uint16_t>& codes, unsigned bits) {
  out.reserve(out.size() + packed_bytes(codes.size(), bits));
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::uint64_t acc = 0;
  unsigned filled = 0;
  for (std::uint16_t c : codes) {
    acc |= (c & mask) << filled;
    filled += bits;
    for (; filled >= 8; filled -= 8, acc >>= 8) out.push_back(static_cast<std::uint8_t>(acc));
  }
  if (filled > 0) out.push_back(static_cast<std::uint8_t>(acc));
}

std::vector<std::uint16_t> unpack_codes(const std::uint8_t* p, std::size_t n, unsigned bits) {
  std::vector<std::uint16_t> codes(n);
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  std::uint64_t acc = 0;
  unsigned filled = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (filled < bits) {
      acc |= std::uint64_t{*p++} << filled;
      filled += 8;
    }
    codes[i] = static_cast<std::uint16_t>(acc & mask);
    acc >>= bits;
    filled -= bits;
  }
  return codes;
}

float checked_f32(double v) {
  if (!std::isfinite(v) || std::fabs(v) > std::numeric_limits<float>::max())
    throw UnsupportedError("wire: value not representable as f32");
  return static_cast<float>(v);
}

void check_bits(unsigned bits) {
  if (bits < 2 || bits > 16) throw DecodeError("wire: bits must be in [2,16]");
}

std::size_t entries(const WireBody& b) {
  switch (b.kind) {
    case WireKind::Dense: return b.values.size();
    case WireKind::Sparse: return b.indices.size();
    case WireKind::UniformQuant:
    case WireKind::Natural: return b.codes.size();
    case WireKind::SparseQuant:
    case WireKind::SparseNatural: return b.indices.size();
  }
  return 0;
}

}  // namespace

std::size_t body_size(WireKind kind, std::size_t dim, std::size_t k, unsigned bits) {
  switch (kind) {
    case WireKind::Dense: return 4 * dim;
    case WireKind::Sparse: return 8 * k;
    case WireKind::UniformQuant: return 4 + packed_bytes(dim, bits);
    case WireKind::Natural: return dim;
    case WireKind::SparseQuant: return 4 + 4 * k + packed_bytes(k, bits);
    case WireKind::SparseNatural: return 5 * k;
  }
  throw DecodeError("wire: unknown kind");
}

std::size_t body_size(const WireBody& b) { return body_size(b.kind, b.dim, entries(b), b.bits); }

std::size_t value_bytes(const WireBody& b) {
  const std::size_t total = body_size(b);
  switch (b.kind) {
    case WireKind::Sparse:
    case WireKind::SparseQuant:
    case WireKind::SparseNatural: return total - 4 * b.indices.size();
    default: return total;
  }
}

void encode_into(const WireBody& b, std::vector<std::uint8_t>& out) {
  if (b.dim > std::numeric_limits<std::uint32_t>::max() - 1)
    throw UnsupportedError("wire: dimension exceeds 32-bit index range");
  const std::size_t start = out.size();
  switch (b.kind) {
    case WireKind::Dense:
      for (double v : b.values) put_f32(out, checked_f32(v));
      break;
    case WireKind::Sparse:
      if (b.values.size() != b.indices.size()) throw ContractViolation("wire: sparse size mismatch");
      for (std::size_t i = 0; i < b.indices.size(); ++i) {
        put_u32(out, b.indices[i]);
        put_f32(out, checked_f32(b.values[i]));
      }
      break;
    case WireKind::UniformQuant:
      check_bits(b.bits);
      put_f32(out, b.scale);
      pack_codes(out, b.codes, b.bits);
      break;
    case WireKind::Natural:
      for (std::uint16_t c : b.codes) out.push_back(static_cast<std::uint8_t>(c));
      break;
    case WireKind::SparseQuant:
      check_bits(b.bits);
      if (b.codes.size() != b.indices.size()) throw ContractViolation("wire: sparse size mismatch");
      put_f32(out, b.scale);
      for (std::uint32_t i : b.indices) put_u32(out, i);
      pack_codes(out, b.codes, b.bits);
      break;
    case WireKind::SparseNatural:
      if (b.codes.size() != b.indices.size()) throw ContractViolation("wire: sparse size mismatch");
      for (std::uint32_t i : b.indices) put_u32(out, i);
      for (std::uint16_t c : b.codes) out.push_back(static_cast<std::uint8_t>(c));
      break;
  }
  if (out.size() - start != body_size(b))
    throw ContractViolation("wire: encoded body length disagrees with the size formula");
}

std::vector<std::uint8_t> encode(const WireBody& b) {
  std::vector<std::uint8_t> out;
  out.reserve(body_size(b));
  encode_into(b, out);
  return out;
}

DecodeContext context_for(const WireBody& b) {
  DecodeContext c;
  c.kind = b.kind;
  c.dim = b.dim;
  c.bits = b.bits;
  c.k = static_cast<std::uint32_t>(entries(b));
  return c;
}

WireBody decode(std::span<const std::uint8_t> bytes, const DecodeContext& ctx) {
  if (ctx.kind == WireKind::UniformQuant || ctx.kind == WireKind::SparseQuant) check_bits(ctx.bits);
  const std::size_t expect = body_size(ctx.kind, ctx.dim, ctx.k, ctx.bits);
  if (bytes.size() != expect)
    throw DecodeError("wire: body length " + std::to_string(bytes.size()) + " != expected " +
                      std::to_string(expect));
  if ((ctx.kind == WireKind::Sparse || ctx.kind == WireKind::SparseQuant ||
       ctx.kind == WireKind::SparseNatural) &&
      ctx.k > ctx.dim)
    throw DecodeError("wire: k exceeds dim");
  WireBody b;
  b.kind = ctx.kind;
  b.dim = ctx.dim;
  b.bits = ctx.bits;
  const std::uint8_t* p = bytes.data();
  auto check_index = [&](std::uint32_t i) {
    if (i >= ctx.dim) throw DecodeError("wire: index out of range");
    if (!b.indices.empty() && i <= b.indices.back()) throw DecodeError("wire: indices not ascending");
  };
  const std::uint16_t max_code = ctx.bits ? static_cast<std::uint16_t>(2 * quant_levels(ctx.bits)) : 0;
  switch (ctx.kind) {
    case WireKind::Dense:
      for (std::uint32_t i = 0; i < ctx.dim; ++i) b.values.push_back(get_f32(p + 4 * i));
      break;
    case WireKind::Sparse:
      for (std::uint32_t i = 0; i < ctx.k; ++i) {
        const std::uint32_t idx = get_u32(p + 8 * i);
        check_index(idx);
        b.indices.push_back(idx);
        b.values.push_back(get_f32(p + 8 * i + 4));
      }
      break;
    case WireKind::UniformQuant:
      b.scale = get_f32(p);
      b.codes = unpack_codes(p + 4, ctx.dim, ctx.bits);
      for (auto c : b.codes)
        if (c > max_code) throw DecodeError("wire: quantizer code out of range");
      break;
    case WireKind::Natural:
      b.codes.assign(p, p + ctx.dim);
      break;
    case WireKind::SparseQuant:
      b.scale = get_f32(p);
      for (std::uint32_t i = 0; i < ctx.k; ++i) {
        const std::uint32_t idx = get_u32(p + 4 + 4 * i);
        check_index(idx);
        b.indices.push_back(idx);
      }
      b.codes = unpack_codes(p + 4 + 4 * ctx.k, ctx.k, ctx.bits);
      for (auto c : b.codes)
        if (c > max_code) throw DecodeError("wire: quantizer code out of range");
      break;
    case WireKind::SparseNatural:
      for (std::uint32_t i = 0; i < ctx.k; ++i) {
        const std::uint32_t idx = get_u32(p + 4 * i);
        check_index(idx);
        b.indices.push_back(idx);
      }
      b.codes.assign(p + 4 * ctx.k, p + 5 * ctx.k);
      break;
  }
  if (b.scale != b.scale || std::isinf(b.scale)) throw DecodeError("wire: non-finite scale");
  return b;
}

std::vector<std::uint8_t> encode_message(const WireHeader& h, const WireBody& body) {
  if (h.kind != body.kind) throw ContractViolation("wire: header kind disagrees with body kind");
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + body_size(body));
  put_u32(out, h.step);
  put_u16(out, h.boundary);
  out.push_back(static_cast<std::uint8_t>(h.direction));
  out.push_back(static_cast<std::uint8_t>(h.kind));
  encode_into(body, out);
  return out;
}

WireMessage decode_message(std::span<const std::uint8_t> bytes, const DecodeContext& ctx) {
  if (bytes.size() < kHeaderBytes) throw DecodeError("wire: truncated header");
  WireMessage m;
  m.header.step = get_u32(bytes.data());
  m.header.boundary = static_cast<std::uint16_t>(bytes[4] | bytes[5] << 8);
  if (bytes[6] > 1) throw DecodeError("wire: bad direction byte");
  m.header.direction = static_cast<Direction>(bytes[6]);
  if (bytes[7] > static_cast<std::uint8_t>(WireKind::SparseNatural)) throw DecodeError("wire: bad kind tag");
  m.header.kind = static_cast<WireKind>(bytes[7]);
  if (m.header.kind != ctx.kind) throw DecodeError("wire: kind tag disagrees with context");
  m.body = decode(bytes.subspan(kHeaderBytes), ctx);
  return m;
}

std::int32_t quant_levels(unsigned bits) { return (std::int32_t{1} << (bits - 1)) - 1; }

double quant_value(std::uint16_t code, float scale, unsigned bits) {
  const std::int32_t L = quant_levels(bits);
  const double step = static_cast<double>(scale) / L;
  return static_cast<double>(static_cast<std::int32_t>(code) - L) * step;
}

double natural_value(std::uint8_t code) {
  const int c = code & 0x7f;
  if (c == 0) return 0.0;
  const double mag = std::ldexp(1.0, c - 64);
  return (code & 0x80) ? -mag : mag;
}

void reconstruct_into(const WireBody& b, math::MutView out) {
  if (out.size() != b.dim) throw ContractViolation("wire: reconstruction length != dim");
  std::fill(out.begin(), out.end(), 0.0);
  switch (b.kind) {
    case WireKind::Dense:
      if (b.values.size() != b.dim) throw ContractViolation("wire: dense size mismatch");
      std::copy(b.values.begin(), b.values.end(), out.begin());
      break;
    case WireKind::Sparse:
      for (std::size_t i = 0; i < b.indices.size(); ++i) out[b.indices[i]] = b.values[i];
      break;
    case WireKind::UniformQuant:
      for (std::size_t i = 0; i < b.codes.size(); ++i) out[i] = quant_value(b.codes[i], b.scale, b.bits);
      break;
    case WireKind::Natural:
      for (std::size_t i = 0; i < b.codes.size(); ++i)
        out[i] = natural_value(static_cast<std::uint8_t>(b.codes[i]));
      break;
    case WireKind::SparseQuant:
      for (std::size_t i = 0; i < b.indices.size(); ++i)
        out[b.indices[i]] = quant_value(b.codes[i], b.scale, b.bits);
      break;
    case WireKind::SparseNatural:
      for (std::size_t i = 0; i < b.indices.size(); ++i)
        out[b.indices[i]] = natural_value(static_cast<std::uint8_t>(b.codes[i]));
      break;
  }
}

math::Vector reconstruct(const WireBody& b) {
  math::Vector out(b.dim);
  reconstruct_into(b, out);
  return out;
}

}  // namespace clapping::comms
