#include "clapping/compress/compressor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "clapping/error.hpp"

namespace clapping::compress {

namespace {

using comms::WireKind;

bool is_sparsifier(CompressorKind k) { return k == CompressorKind::TopK || k == CompressorKind::RandK; }
bool is_quantizer(CompressorKind k) {
  return k == CompressorKind::UniformQuant || k == CompressorKind::NaturalComp;
}

// Compose members with Identity entries dropped.
std::vector<const CompressorSpec*> effective_members(const CompressorSpec& s) {
  std::vector<const CompressorSpec*> out;
  for (const auto& m : s.inner)
    if (m.kind != CompressorKind::Identity) out.push_back(&m);
  return out;
}

// Half away from zero.
double round_half_away(double v) { return std::copysign(std::floor(std::fabs(v) + 0.5), v); }

float scale_at_least(double max_abs) {
  float s = static_cast<float>(max_abs);
  if (static_cast<double>(s) < max_abs) s = std::nextafter(s, std::numeric_limits<float>::infinity());
  return s;
}

// Fills body.scale/body.codes for the values in `vals`.
void quantize_values(math::ConstView vals, unsigned bits, comms::WireBody& body) {
  double max_abs = 0.0;
  for (double v : vals) max_abs = std::fmax(max_abs, std::fabs(v));
  if (max_abs > std::numeric_limits<float>::max())
    throw UnsupportedError("uniform_quant: magnitude exceeds f32 range");
  const std::int32_t L = comms::quant_levels(bits);
  body.bits = bits;
  body.scale = scale_at_least(max_abs);
  body.codes.resize(vals.size());
  const double s = body.scale;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    std::int32_t q = 0;
    if (s > 0.0) {
      const double r = round_half_away(vals[i] * L / s);
      q = static_cast<std::int32_t>(std::clamp(r, -static_cast<double>(L), static_cast<double>(L)));
    }
    body.codes[i] = static_cast<std::uint16_t>(q + L);
  }
}

void select_topk(math::ConstView x, std::size_t k, std::vector<std::uint32_t>& idx) {
  idx.resize(x.size());
  std::iota(idx.begin(), idx.end(), 0u);
  auto before = [&](std::uint32_t a, std::uint32_t b) {
    const double fa = std::fabs(x[a]), fb = std::fabs(x[b]);
    return fa > fb || (fa == fb && a < b);
  };
  if (k < x.size()) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), before);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
}

void select_randk(std::size_t d, std::size_t k, RngStream& rng, std::vector<std::uint32_t>& idx) {
  idx.resize(d);
  std::iota(idx.begin(), idx.end(), 0u);
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.index(d - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
}

double uq_bound(std::size_t dim, unsigned bits) {
  // Worst case: one entry at the scale, every other entry a hair under half a
  // step. The slack covers the f32 scale being rounded up and double rounding.
  const double L = comms::quant_levels(bits);
  const double q = 1.0 + 0x1.0p-21;
  const double n = static_cast<double>(dim - 1) * q;
  return n / (4.0 * L * L + n) + 0x1.0p-45;
}

}  // namespace

std::uint8_t natural_code(double x) {
  if (!std::isfinite(x)) throw ContractViolation("natural: non-finite input");
  const double a = std::fabs(x);
  const std::uint8_t sign = std::signbit(x) ? 0x80 : 0x00;
  if (a < 0x1.0p-64) return 0;
  int e = 0;
  const double m = std::frexp(a, &e);  // a = m·2^e, m in [0.5, 1)
  int p = (2.0 * m >= 1.5) ? e : e - 1;
  p = std::clamp(p, -63, 63);
  return static_cast<std::uint8_t>(sign | static_cast<std::uint8_t>(p + 64));
}

CompressorSpec CompressorSpec::identity() { return {}; }

CompressorSpec CompressorSpec::topk(std::size_t k) {
  CompressorSpec s;
  s.kind = CompressorKind::TopK;
  s.k = k;
  s.validate();
  return s;
}

CompressorSpec CompressorSpec::randk(std::size_t k) {
  CompressorSpec s;
  s.kind = CompressorKind::RandK;
  s.k = k;
  s.validate();
  return s;
}

CompressorSpec CompressorSpec::uniform_quant(unsigned bits) {
  CompressorSpec s;
  s.kind = CompressorKind::UniformQuant;
  s.bits = bits;
  s.validate();
  return s;
}

CompressorSpec CompressorSpec::natural() {
  CompressorSpec s;
  s.kind = CompressorKind::NaturalComp;
  return s;
}

CompressorSpec CompressorSpec::compose(std::vector<CompressorSpec> members) {
  CompressorSpec s;
  s.kind = CompressorKind::Compose;
  s.inner = std::move(members);
  s.validate();
  return s;
}

CompressorSpec CompressorSpec::inject_uniform(double amplitude, InjectMode mode) {
  CompressorSpec s;
  s.kind = CompressorKind::InjectUniform;
  s.amplitude = amplitude;
  s.inject_mode = mode;
  s.validate();
  return s;
}

bool CompressorSpec::stochastic() const {
  switch (kind) {
    case CompressorKind::RandK:
    case CompressorKind::InjectUniform: return true;
    case CompressorKind::Compose:
      return std::any_of(inner.begin(), inner.end(), [](const auto& m) { return m.stochastic(); });
    default: return false;
  }
}

bool CompressorSpec::contractive() const {
  if (kind == CompressorKind::InjectUniform) return false;
  if (kind == CompressorKind::Compose)
    return std::all_of(inner.begin(), inner.end(), [](const auto& m) { return m.contractive(); });
  return true;
}

void CompressorSpec::validate(std::size_t dim) const {
  switch (kind) {
    case CompressorKind::Identity:
    case CompressorKind::NaturalComp: break;
    case CompressorKind::TopK:
    case CompressorKind::RandK:
      if (k == 0) throw ConfigError("k must be positive", "k");
      if (dim && k > dim)
        throw ConfigError("k=" + std::to_string(k) + " exceeds dimension " + std::to_string(dim), "k");
      break;
    case CompressorKind::UniformQuant:
      if (bits < 2 || bits > 16) throw ConfigError("bits must be in [2,16]", "bits");
      break;
    case CompressorKind::InjectUniform:
      if (!(amplitude >= 0.0) || !std::isfinite(amplitude))
        throw ConfigError("amplitude must be finite and >= 0", "a");
      break;
    case CompressorKind::Compose: {
      if (inner.empty()) throw ConfigError("compose needs at least one member", "inner");
      for (const auto& m : inner) {
        if (m.kind == CompressorKind::Compose || m.kind == CompressorKind::InjectUniform)
          throw ConfigError("compose members must be identity, a sparsifier or a quantizer", "inner");
        m.validate(dim);
      }
      const auto eff = effective_members(*this);
      if (eff.size() > 2) throw ConfigError("compose supports a sparsifier then one quantizer", "inner");
      if (eff.size() == 2 && !(is_sparsifier(eff[0]->kind) && is_quantizer(eff[1]->kind)))
        throw ConfigError("compose order must be sparsifier, then quantizer", "inner");
      break;
    }
  }
}

void compress_into(const CompressorSpec& spec, math::ConstView x, RngStream* rng, CompressedPayload& out) {
  const std::size_t d = x.size();
  if (d == 0) throw ContractViolation("compress: empty input");
  if (!math::all_finite(x)) throw ContractViolation("compress: non-finite input");
  spec.validate(d);
  if (spec.stochastic() && !rng) throw ConfigError("stochastic compressor needs an RNG stream");

  auto& body = out.body;
  body.dim = static_cast<std::uint32_t>(d);
  body.bits = 0;
  body.scale = 0.0f;
  body.indices.clear();
  body.values.clear();
  body.codes.clear();
  out.reconstruction.resize(d);

  const CompressorSpec* sparse = nullptr;
  const CompressorSpec* quant = nullptr;
  if (spec.kind == CompressorKind::Compose) {
    for (const auto* m : effective_members(spec)) (is_sparsifier(m->kind) ? sparse : quant) = m;
  } else if (is_sparsifier(spec.kind)) {
    sparse = &spec;
  } else if (is_quantizer(spec.kind)) {
    quant = &spec;
  }

  if (spec.kind == CompressorKind::InjectUniform) {
    body.kind = WireKind::Dense;
    body.values.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double u = rng->uniform(-spec.amplitude, spec.amplitude);
      body.values[i] = spec.inject_mode == InjectMode::Additive ? x[i] + u : x[i] * (1.0 + u);
    }
    std::copy(body.values.begin(), body.values.end(), out.reconstruction.begin());
  } else if (sparse) {
    if (sparse->kind == CompressorKind::TopK)
      select_topk(x, sparse->k, body.indices);
    else
      select_randk(d, sparse->k, *rng, body.indices);
    math::Vector survivors(body.indices.size());
    for (std::size_t i = 0; i < body.indices.size(); ++i) survivors[i] = x[body.indices[i]];
    if (!quant) {
      body.kind = WireKind::Sparse;
      body.values = std::move(survivors);
    } else if (quant->kind == CompressorKind::UniformQuant) {
      body.kind = WireKind::SparseQuant;
      quantize_values(survivors, quant->bits, body);
    } else {
      body.kind = WireKind::SparseNatural;
      body.codes.resize(survivors.size());
      for (std::size_t i = 0; i < survivors.size(); ++i) body.codes[i] = natural_code(survivors[i]);
    }
    comms::reconstruct_into(body, out.reconstruction);
  } else if (quant) {
    if (quant->kind == CompressorKind::UniformQuant) {
      body.kind = WireKind::UniformQuant;
      quantize_values(x, quant->bits, body);
    } else {
      body.kind = WireKind::Natural;
      body.codes.resize(d);
      for (std::size_t i = 0; i < d; ++i) body.codes[i] = natural_code(x[i]);
    }
    comms::reconstruct_into(body, out.reconstruction);
  } else {
    body.kind = WireKind::Dense;
    body.values.assign(x.begin(), x.end());
    std::copy(x.begin(), x.end(), out.reconstruction.begin());
  }
  out.encoded_bytes = comms::body_size(body);
  out.value_bytes = comms::value_bytes(body);
}

CompressedPayload compress(const CompressorSpec& spec, math::ConstView x, RngStream& rng) {
  CompressedPayload p;
  compress_into(spec, x, &rng, p);
  return p;
}

CompressedPayload compress(const CompressorSpec& spec, math::ConstView x) {
  CompressedPayload p;
  compress_into(spec, x, nullptr, p);
  return p;
}

double contraction_bound(const CompressorSpec& spec, std::size_t dim) {
  if (dim == 0) throw ContractViolation("contraction_bound: dim must be >= 1");
  spec.validate(dim);
  switch (spec.kind) {
    case CompressorKind::Identity: return 0.0;
    case CompressorKind::TopK:
    case CompressorKind::RandK:
      return 1.0 - static_cast<double>(spec.k) / static_cast<double>(dim);
    case CompressorKind::UniformQuant: return uq_bound(dim, spec.bits);
    case CompressorKind::NaturalComp: return 1.0 / 9.0;
    case CompressorKind::InjectUniform:
      throw ConfigError("inject_uniform is not contractive", "kind");
    case CompressorKind::Compose: {
      const auto eff = effective_members(spec);
      if (eff.empty()) return 0.0;
      if (eff.size() == 1) return contraction_bound(*eff[0], dim);
      // ‖x − C₂(C₁x)‖ ≤ ‖C₁x − C₂(C₁x)‖ + ‖x − C₁x‖, with C₂ acting on the k survivors.
      const double w1 = std::sqrt(contraction_bound(*eff[0], dim));
      const double w2 = std::sqrt(contraction_bound(*eff[1], eff[0]->k));
      const double w = w2 * (1.0 + w1) + w1;
      if (w >= 1.0) throw ConfigError("composition is not contractive (bound >= 1)", "inner");
      return w * w;
    }
  }
  return 1.0;
}

namespace {

double ratio(const CompressorSpec& spec, const math::Vector& x, RngStream& rng, CompressedPayload& buf) {
  compress_into(spec, x, &rng, buf);
  const double n = math::squared_norm(x);
  return n > 0.0 ? math::squared_distance(x, buf.reconstruction) / n : 0.0;
}

}  // namespace

double empirical_contraction(const CompressorSpec& spec, std::size_t dim, std::size_t trials, RngStream& rng) {
  if (trials == 0) throw ContractViolation("empirical_contraction: trials must be >= 1");
  CompressedPayload buf;
  math::Vector x(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
  double worst = ratio(spec, x, rng, buf);
  for (std::size_t t = 0; t < trials; ++t) {
    for (double& v : x) v = rng.normal(0.0, 1.0);
    worst = std::fmax(worst, ratio(spec, x, rng, buf));
  }
  return worst;
}

ContractionStats contraction_stats(const CompressorSpec& spec, std::size_t dim, std::size_t trials, RngStream& rng) {
  if (trials < 2) throw ContractViolation("contraction_stats: trials must be >= 2");
  CompressedPayload buf;
  math::Vector x(dim);
  double sum = 0.0, sum_sq = 0.0, worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (double& v : x) v = rng.normal(0.0, 1.0);
    const double r = ratio(spec, x, rng, buf);
    sum += r;
    sum_sq += r * r;
    worst = std::fmax(worst, r);
  }
  ContractionStats st;
  st.trials = trials;
  st.mean = sum / static_cast<double>(trials);
  const double var = std::fmax(0.0, (sum_sq - sum * st.mean) / static_cast<double>(trials - 1));
  st.standard_error = std::sqrt(var / static_cast<double>(trials));
  st.max = worst;
  return st;
}

}  // namespace clapping::compress
