// Text form of CompressorSpec: name(arg=value, ...), with compose taking
// nested specs as positional arguments.

#include <cctype>
#include <charconv>
#include <cstdio>

#include "clapping/compress/compressor.hpp"
#include "clapping/error.hpp"

namespace clapping::compress {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view t) : text_(t) {}

  CompressorSpec parse_all() {
    CompressorSpec s = parse_spec();
    skip_ws();
    if (pos_ != text_.size()) fail("trailing characters");
    return s;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("cannot parse compressor '" + std::string(text_) + "' at offset " +
                      std::to_string(pos_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string_view word() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' || c == '+' ||
          c == '/')
        ++pos_;
      else
        break;
    }
    if (start == pos_) fail("expected a name or value");
    return text_.substr(start, pos_ - start);
  }

  std::size_t to_size(std::string_view v) {
    std::size_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) fail("expected an integer, got '" + std::string(v) + "'");
    return out;
  }

  double to_double(std::string_view v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(std::string(v), &used);
      if (used != v.size()) fail("expected a number");
      return d;
    } catch (const std::logic_error&) {
      fail("expected a number, got '" + std::string(v) + "'");
    }
  }

  CompressorSpec parse_spec() {
    const std::string name(word());
    CompressorSpec s;
    if (name == "identity") s.kind = CompressorKind::Identity;
    else if (name == "topk") s.kind = CompressorKind::TopK;
    else if (name == "randk") s.kind = CompressorKind::RandK;
    else if (name == "uniform_quant") s.kind = CompressorKind::UniformQuant;
    else if (name == "natural") s.kind = CompressorKind::NaturalComp;
    else if (name == "compose") s.kind = CompressorKind::Compose;
    else if (name == "inject_uniform") s.kind = CompressorKind::InjectUniform;
    else fail("unknown compressor '" + name + "'");

    if (eat('(')) {
      if (!eat(')')) {
        do {
          if (s.kind == CompressorKind::Compose) {
            s.inner.push_back(parse_spec());
            continue;
          }
          const std::string key(word());
          if (!eat('=')) fail("expected '=' after '" + key + "'");
          const std::string_view val = word();
          if (key == "k") s.k = to_size(val);
          else if (key == "bits") s.bits = static_cast<unsigned>(to_size(val));
          else if (key == "a") s.amplitude = to_double(val);
          else if (key == "seed") s.seed_stream = std::string(val);
          else if (key == "mode") {
            if (val == "additive") s.inject_mode = InjectMode::Additive;
            else if (val == "relative") s.inject_mode = InjectMode::Relative;
            else fail("mode must be additive or relative");
          } else {
            fail("unknown argument '" + key + "'");
          }
        } while (eat(','));
        if (!eat(')')) fail("expected ')'");
      }
    }
    s.validate();
    return s;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

CompressorSpec CompressorSpec::parse(std::string_view text) { return Parser(text).parse_all(); }

std::string CompressorSpec::to_string() const {
  std::string out;
  std::string seed = seed_stream.empty() ? "" : ",seed=" + seed_stream;
  switch (kind) {
    case CompressorKind::Identity: out = "identity"; break;
    case CompressorKind::TopK: out = "topk(k=" + std::to_string(k) + seed + ")"; break;
    case CompressorKind::RandK: out = "randk(k=" + std::to_string(k) + seed + ")"; break;
    case CompressorKind::UniformQuant: out = "uniform_quant(bits=" + std::to_string(bits) + ")"; break;
    case CompressorKind::NaturalComp: out = "natural"; break;
    case CompressorKind::Compose: {
      out = "compose(";
      for (std::size_t i = 0; i < inner.size(); ++i) out += (i ? "," : "") + inner[i].to_string();
      out += ")";
      break;
    }
    case CompressorKind::InjectUniform: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", amplitude);
      out = std::string("inject_uniform(a=") + buf +
            (inject_mode == InjectMode::Relative ? ",mode=relative" : ",mode=additive") + seed + ")";
      break;
    }
  }
  return out;
}

}  // namespace clapping::compress
