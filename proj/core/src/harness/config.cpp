#include "clapping/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "clapping/error.hpp"

namespace clapping::harness {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t to_u64(const std::string& v, std::string_view field) {
  std::uint64_t out = 0;
  double as_double = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec == std::errc() && p == v.data() + v.size()) return out;
  // Accept integral values written in scientific notation, e.g. 2e5.
  try {
    std::size_t used = 0;
    as_double = std::stod(v, &used);
    if (used == v.size() && as_double >= 0 && as_double == std::floor(as_double) && as_double < 1.8e19)
      return static_cast<std::uint64_t>(as_double);
  } catch (const std::logic_error&) {
  }
  throw ConfigError("expected a non-negative integer, got '" + v + "'", std::string(field));
}

double to_double(const std::string& v, std::string_view field) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size() && std::isfinite(d)) return d;
  } catch (const std::logic_error&) {
  }
  throw ConfigError("expected a number, got '" + v + "'", std::string(field));
}

bool to_bool(const std::string& v, std::string_view field) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected true or false, got '" + v + "'", std::string(field));
}

class Reader {
 public:
  explicit Reader(const ConfigMap& m) : map_(m) {}

  const std::string* get(const std::string& key) {
    used_.insert(key);
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second;
  }

  void read(const std::string& key, std::uint64_t& out) {
    if (auto v = get(key)) out = to_u64(*v, key);
  }
  void read(const std::string& key, double& out) {
    if (auto v = get(key)) out = to_double(*v, key);
  }
  void read(const std::string& key, bool& out) {
    if (auto v = get(key)) out = to_bool(*v, key);
  }
  void read(const std::string& key, std::string& out) {
    if (auto v = get(key)) out = *v;
  }

  template <class F>
  void read_with(const std::string& key, F&& parse) {
    if (auto v = get(key)) {
      try {
        parse(*v);
      } catch (const ConfigError& e) {
        if (e.field().rfind(key, 0) == 0) throw;
        throw ConfigError(e.message(), e.field().empty() ? key : key + "." + e.field());
      }
    }
  }

  void reject_unknown() const {
    for (const auto& [k, v] : map_)
      if (!used_.count(k)) throw ConfigError("unknown key", k);
  }

  bool has_prefix(const std::string& p) const {
    for (const auto& [k, v] : map_)
      if (k.rfind(p, 0) == 0) return true;
    return false;
  }

 private:
  const ConfigMap& map_;
  std::set<std::string> used_;
};

}  // namespace

std::size_t ExperimentConfig::num_boundaries() const {
  return dataset_kind == DatasetKind::Logistic ? 1 : workers - 1;
}

ConfigMap read_config_map(std::string_view text) {
  boost::property_tree::ptree pt;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, pt);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message(), "config");
  }
  ConfigMap out;
  for (const auto& [section, node] : pt) {
    if (node.empty()) {
      out[section] = trim(node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) out[section + "." + key] = trim(leaf.data());
  }
  return out;
}

engine::Schedule parse_schedule(std::string_view text, std::string_view field) {
  const std::string t = trim(text);
  if (t.find(':') == std::string::npos) return engine::Schedule(to_double(t, field));
  std::vector<std::pair<std::uint64_t, double>> pieces;
  for (const auto& part : split(t, ',')) {
    const auto kv = split(part, ':');
    if (kv.size() != 2) throw ConfigError("schedule pieces must be step:value", std::string(field));
    pieces.emplace_back(to_u64(kv[0], field), to_double(kv[1], field));
  }
  try {
    return engine::Schedule(std::move(pieces));
  } catch (const ConfigError& e) {
    throw ConfigError(e.message(), std::string(field));
  }
}

ExperimentConfig parse_config(const ConfigMap& map) {
  ExperimentConfig c;
  Reader r(map);

  r.read("experiment.name", c.name);
  r.read("experiment.steps", c.algo.total_steps);
  r.read("experiment.seed", c.algo.seed);
  r.read("experiment.log_every", c.log_every);
  r.read_with("experiment.output", [&](const std::string& v) { c.output = v; });
  if (c.log_every == 0) throw ConfigError("must be positive", "experiment.log_every");

  r.read_with("dataset.kind", [&](const std::string& v) {
    if (v == "logistic") c.dataset_kind = DatasetKind::Logistic;
    else if (v == "mlp") c.dataset_kind = DatasetKind::MLP;
    else throw ConfigError("expected logistic or mlp, got '" + v + "'");
  });
  std::uint64_t n = c.dataset_kind == DatasetKind::Logistic ? c.logistic.n : c.mlp.n;
  std::uint64_t dim = c.dataset_kind == DatasetKind::Logistic ? c.logistic.dim : c.mlp.dim;
  std::uint64_t dseed = 1;
  r.read("dataset.n", n);
  r.read("dataset.dim", dim);
  r.read("dataset.seed", dseed);
  if (n == 0) throw ConfigError("must be >= 1", "dataset.n");
  if (dim == 0) throw ConfigError("must be >= 1", "dataset.dim");
  if (c.dataset_kind == DatasetKind::Logistic) {
    c.logistic.n = n;
    c.logistic.dim = dim;
    c.logistic.seed = dseed;
    r.read("dataset.feature_var", c.logistic.feature_var);
    r.read("dataset.noise_var", c.logistic.noise_var);
    r.read("dataset.params_are_stddev", c.logistic.params_are_stddev);
    r.read("dataset.reg", c.reg_weight);
    if (!(c.reg_weight > 0.0)) throw ConfigError("must be > 0", "dataset.reg");
  } else {
    c.mlp.n = n;
    c.mlp.dim = dim;
    c.mlp.seed = dseed;
    r.read_with("dataset.hidden", [&](const std::string& v) {
      c.mlp.hidden.clear();
      for (const auto& h : split(v, ',')) {
        const auto w = to_u64(h, "dataset.hidden");
        if (w == 0) throw ConfigError("hidden widths must be positive");
        c.mlp.hidden.push_back(w);
      }
    });
    std::uint64_t workers = c.workers;
    r.read("dataset.workers", workers);
    if (workers < 2 || workers > c.mlp.hidden.size() + 1)
      throw ConfigError("must lie in [2, layers]", "dataset.workers");
    c.workers = workers;
  }

  auto& a = c.algo;
  r.read_with("algo.variant", [&](const std::string& v) { a.variant = engine::parse_variant(v); });
  std::uint64_t bs = a.batch_size;
  r.read("algo.batch_size", bs);
  if (bs == 0) throw ConfigError("must be positive", "algo.batch_size");
  a.batch_size = bs;
  a.sampling_rule = bs == 1 ? engine::SamplingRule::SingleSample : engine::SamplingRule::BatchBatchWise;
  r.read_with("algo.sampling", [&](const std::string& v) { a.sampling_rule = engine::parse_sampling_rule(v); });
  r.read_with("algo.order", [&](const std::string& v) { a.sample_order = engine::parse_sample_order(v); });
  r.read_with("algo.p", [&](const std::string& v) { a.resample_p = parse_schedule(v, "algo.p"); });
  r.read("algo.force_fresh_at_step_2", a.force_fresh_at_step_2);

  r.read_with("algo.optimizer", [&](const std::string& v) {
    if (v == "momentum") a.optimizer.kind = engine::OptimizerKind::MomentumSGD;
    else if (v == "adam") a.optimizer.kind = engine::OptimizerKind::Adam;
    else throw ConfigError("expected momentum or adam, got '" + v + "'");
  });
  r.read_with("algo.lr", [&](const std::string& v) { a.optimizer.lr = parse_schedule(v, "algo.lr"); });
  std::uint64_t halve_every = 0;
  double halve_factor = 0.5;
  bool reset_on_change = false;
  r.read("algo.lr_halve_every", halve_every);
  r.read("algo.lr_halve_factor", halve_factor);
  r.read("algo.reset_momentum_on_lr_change", reset_on_change);
  if (halve_every) {
    if (a.optimizer.lr.pieces().size() != 1)
      throw ConfigError("lr_halve_every needs a constant initial lr", "algo.lr_halve_every");
    a.optimizer.lr = engine::Schedule::geometric(a.optimizer.lr.at(1), halve_every, halve_factor,
                                                 std::max<std::uint64_t>(a.total_steps, 1));
  }
  r.read_with("algo.momentum", [&](const std::string& v) { a.optimizer.momentum = parse_schedule(v, "algo.momentum"); });
  r.read("algo.beta1", a.optimizer.beta1);
  r.read("algo.beta2", a.optimizer.beta2);
  r.read("algo.eps", a.optimizer.eps);
  if (reset_on_change) a.momentum_reset_steps = a.optimizer.lr.change_points();
  r.read_with("algo.init", [&](const std::string& v) {
    if (v != "zero" && v != "normal") throw ConfigError("expected zero or normal, got '" + v + "'");
    c.init = v;
  });
  r.read("algo.init_scale", c.init_scale);

  compress::CompressorSpec fwd, bwd;
  auto spec_reader = [](compress::CompressorSpec& dst) {
    return [&dst](const std::string& v) { dst = compress::CompressorSpec::parse(v); };
  };
  r.read_with("compress.forward", spec_reader(fwd));
  r.read_with("compress.backward", spec_reader(bwd));
  const std::size_t nb = c.num_boundaries();
  a.compressors.assign(1, {fwd, bwd});
  if (r.has_prefix("compress.b")) {
    a.compressors.assign(nb, {fwd, bwd});
    for (std::size_t b = 0; b < nb; ++b) {
      const std::string p = "compress.b" + std::to_string(b);
      r.read_with(p + ".forward", spec_reader(a.compressors[b].forward));
      r.read_with(p + ".backward", spec_reader(a.compressors[b].backward));
    }
  }

  r.read("comms.bandwidth_bps", a.bandwidth_bps);
  r.read("comms.latency_seconds", a.latency_seconds);
  r.read("comms.verify_wire", a.verify_wire);
  r.reject_unknown();

  a.optimizer.validate();
  if (!(a.bandwidth_bps > 0.0)) throw ConfigError("must be positive", "comms.bandwidth_bps");
  if (!(a.latency_seconds >= 0.0)) throw ConfigError("must be >= 0", "comms.latency_seconds");
  if (a.sampling_rule == engine::SamplingRule::SingleSample && a.batch_size != 1)
    throw ConfigError("single-sample rule needs batch_size = 1", "algo.sampling");
  if (a.resample_p.min_value() < 0.0 || a.resample_p.max_value() > 1.0)
    throw ConfigError("probabilities must lie in [0,1]", "algo.p");
  return c;
}

ExperimentConfig parse_config_text(std::string_view text) { return parse_config(read_config_map(text)); }

ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open '" + file.string() + "'", "config");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace clapping::harness
