#include "clapping/verify/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "clapping/error.hpp"
#include "clapping/math/worker_op.hpp"

namespace clapping::verify {

namespace {

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double rel_error(const math::Vector& g, const math::Vector& fd) {
  const double denom = std::max({math::norm(g), math::norm(fd), 1e-3});
  return std::sqrt(math::squared_distance(g, fd)) / denom;
}

void fill_normal(math::MutView v, RngStream& rng, double sd) {
  for (double& x : v) x = rng.normal(0.0, sd);
}

double loss_from(const math::ModelChain& chain, std::size_t first, math::ConstView y, const math::ParamSet& params) {
  math::Vector cur(y.begin(), y.end());
  for (std::size_t i = first; i < chain.stages.size(); ++i) cur = math::stage_forward(chain.stages[i], cur, params[i]);
  return cur.at(0);
}

bool has_relu(const math::ModelChain& chain) {
  return std::any_of(chain.stages.begin(), chain.stages.end(),
                     [](const auto& s) { return s.kind == math::StageKind::ReLU; });
}

// True when every ReLU input along the forward pass is at least `margin` from 0.
bool away_from_kinks(const math::ModelChain& chain, math::ConstView x, const math::ParamSet& params, double margin) {
  math::Vector cur(x.begin(), x.end());
  for (std::size_t i = 0; i < chain.stages.size(); ++i) {
    if (chain.stages[i].kind == math::StageKind::ReLU)
      for (double v : cur)
        if (std::fabs(v) < margin) return false;
    cur = math::stage_forward(chain.stages[i], cur, params[i]);
  }
  return true;
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

void CheckReport::add(CaseResult c) {
  ++cases;
  if (!std::isfinite(c.deviation)) {
    c.pass = false;
    max_deviation = std::numeric_limits<double>::infinity();
  } else {
    max_deviation = std::max(max_deviation, c.deviation);
  }
  diagnostics.push_back(std::move(c));
}

void CheckReport::finish() {
  pass = max_deviation <= tolerance;
  for (const auto& c : diagnostics) pass = pass && c.pass;
}

std::string to_json(const CheckReport& r) {
  nlohmann::json j;
  j["suite"] = r.suite;
  j["cases"] = r.cases;
  j["max_deviation"] = std::isfinite(r.max_deviation) ? nlohmann::json(r.max_deviation) : nlohmann::json("inf");
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  j["advisory"] = r.advisory;
  auto& diag = j["diagnostics"] = nlohmann::json::array();
  for (const auto& c : r.diagnostics) {
    diag.push_back({{"name", c.name},
                    {"deviation", std::isfinite(c.deviation) ? nlohmann::json(c.deviation) : nlohmann::json("inf")},
                    {"pass", c.pass},
                    {"detail", c.detail}});
  }
  return j.dump(2);
}

CheckReport check_stage_gradients(const math::StageSpec& stage, std::size_t trials, double h, double tol,
                                  std::uint64_t seed) {
  stage.validate();
  CheckReport rep;
  rep.suite = "stage_gradients/" + std::string(math::to_string(stage.kind)) + "(" +
              std::to_string(stage.input_dim) + "->" + std::to_string(stage.output_dim) + ")";
  rep.tolerance = tol;
  RngStream rng(seed, rep.suite);
  math::Vector y(stage.input_dim), w(stage.param_dim), v(stage.output_dim);
  for (std::size_t t = 0; t < trials; ++t) {
    fill_normal(y, rng, 1.0);
    fill_normal(w, rng, 0.5);
    fill_normal(v, rng, 1.0);
    if (stage.kind == math::StageKind::ReLU)
      for (double& yi : y)
        while (std::fabs(yi) < 1e-2) yi = rng.normal(0.0, 1.0);
    auto f = [&](const math::Vector& yy, const math::Vector& ww) {
      return math::dot(v, math::stage_forward(stage, yy, ww));
    };
    const auto gi = math::stage_backward_input(stage, y, w, v);
    const auto gw = math::stage_backward_weight(stage, y, w, v);
    math::Vector fdi(stage.input_dim), fdw(stage.param_dim);
    for (std::size_t i = 0; i < y.size(); ++i) {
      auto yp = y, ym = y;
      yp[i] += h;
      ym[i] -= h;
      fdi[i] = (f(yp, w) - f(ym, w)) / (2 * h);
    }
    for (std::size_t i = 0; i < w.size(); ++i) {
      auto wp = w, wm = w;
      wp[i] += h;
      wm[i] -= h;
      fdw[i] = (f(y, wp) - f(y, wm)) / (2 * h);
    }
    const double dev = std::max(rel_error(gi, fdi), stage.param_dim ? rel_error(gw, fdw) : 0.0);
    rep.add({"trial " + std::to_string(t), dev, dev <= tol, ""});
  }
  rep.finish();
  return rep;
}

CheckReport check_chain_gradients(const math::ModelChain& chain, std::size_t trials, double h, double tol,
                                  std::uint64_t seed) {
  chain.validate();
  CheckReport rep;
  rep.suite = "chain_gradients";
  rep.tolerance = tol;
  RngStream rng(seed, rep.suite);
  const bool relu = has_relu(chain);
  math::Vector x(chain.input_dim());
  for (std::size_t t = 0; t < trials; ++t) {
    math::ParamSet params;
    int attempts = 0;
    do {
      params = math::random_params(chain, rng, 0.5);
      fill_normal(x, rng, 1.0);
      if (++attempts > 1000) throw ConvergenceError("chain_gradients: could not sample away from ReLU kinks");
    } while (relu && !away_from_kinks(chain, x, params, 1e-2));

    const auto g = math::chain_backprop(chain, x, params);
    double dev = 0.0;
    for (std::size_t s = 0; s < chain.stages.size(); ++s) {
      if (chain.stages[s].param_dim) {
        math::Vector fd(params[s].size());
        for (std::size_t i = 0; i < fd.size(); ++i) {
          auto p = params;
          p[s][i] += h;
          const double up = math::chain_loss(chain, x, p);
          p[s][i] -= 2 * h;
          fd[i] = (up - math::chain_loss(chain, x, p)) / (2 * h);
        }
        dev = std::max(dev, rel_error(g.weight[s], fd));
      }
      // Gradient with respect to the input of stage s.
      math::Vector y_in(x.begin(), x.end());
      for (std::size_t i = 0; i < s; ++i) y_in = math::stage_forward(chain.stages[i], y_in, params[i]);
      math::Vector fd(y_in.size());
      for (std::size_t i = 0; i < fd.size(); ++i) {
        auto yp = y_in, ym = y_in;
        yp[i] += h;
        ym[i] -= h;
        fd[i] = (loss_from(chain, s, yp, params) - loss_from(chain, s, ym, params)) / (2 * h);
      }
      dev = std::max(dev, rel_error(g.input[s], fd));
    }
    rep.add({"trial " + std::to_string(t), dev, dev <= tol, ""});
  }
  rep.finish();
  return rep;
}

CheckReport check_ef_decay(const compress::CompressorSpec& spec, std::size_t dim, std::size_t steps,
                           std::size_t targets, std::uint64_t seed) {
  CheckReport rep;
  rep.suite = "ef_decay/" + spec.to_string();
  rep.tolerance = 1e-12;
  rep.advisory = spec.stochastic();
  const double omega = std::sqrt(compress::contraction_bound(spec, dim));
  RngStream data_rng(seed, "ef_decay/targets");
  RngStream comp_rng(seed, "ef_decay/compressor");
  compress::CompressedPayload buf;
  math::Vector y(dim), yt(dim), diff(dim);
  for (std::size_t c = 0; c < targets; ++c) {
    fill_normal(y, data_rng, 1.0);
    std::fill(yt.begin(), yt.end(), 0.0);
    double prev = math::norm(y);
    double dev = 0.0;
    std::size_t zero_at = 0;
    for (std::size_t t = 1; t <= steps; ++t) {
      for (std::size_t i = 0; i < dim; ++i) diff[i] = y[i] - yt[i];
      compress::compress_into(spec, diff, &comp_rng, buf);
      for (std::size_t i = 0; i < dim; ++i) yt[i] += buf.reconstruction[i];
      const double err = std::sqrt(math::squared_distance(y, yt));
      dev = std::max(dev, err - omega * prev);
      if (err == 0.0 && zero_at == 0) zero_at = t;
      prev = err;
    }
    CaseResult r{"target " + std::to_string(c), std::max(dev, 0.0), dev <= 1e-12,
                 zero_at ? "exact zero at step " + std::to_string(zero_at) : "final error " + fmt("%.3e", prev)};
    rep.add(std::move(r));
  }
  rep.finish();
  return rep;
}

CheckReport check_contraction(const compress::CompressorSpec& spec, std::size_t dim, std::size_t trials,
                              std::uint64_t seed) {
  CheckReport rep;
  rep.suite = "contraction/" + spec.to_string();
  rep.tolerance = 1e-12;
  RngStream rng(seed, rep.suite);
  const double bound = compress::contraction_bound(spec, dim);
  if (spec.stochastic()) {
    // The bound holds in expectation; compare the mean within 3 standard errors.
    const auto st = compress::contraction_stats(spec, dim, trials, rng);
    rep.tolerance = 3.0 * st.standard_error;
    const double dev = std::fabs(st.mean - bound);
    rep.add({"dim " + std::to_string(dim), dev, dev <= rep.tolerance,
             fmt("mean %.6g, bound %.6g, max %.6g", st.mean, bound, st.max)});
  } else {
    const double emp = compress::empirical_contraction(spec, dim, trials, rng);
    const double dev = std::max(0.0, emp - bound);
    rep.add({"dim " + std::to_string(dim), dev, dev <= 1e-12, fmt("empirical %.17g, bound %.17g", emp, bound)});
  }
  rep.finish();
  return rep;
}

CheckReport check_identity_equivalence(const EquivalenceSetup& s, const std::vector<engine::Variant>& variants,
                                       const compress::CompressorSpec& compressor, std::uint64_t steps, double tol) {
  CheckReport rep;
  rep.suite = "identity_equivalence/" + compressor.to_string();
  rep.tolerance = tol;
  auto make = [&](engine::Variant v) {
    engine::AlgoConfig c = s.base;
    c.variant = v;
    c.resample_p = engine::Schedule(1.0);
    c.compressors.assign(1, {compressor, compressor});
    return std::make_unique<engine::PipelineEngine>(s.chain, c, s.data, s.initial_params);
  };
  auto reference = make(engine::Variant::NoComp);
  std::vector<std::unique_ptr<engine::PipelineEngine>> runs;
  for (auto v : variants) runs.push_back(make(v));
  std::vector<double> dev(variants.size(), 0.0);
  for (std::uint64_t t = 0; t < steps; ++t) {
    reference->run_iteration();
    for (std::size_t k = 0; k < runs.size(); ++k) {
      runs[k]->run_iteration();
      for (std::size_t i = 0; i < s.chain.stages.size(); ++i)
        dev[k] = std::max(dev[k], math::max_abs_difference(runs[k]->params()[i], reference->params()[i]));
    }
  }
  for (std::size_t k = 0; k < variants.size(); ++k)
    rep.add({std::string(engine::to_string(variants[k])), dev[k], dev[k] <= tol,
             std::to_string(steps) + " steps, max |w - w_nocomp|"});
  rep.finish();
  return rep;
}

CheckReport check_error_propagation(const math::ModelChain& chain,
                                    const std::vector<engine::BoundaryCompressors>& compressors, std::size_t trials,
                                    double tol_factor, std::uint64_t seed, double weight_scale) {
  chain.validate();
  const std::size_t E = chain.num_workers();
  const std::size_t NB = chain.num_boundaries();
  if (NB == 0) throw ConfigError("error propagation needs at least two workers", "model.workers");
  if (compressors.size() != 1 && compressors.size() != NB)
    throw ConfigError("need one compressor pair per boundary, or a single pair", "compress");
  auto comp = [&](std::size_t b) -> const engine::BoundaryCompressors& {
    return compressors.size() == 1 ? compressors[0] : compressors[b];
  };

  CheckReport rep;
  rep.suite = "error_propagation";
  rep.tolerance = tol_factor;
  rep.advisory = has_relu(chain);
  RngStream rng(seed, "error_propagation/states");
  RngStream crng(seed, "error_propagation/compressor");
  std::vector<math::WorkerOperator> ops;
  for (std::size_t w = 0; w < E; ++w) ops.emplace_back(chain, w);
  compress::CompressedPayload buf;

  // VJP of worker w at input y with cotangent v.
  auto vjp = [&](std::size_t w, math::ConstView y, math::ConstView v, const math::ParamSet& params) {
    auto tape = ops[w].make_tape();
    ops[w].forward(y, params, tape);
    math::ParamSet scratch = math::zero_params(chain);
    math::Vector out(ops[w].input_dim());
    ops[w].backward(tape, params, v, out, scratch, 0.0);
    return out;
  };
  auto ef = [&](const compress::CompressorSpec& spec, const math::Vector& target, math::Vector cache) {
    math::Vector diff(target.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = target[i] - cache[i];
    compress::compress_into(spec, diff, &crng, buf);
    for (std::size_t i = 0; i < cache.size(); ++i) cache[i] += buf.reconstruction[i];
    return cache;
  };

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const auto params = math::random_params(chain, rng, weight_scale);
    math::Vector x(chain.input_dim());
    fill_normal(x, rng, 1.0);

    // Forward: compressed (ỹ), computed (y) and shadow (ŷ) activations.
    std::vector<math::Vector> yt(NB), yc(NB), yh(NB);
    std::vector<double> f(NB);
    for (std::size_t b = 0; b < NB; ++b) {
      auto tape = ops[b].make_tape();
      const math::Vector in_t = b == 0 ? x : yt[b - 1];
      const math::ConstView out = ops[b].forward(in_t, params, tape);
      yc[b].assign(out.begin(), out.end());
      math::Vector prior(yc[b].size());
      fill_normal(prior, rng, 1.0);
      yt[b] = ef(comp(b).forward, yc[b], prior);
      f[b] = math::squared_distance(yt[b], yc[b]);
      const math::Vector in_h = b == 0 ? x : yh[b - 1];
      auto tape_h = ops[b].make_tape();
      const math::ConstView out_h = ops[b].forward(in_h, params, tape_h);
      yh[b].assign(out_h.begin(), out_h.end());
    }

    // Backward: boundary b receives its gradient from worker b+1.
    std::vector<math::Vector> vt(NB), vc(NB), vh(NB);
    std::vector<double> c(NB);
    const math::Vector one{1.0};
    for (std::size_t b = NB; b-- > 0;) {
      const math::Vector& top_t = b + 1 == NB ? one : vt[b + 1];
      const math::Vector& top_h = b + 1 == NB ? one : vh[b + 1];
      vc[b] = vjp(b + 1, yt[b], top_t, params);
      math::Vector prior(vc[b].size());
      fill_normal(prior, rng, 1.0);
      vt[b] = ef(comp(b).backward, vc[b], prior);
      c[b] = math::squared_distance(vt[b], vc[b]);
      vh[b] = vjp(b + 1, yh[b], top_h, params);
    }

    // Measured constants.
    PropagationConstants k;
    for (std::size_t w = 0; w + 1 < E; ++w) {
      double prod = 1.0;
      for (std::size_t i = ops[w].first_stage(); i < ops[w].last_stage(); ++i)
        prod *= math::stage_input_lipschitz(chain.stages[i], params[i]);
      k.lipschitz_a = std::max(k.lipschitz_a, prod);
    }
    for (std::size_t b = 0; b < NB; ++b) {
      const std::size_t w = b + 1;
      const std::size_t m = ops[w].output_dim();
      Eigen::MatrixXd J(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(yt[b].size()));
      for (std::size_t r = 0; r < m; ++r) {
        math::Vector e(m, 0.0);
        e[r] = 1.0;
        const auto row = vjp(w, yt[b], e, params);
        for (std::size_t j = 0; j < row.size(); ++j) J(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = row[j];
      }
      k.lipschitz_jacobian = std::max(k.lipschitz_jacobian, std::sqrt(2.0) * spectral_norm(J));
      const math::Vector& top_h = b + 1 == NB ? one : vh[b + 1];
      const double dy = std::sqrt(math::squared_distance(yt[b], yh[b]));
      if (dy > 0.0) {
        const auto a = vjp(w, yt[b], top_h, params);
        const auto bb = vjp(w, yh[b], top_h, params);
        k.lipschitz_secant = std::max(k.lipschitz_secant, std::sqrt(2.0) * std::sqrt(math::squared_distance(a, bb)) / dy);
      }
    }

    const double qa = 2.0 * k.lipschitz_a * k.lipschitz_a;
    const double qo = 2.0 * k.lipschitz_jacobian * k.lipschitz_jacobian;
    const double lp2 = k.lipschitz_secant * k.lipschitz_secant;
    double worst = 0.0;
    bool ok = true;
    for (std::size_t e = 0; e < NB; ++e) {
      double rhs_f = 0.0;
      for (std::size_t i = 0; i <= e; ++i) rhs_f += 2.0 * std::pow(qa, double(e - i)) * f[i];
      const double lhs_f = math::squared_distance(yt[e], yh[e]);

      double rhs_b = 0.0;
      for (std::size_t s = e; s < NB; ++s) rhs_b += 2.0 * std::pow(qo, double(s - e)) * c[s];
      for (std::size_t i = 0; i < NB; ++i)
        for (std::size_t s = std::max(e, i); s < NB; ++s)
          rhs_b += 4.0 * lp2 * std::pow(qo, double(s - e)) * std::pow(qa, double(s - i)) * f[i];
      const double lhs_b = math::squared_distance(vt[e], vh[e]);

      for (auto [lhs, rhs] : {std::pair{lhs_f, rhs_f}, std::pair{lhs_b, rhs_b}}) {
        const double ratio = lhs / (rhs + 1e-24);
        worst = std::max(worst, ratio - 1.0);
        ok = ok && lhs <= (1.0 + tol_factor) * (rhs + 1e-24);
      }
    }
    rep.add({"state " + std::to_string(trial), std::max(worst, 0.0), ok,
             fmt("L_a=%.4g L°=%.4g L'=%.4g", k.lipschitz_a, k.lipschitz_jacobian, k.lipschitz_secant)});
  }
  rep.finish();
  return rep;
}

CheckReport check_sampler_stats(double p, std::uint64_t steps, double tol_sigmas, std::uint64_t seed,
                                engine::SamplingRule rule, std::size_t batch_size) {
  if (steps < 2) throw ConfigError("sampler check needs at least two steps", "steps");
  CheckReport rep;
  rep.suite = "sampler_stats";
  math::Batch rows(1000, 1);
  const engine::InMemoryDataset data(std::move(rows));
  engine::SamplerState s;
  s.rule = rule;
  s.batch_size = batch_size;
  s.p = engine::Schedule(p);
  RngStream rng(seed, "sampling");
  const auto first = engine::lazy_sample(s, data, rng);
  const bool first_fresh = first.f_fu && std::all_of(first.fresh.begin(), first.fresh.end(), [](auto f) { return f; });
  std::uint64_t refreshed = 0, slots = 0;
  for (std::uint64_t t = 2; t <= steps; ++t) {
    const auto d = engine::lazy_sample(s, data, rng);
    if (rule == engine::SamplingRule::BatchSampleWise) {
      for (auto f : d.fresh) refreshed += f;
      slots += d.fresh.size();
    } else {
      refreshed += d.f_fu ? 1 : 0;
      ++slots;
    }
  }
  const double freq = static_cast<double>(refreshed) / static_cast<double>(slots);
  const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(slots));
  rep.tolerance = tol_sigmas * sigma;
  const double dev = std::fabs(freq - p);
  rep.add({"t=1 fresh", first_fresh ? 0.0 : 1.0, first_fresh, ""});
  rep.add({"frequency", dev, dev <= rep.tolerance, fmt("observed %.6f, expected %.6f, sigma %.3e", freq, p, sigma)});
  rep.finish();
  return rep;
}

}  // namespace clapping::verify
