#include "clapping/harness/experiment.hpp"

#include <cinttypes>
#include <cstdio>

#include "clapping/error.hpp"

namespace clapping::harness {

Problem build_problem(const ExperimentConfig& c, const FStarOptions& fstar) {
  Problem p;
  if (c.dataset_kind == DatasetKind::Logistic) {
    const auto raw = gen_logistic_dataset(c.logistic);
    p.chain = logistic_chain(c.logistic.dim, c.reg_weight);
    p.data = std::make_shared<engine::InMemoryDataset>(fold_labels(raw, true));
    p.f_star = compute_f_star(p.data->rows(), c.reg_weight, fstar).f_star;
  } else {
    const auto raw = gen_mlp_dataset(c.mlp);
    p.chain = mlp_chain(c.mlp.dim, c.mlp.hidden, c.workers);
    p.data = std::make_shared<engine::InMemoryDataset>(fold_labels(raw, false));
    p.f_star = 0.0;
  }
  if (c.init == "normal") {
    RngStream rng(c.algo.seed, "init");
    p.initial_params = math::random_params(p.chain, rng, c.init_scale);
  } else {
    p.initial_params = math::zero_params(p.chain);
  }
  c.algo.validate(p.chain);
  return p;
}

void write_csv_header(std::ostream& out) { out << kCsvHeader << '\n'; }

void write_csv_row(std::ostream& out, const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%" PRIu64 ",%.17g,%.17g,%.17g,%" PRIu64 ",%" PRIu64 ",%.17g,%d\n", r.step, r.loss,
                r.loss_gap, r.grad_norm, r.fwd_bytes, r.bwd_bytes, r.sim_seconds, r.f_fu ? 1 : 0);
  out << buf;
}

ExperimentResult run_experiment(const ExperimentConfig& c, const Problem& p, std::ostream* csv) {
  engine::PipelineEngine eng(p.chain, c.algo, p.data, p.initial_params);
  const FullObjective objective(p.chain, p.data->rows());
  ExperimentResult res;
  res.f_star = p.f_star;
  if (csv) write_csv_header(*csv);
  const std::uint64_t T = c.algo.total_steps;
  for (std::uint64_t t = 1; t <= T; ++t) {
    const auto m = eng.run_iteration();
    if (t % c.log_every != 0 && t != T) continue;
    const auto full = objective.evaluate(eng.params());
    MetricsRow row;
    row.step = t;
    row.loss = full.loss;
    row.loss_gap = full.loss - p.f_star;
    row.grad_norm = full.grad_norm;
    row.fwd_bytes = m.total_fwd_bytes;
    row.bwd_bytes = m.total_bwd_bytes;
    row.sim_seconds = m.sim_seconds;
    row.f_fu = m.f_fu;
    if (csv) write_csv_row(*csv, row);
    res.rows.push_back(row);
  }
  if (csv) csv->flush();
  res.final_params = eng.params();
  res.total_fwd_bytes = eng.ledger().total_payload_bytes(comms::Direction::Forward);
  res.total_bwd_bytes = eng.ledger().total_payload_bytes(comms::Direction::Backward);
  res.sim_seconds = eng.ledger().simulated_seconds();
  return res;
}

ExperimentResult run_experiment(const ExperimentConfig& c, std::ostream* csv) {
  return run_experiment(c, build_problem(c), csv);
}

MemoryEstimate memory_overhead(double s, double h, double B, double N, double workers, double bytes) {
  if (!(s > 0 && h > 0 && B > 0 && N > 0 && workers >= 1 && bytes > 0))
    throw ConfigError("memory calculator inputs must be positive (workers >= 1)");
  MemoryEstimate m;
  m.clapping_bytes = 4.0 * (workers - 1.0) * B * s * h * bytes;
  m.aqsgd_bytes = 2.0 * (workers - 1.0) * N * s * h * bytes;
  return m;
}

}  // namespace clapping::harness
