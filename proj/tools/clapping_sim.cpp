// clapping-sim: run experiments, compute f*, run verification suites and
// estimate cache memory from the command line.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "clapping/error.hpp"
#include "clapping/harness/experiment.hpp"
#include "suites.hpp"

namespace fs = std::filesystem;
using namespace clapping;

namespace {

int cmd_run(const fs::path& config_path, std::optional<std::uint64_t> seed, std::optional<fs::path> out,
            std::optional<std::uint64_t> log_every) {
  auto cfg = harness::load_config(config_path);
  if (seed) cfg.algo.seed = *seed;
  if (out) cfg.output = *out;
  if (log_every) {
    if (*log_every == 0) throw ConfigError("must be positive", "--log-every");
    cfg.log_every = *log_every;
  }
  const auto problem = harness::build_problem(cfg);

  std::ofstream file;
  std::ostream* csv = &std::cout;
  if (!cfg.output.empty()) {
    if (cfg.output.has_parent_path()) fs::create_directories(cfg.output.parent_path());
    file.open(cfg.output, std::ios::binary);
    if (!file) throw ConfigError("cannot write '" + cfg.output.string() + "'", "experiment.output");
    csv = &file;
  }
  const auto res = harness::run_experiment(cfg, problem, csv);
  if (file.is_open()) {
    const double gap = res.rows.empty() ? 0.0 : res.rows.back().loss_gap;
    std::fprintf(stderr, "%s: %llu steps, f*=%.12g, final gap %.6g, fwd %llu B, bwd %llu B, %.3f s simulated -> %s\n",
                 cfg.name.c_str(), static_cast<unsigned long long>(cfg.algo.total_steps), res.f_star, gap,
                 static_cast<unsigned long long>(res.total_fwd_bytes),
                 static_cast<unsigned long long>(res.total_bwd_bytes), res.sim_seconds, cfg.output.c_str());
  }
  return 0;
}

int cmd_fstar(const fs::path& config_path, bool no_cache) {
  const auto cfg = harness::load_config(config_path);
  if (cfg.dataset_kind != harness::DatasetKind::Logistic)
    throw UnsupportedError("f* is only defined for the logistic dataset");
  const auto rows = harness::fold_labels(harness::gen_logistic_dataset(cfg.logistic), true);
  harness::FStarOptions opts;
  opts.use_cache = !no_cache;
  const auto r = harness::compute_f_star(rows, cfg.reg_weight, opts);
  std::printf("f* = %.17g\ngrad_norm = %.3e\niterations = %llu\ncached = %s\n", r.f_star, r.grad_norm,
              static_cast<unsigned long long>(r.iterations), r.from_cache ? "yes" : "no");
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed, const fs::path& out_dir) {
  const auto reports = tools::run_suite(suite, seed);
  fs::create_directories(out_dir);
  bool ok = true;
  std::printf("%-56s %6s %12s %12s  %s\n", "suite", "cases", "max_dev", "tolerance", "result");
  for (const auto& r : reports) {
    const char* verdict = r.pass ? "pass" : (r.advisory ? "FAIL (advisory)" : "FAIL");
    std::printf("%-56s %6zu %12.4g %12.4g  %s\n", r.suite.c_str(), r.cases, r.max_deviation, r.tolerance, verdict);
    if (!r.pass && !r.advisory) ok = false;
    std::string file = r.suite;
    for (char& c : file)
      if (c == '/' || c == '(' || c == ')' || c == ',' || c == '=') c = '_';
    std::ofstream(out_dir / (file + ".json")) << verify::to_json(r) << '\n';
  }
  std::printf("reports written to %s\n", out_dir.c_str());
  return ok ? 0 : 1;
}

int cmd_mem(double seq, double hidden, double batch, double n, double workers, double bytes) {
  const auto m = harness::memory_overhead(seq, hidden, batch, n, workers, bytes);
  std::printf("clapping  %.6g bytes  (%.1f GiB)\n", m.clapping_bytes, m.clapping_bytes / harness::kGiB);
  std::printf("aq-sgd    %.6g bytes  (%.1f GiB)\n", m.aqsgd_bytes, m.aqsgd_bytes / harness::kGiB);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pipeline-parallel compressed training simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  fs::path run_config;
  std::optional<std::uint64_t> seed, log_every;
  std::optional<fs::path> out;
  run->add_option("config", run_config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override experiment.seed");
  run->add_option("--out", out, "Override experiment.output (CSV path)");
  run->add_option("--log-every", log_every, "Override experiment.log_every");

  auto* fstar = app.add_subcommand("fstar", "Compute the optimal loss of a logistic config's dataset");
  fs::path fstar_config;
  bool no_cache = false;
  fstar->add_option("config", fstar_config, "Config file")->required()->check(CLI::ExistingFile);
  fstar->add_flag("--no-cache", no_cache, "Skip the on-disk f* cache");

  auto* verify = app.add_subcommand("verify", "Run a verification suite");
  std::string suite;
  std::uint64_t verify_seed = 1;
  fs::path verify_out = "verify-reports";
  verify->add_option("suite", suite, "Suite name")->required()->check(CLI::IsMember(tools::suite_names()));
  verify->add_option("--seed", verify_seed, "Master seed");
  verify->add_option("--out", verify_out, "Directory for JSON reports");

  auto* mem = app.add_subcommand("mem-calc", "Activation-cache memory of Clapping vs AQ-SGD");
  double seq = 4096, hidden = 4096, batch = 16, n = 45.6e6, workers = 2, bytes = 2;
  mem->add_option("--seq-len", seq, "Sequence length s")->capture_default_str();
  mem->add_option("--hidden", hidden, "Hidden size h")->capture_default_str();
  mem->add_option("--batch", batch, "Batch size B")->capture_default_str();
  mem->add_option("--dataset-size", n, "Dataset size N")->capture_default_str();
  mem->add_option("--workers", workers, "Pipeline workers")->capture_default_str();
  mem->add_option("--bytes-per-element", bytes, "Bytes per cached element")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_config, seed, out, log_every);
    if (*fstar) return cmd_fstar(fstar_config, no_cache);
    if (*verify) return cmd_verify(suite, verify_seed, verify_out);
    if (*mem) return cmd_mem(seq, hidden, batch, n, workers, bytes);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
