#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include "clapping/engine/engine.hpp"
#include "clapping/harness/config.hpp"
#include "clapping/harness/objective.hpp"

namespace clapping::harness {

/// A ready-to-run instance: model, folded dataset, initial weights and f*.
struct Problem {
  math::ModelChain chain;
  std::shared_ptr<engine::InMemoryDataset> data;
  math::ParamSet initial_params;
  /// Optimal loss for the logistic problem; 0 for the MLP, whose optimum is
  /// unknown, so its loss_gap is the loss itself.
  double f_star = 0.0;
};

Problem build_problem(const ExperimentConfig& config, const FStarOptions& fstar = {});

struct MetricsRow {
  std::uint64_t step = 0;
  double loss = 0.0;       // full-dataset objective
  double loss_gap = 0.0;   // loss − f*
  double grad_norm = 0.0;  // full-dataset gradient norm
  std::uint64_t fwd_bytes = 0;  // cumulative payload bytes
  std::uint64_t bwd_bytes = 0;
  double sim_seconds = 0.0;
  bool f_fu = false;
};

inline constexpr const char* kCsvHeader = "step,loss,loss_gap,grad_norm,fwd_bytes,bwd_bytes,sim_seconds,f_fu";

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const MetricsRow& row);

struct ExperimentResult {
  std::vector<MetricsRow> rows;
  double f_star = 0.0;
  math::ParamSet final_params;
  std::uint64_t total_fwd_bytes = 0;
  std::uint64_t total_bwd_bytes = 0;
  double sim_seconds = 0.0;
};

/// Runs T steps, logging a row whenever t is a multiple of log_every and at
/// t = T. Rows are streamed to `csv` when given (header first, even for T = 0).
ExperimentResult run_experiment(const ExperimentConfig& config, const Problem& problem, std::ostream* csv = nullptr);
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* csv = nullptr);

/// Extra memory for activation caches, in bytes: Clapping keeps
/// 4·(workers−1)·B·s·h elements and AQ-SGD 2·(workers−1)·N·s·h, where s is
/// the sequence length and h the hidden size.
struct MemoryEstimate {
  double clapping_bytes = 0.0;
  double aqsgd_bytes = 0.0;
};

MemoryEstimate memory_overhead(double seq_len, double hidden, double batch, double dataset_size, double workers,
                               double bytes_per_element = 2.0);

inline constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

}  // namespace clapping::harness
