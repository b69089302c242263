#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "clapping/engine/engine.hpp"
#include "clapping/harness/dataset.hpp"

namespace clapping::harness {

enum class DatasetKind { Logistic, MLP };

/// One experiment, as read from a config file.
///
/// File format: INI sections with `key = value` lines, flattened to dotted
/// keys (`[algo]` + `batch_size` is `algo.batch_size`). Schedules are either a
/// constant or a list of `step:value` pieces, e.g. `1:0.1, 40001:0.05`.
/// Unknown keys are rejected. See configs/ for complete examples.
struct ExperimentConfig {
  std::string name = "experiment";
  DatasetKind dataset_kind = DatasetKind::Logistic;
  LogisticDatasetSpec logistic;
  double reg_weight = 0.005;
  MLPDatasetSpec mlp;
  std::size_t workers = 2;

  engine::AlgoConfig algo;
  /// "zero" or "normal" (entries N(0, init_scale²), drawn from stream "init").
  std::string init = "zero";
  double init_scale = 0.1;

  std::uint64_t log_every = 1000;
  std::filesystem::path output;

  std::size_t num_boundaries() const;
};

/// Flattened dotted keys to values.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap read_config_map(std::string_view text);
ExperimentConfig parse_config(const ConfigMap& map);
ExperimentConfig parse_config_text(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& file);

engine::Schedule parse_schedule(std::string_view text, std::string_view field);

}  // namespace clapping::harness
