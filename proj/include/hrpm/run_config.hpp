#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hrpm/evaluation.hpp"
#include "hrpm/kv_file.hpp"
#include "hrpm/market_data.hpp"
#include "hrpm/training.hpp"

namespace hrpm {

/// Every setting of a run in one flat key-value file. Synthetic-market keys are
/// unprefixed (`assets`, `days`, `drift`, ...); the rest carry a section prefix.
struct RunConfig {
  std::uint64_t seed = 7;
  std::string data_source = "synthetic";
  std::filesystem::path data_dir;
  std::vector<std::string> asset_names;
  SyntheticMarketConfig synthetic;

  double commission = 0.002;
  int holding_days = 5;
  int trading_days = 1;
  int window = 10;
  int lob_window = 10;
  int levels = 5;
  /// 0 means steps_per_day - 1.
  int execution_window = 0;
  double initial_value = 1e6;
  double train_fraction = 0.7;
  double validation_fraction = 0.2;

  ActionGrid grid;
  LowTrainConfig low;
  double q_max = 2000.0;
  int quantity_levels = 8;
  int episodes_per_cell = 1;
  int cycles = 10;
  int heldout_episodes = 20;
  bool shared_policy = false;

  HighTrainConfig high;
  std::vector<int> high_hidden{128, 128};
  int validate_every = 10;
  int horizon = 0;

  BaselineParams baselines;
  std::vector<std::string> strategies{"HRPM", "UCRP", "Winner", "Loser", "OLMAR", "WMAMR"};
  ExecutionMode baseline_execution = ExecutionMode::Ideal;
  double trading_days_per_year = 252.0;

  std::filesystem::path output_dir = "run";

  /// Consumes every known key; throws ConfigError on unknown keys or invalid values.
  static RunConfig read(const KeyValueFile& kv);
  static RunConfig load(const std::filesystem::path& path);

  /// Canonical key-value form; the output directory is left out.
  KeyValueFile to_kv() const;
  /// Hex FNV-1a of the canonical form.
  std::string hash() const;
  void validate() const;

  int steps_per_day() const { return synthetic.steps_per_day; }
  double tick() const { return synthetic.tick_size; }
  int effective_execution_window() const { return execution_window > 0 ? execution_window : steps_per_day() - 1; }
};

/// Day ranges of a run derived from the data span.
struct DaySplit {
  int pretrain_first = 0;
  int train_first = 0;
  int train_last = 0;
  int validation_first = 0;
  int validation_last = 0;
  int test_first = 0;
  int test_last = 0;
};

/// Throws ConfigError when a range would be empty or lack history.
DaySplit split_days(const RunConfig& config, int first_day, int last_day);

PretrainConfig pretrain_config(const RunConfig& config, const MarketData& data, const DaySplit& split, int jobs);
HierarchyConfig hierarchy_config(const RunConfig& config, int first_day, int last_day, ExecutionMode mode);
TrainHighConfig train_high_config(const RunConfig& config, const DaySplit& split, int jobs);

}  // namespace hrpm
