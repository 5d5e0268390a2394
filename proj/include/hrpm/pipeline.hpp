#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hrpm/evaluation.hpp"
#include "hrpm/run_config.hpp"

namespace hrpm {

/// Layout of a run directory.
struct RunPaths {
  std::filesystem::path root;

  explicit RunPaths(std::filesystem::path r) : root(std::move(r)) {}
  std::filesystem::path config() const { return root / "config.cfg"; }
  std::filesystem::path manifest() const { return root / "run.json"; }
  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path bank() const { return root / "bank"; }
  std::filesystem::path high() const { return root / "high.ckpt"; }
  std::filesystem::path high_sidecar() const { return root / "high.json"; }
  std::filesystem::path logs() const { return root / "logs"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path curves() const { return root / "curves"; }
};

/// Creates the run directory or reopens it. A run directory written under a
/// different configuration hash is refused with ConfigError.
void open_run(const RunConfig& config, const RunPaths& paths);

/// Synthetic runs read the generated CSVs under the run's data directory; CSV runs
/// read `<asset>_ohlcv.csv` and `<asset>_lob.csv` from data.dir.
MarketData load_market(const RunConfig& config, const RunPaths& paths);

/// Writes `<asset>_ohlcv.csv` and `<asset>_lob.csv` for every synthetic asset.
std::vector<std::filesystem::path> cmd_gen_data(const RunConfig& config, const RunPaths& paths);
std::vector<PretrainStats> cmd_pretrain(const RunConfig& config, const RunPaths& paths, int jobs);
TrainHighResult cmd_train(const RunConfig& config, const RunPaths& paths, int jobs);
/// `strategy` is a strategy name or "all" (every configured strategy plus the index proxy).
std::vector<ReportRow> cmd_backtest(const RunConfig& config, const RunPaths& paths, const std::string& strategy);
/// Merges every report under `run_dir/reports` into a table sorted by ARR, written
/// to `run_dir/comparison.json`; returns the text rendering.
std::string cmd_report(const std::filesystem::path& run_dir);

}  // namespace hrpm
