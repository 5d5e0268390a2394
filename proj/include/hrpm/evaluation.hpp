#pragma once

#include <Eigen/Dense>

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hrpm/training.hpp"

namespace hrpm {

struct EquityCurve {
  std::vector<EquityPoint> points;
  double trading_days_per_year = 252.0;

  /// Throws std::invalid_argument unless values are positive and days increasing.
  void validate() const;
  /// Simple returns between consecutive points.
  Eigen::VectorXd returns() const;
};

/// (V_f - V_i) / V_i * T_year / T_all with T_all the day span of the curve.
double arr(const EquityCurve& curve);
/// ARR over the annualized sample standard deviation of returns; absent at zero volatility.
std::optional<double> asr(const EquityCurve& curve);
double mdd(const EquityCurve& curve);
/// ARR over annualized downside deviation below `mar`; absent when no return is below it.
std::optional<double> ddr(const EquityCurve& curve, double mar = 0.0);

struct MetricsReport {
  double arr = 0.0;
  std::optional<double> asr;
  double mdd = 0.0;
  std::optional<double> ddr;
  double mar = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport compute_metrics(const EquityCurve& curve, double mar = 0.0);

// ---------------------------------------------------------------------------

enum class BaselineKind { UCRP, Winner, Loser, OLMAR, WMAMR };
const char* to_string(BaselineKind k);
std::optional<BaselineKind> parse_baseline(const std::string& name);

struct BaselineParams {
  double olmar_epsilon = 10.0;
  int olmar_window = 5;
  double wmamr_epsilon = 0.5;
  int wmamr_window = 5;
  /// Return lookback of Winner and Loser, in days.
  int lookback = 5;
  /// Loser puts everything on the single worst asset instead of the bottom half.
  bool strict_loser = false;
};

/// Weights for the next period from daily closes `history` (oldest first, cash price
/// 1 at index 0, the last entry is the latest known close) and the current weights.
/// Returns the current weights when history is too short.
Eigen::VectorXd baseline_weights(BaselineKind kind, const BaselineParams& params,
                                 const std::vector<Eigen::VectorXd>& history,
                                 const Eigen::VectorXd& current);

class BaselineDecider : public HighDecider {
 public:
  BaselineDecider(BaselineKind kind, BaselineParams params) : kind_(kind), params_(params) {}
  Decision decide(const DecisionContext& ctx, Rng& rng) override;

 private:
  BaselineKind kind_;
  BaselineParams params_;
};

/// Keeps everything in cash.
class CashDecider : public HighDecider {
 public:
  Decision decide(const DecisionContext& ctx, Rng& rng) override;
};

/// Buys an equal-weight basket of the risky assets once, then holds.
class IndexProxyDecider : public HighDecider {
 public:
  Decision decide(const DecisionContext& ctx, Rng& rng) override;
};

// ---------------------------------------------------------------------------

struct BacktestResult {
  std::string strategy;
  ExecutionMode mode = ExecutionMode::Simulator;
  EpisodeResult episode;
  EquityCurve curve;
};

BacktestResult run_backtest(const std::string& name, HighDecider& decider, const PolicyBank* bank,
                            const MarketData& data, const HierarchyConfig& config, std::uint64_t seed);

struct ReportRow {
  std::string strategy;
  MetricsReport metrics;
  std::string execution_mode;
  std::string config_hash;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

nlohmann::json to_json(const ReportRow& row);
ReportRow report_row_from_json(const nlohmann::json& j);

/// One row per backtest; rows keep the input order.
std::vector<ReportRow> comparison_table(const std::vector<BacktestResult>& results, const std::string& config_hash);

/// Rows sorted by descending ARR, rendered as a fixed-width text table.
std::string format_table(std::vector<ReportRow> rows);

void write_curve_csv(const std::filesystem::path& path, const EquityCurve& curve);
/// Long-format `strategy,day,value` rows for external plotting.
void write_long_csv(const std::filesystem::path& path, const std::vector<BacktestResult>& results);

}  // namespace hrpm
