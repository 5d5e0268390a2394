#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "hrpm/exchange.hpp"

namespace hrpm {

// Index 0 of every weight and price vector is cash, whose price is always 1.

struct PortfolioState {
  Eigen::VectorXd weights;
  double value = 0.0;
  Eigen::VectorXd prices;
  int period = 0;

  Eigen::Index assets() const { return weights.size() - 1; }
  /// Shares held per entry (cash entry in currency units).
  Eigen::VectorXd holdings() const { return (value * weights.array() / prices.array()).matrix(); }
};

/// Throws std::invalid_argument unless weights are a simplex vector and prices valid.
void validate(const PortfolioState& state);

struct DriftResult {
  double value = 0.0;
  Eigen::VectorXd weights;
};

/// Value and weights at the end of a holding period whose closing prices are `closes`.
DriftResult drift(const PortfolioState& state, const Eigen::VectorXd& closes);

struct TargetOrderSet {
  /// Signed share quantities; entry 0 (cash) is always zero. Positive buys.
  Eigen::VectorXd quantities;
  Eigen::VectorXd prices;
};

TargetOrderSet target_quantities(double value, const Eigen::VectorXd& current_weights,
                                 const Eigen::VectorXd& target_weights,
                                 const Eigen::VectorXd& prices);

/// Executed result of one asset's trading task.
struct ExecutedOrder {
  int asset = 0;
  Direction direction = Direction::Buy;
  FillReport fill;

  double signed_quantity() const { return sign(direction) * fill.executed; }
};

struct TradingCostReport {
  double commission = 0.0;
  double slippage = 0.0;
  double total = 0.0;
  Eigen::VectorXd asset_commission;
  Eigen::VectorXd asset_slippage;
};

TradingCostReport trading_cost(const std::vector<ExecutedOrder>& orders,
                               const Eigen::VectorXd& reference_prices, double commission_rate);

struct SettleResult {
  PortfolioState next;
  TradingCostReport cost;
  /// Value from the compact drift-minus-cost form; equals next.value up to rounding.
  double compact_value = 0.0;
  bool bankrupt = false;
};

/// Applies the fills of one trading period to the state at the start of the
/// preceding holding period and marks the result to `next_prices`.
///
/// Throws InfeasibleRebalance when buys overdraw cash or sells exceed holdings.
SettleResult settle(const PortfolioState& prior, const std::vector<ExecutedOrder>& orders,
                    const Eigen::VectorXd& next_prices, double commission_rate);

inline double high_reward(double value_before, double value_after) { return value_after - value_before; }

/// Ledger line `{t, v_before, v_after, c_com, c_slippage, weights}`.
std::string ledger_json_line(int period, double value_before, const SettleResult& settled);

}  // namespace hrpm
