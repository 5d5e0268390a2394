#include "hrpm/portfolio.hpp"

#include "hrpm/errors.hpp"
#include "hrpm/simplex.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace hrpm {

void validate(const PortfolioState& state) {
  if (state.weights.size() < 1 || state.weights.size() != state.prices.size()) {
    throw std::invalid_argument("portfolio weights and prices must have matching size");
  }
  if (!is_simplex(state.weights)) throw std::invalid_argument("portfolio weights off the simplex");
  if (state.prices(0) != 1.0) throw std::invalid_argument("cash price must be 1");
  if ((state.prices.array() <= 0.0).any()) throw std::invalid_argument("prices must be positive");
  if (!(state.value > 0.0)) throw std::invalid_argument("portfolio value must be positive");
}

DriftResult drift(const PortfolioState& state, const Eigen::VectorXd& closes) {
  if (closes.size() != state.prices.size()) throw std::invalid_argument("drift: price size mismatch");
  // Marked through share holdings so settle() with no fills reproduces it bit for bit.
  const Eigen::VectorXd components = (state.holdings().array() * closes.array()).matrix();
  const double value = components.sum();
  return {value, components / value};
}

TargetOrderSet target_quantities(double value, const Eigen::VectorXd& current_weights,
                                 const Eigen::VectorXd& target_weights,
                                 const Eigen::VectorXd& prices) {
  if (current_weights.size() != target_weights.size() || prices.size() != target_weights.size()) {
    throw std::invalid_argument("target_quantities: size mismatch");
  }
  TargetOrderSet orders;
  orders.prices = prices;
  orders.quantities = (value * (target_weights - current_weights).array() / prices.array()).matrix();
  orders.quantities(0) = 0.0;
  return orders;
}

TradingCostReport trading_cost(const std::vector<ExecutedOrder>& orders,
                               const Eigen::VectorXd& reference_prices, double commission_rate) {
  TradingCostReport report;
  report.asset_commission = Eigen::VectorXd::Zero(reference_prices.size());
  report.asset_slippage = Eigen::VectorXd::Zero(reference_prices.size());
  for (const ExecutedOrder& o : orders) {
    if (o.fill.executed <= 0.0) continue;
    const double avg = *o.fill.average_price;
    const double q = o.fill.executed;
    const double com = commission_rate * q * avg;
    const double slip = (avg - reference_prices(o.asset)) * sign(o.direction) * q;
    report.asset_commission(o.asset) += com;
    report.asset_slippage(o.asset) += slip;
    report.commission += com;
    report.slippage += slip;
  }
  report.total = report.commission + report.slippage;
  return report;
}

SettleResult settle(const PortfolioState& prior, const std::vector<ExecutedOrder>& orders,
                    const Eigen::VectorXd& next_prices, double commission_rate) {
  if (next_prices.size() != prior.prices.size()) throw std::invalid_argument("settle: price size mismatch");
  const Eigen::Index n = prior.weights.size();

  // Cash and share ledger.
  Eigen::VectorXd shares = prior.holdings();
  double cash = prior.value * prior.weights(0);
  for (const ExecutedOrder& o : orders) {
    if (o.asset < 1 || o.asset >= n) throw std::invalid_argument("settle: asset index out of range");
    if (o.fill.executed <= 0.0) continue;
    const double notional = o.fill.executed * *o.fill.average_price;
    cash -= sign(o.direction) * notional + commission_rate * notional;
    shares(o.asset) += o.signed_quantity();
  }
  const double scale = std::max(1.0, prior.value);
  if (cash < -1e-9 * scale) {
    throw InfeasibleRebalance("rebalance overdraws cash by " + std::to_string(-cash));
  }
  for (Eigen::Index i = 1; i < n; ++i) {
    if (shares(i) < -1e-9 * std::max(1.0, std::abs(prior.holdings()(i)))) {
      throw InfeasibleRebalance("sell exceeds holdings of asset " + std::to_string(i));
    }
  }
  cash = std::max(cash, 0.0);
  shares = shares.cwiseMax(0.0);
  shares(0) = cash;

  SettleResult result;
  result.cost = trading_cost(orders, next_prices, commission_rate);
  const Eigen::VectorXd components = (shares.array() * next_prices.array()).matrix();
  const double value = components.sum();
  result.compact_value =
      (prior.value * prior.weights.array() * next_prices.array() / prior.prices.array()).sum() -
      result.cost.total;

  result.next.prices = next_prices;
  result.next.period = prior.period + 1;
  result.next.value = value;
  result.bankrupt = !(value > 0.0);
  result.next.weights = result.bankrupt ? Eigen::VectorXd::Unit(n, 0) : Eigen::VectorXd(components / value);
  return result;
}

std::string ledger_json_line(int period, double value_before, const SettleResult& settled) {
  nlohmann::json j;
  j["t"] = period;
  j["v_before"] = value_before;
  j["v_after"] = settled.next.value;
  j["c_com"] = settled.cost.commission;
  j["c_slippage"] = settled.cost.slippage;
  j["weights"] = std::vector<double>(settled.next.weights.data(),
                                     settled.next.weights.data() + settled.next.weights.size());
  return j.dump();
}

}  // namespace hrpm
