#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrpm/exchange.hpp"
#include "hrpm/high_agent.hpp"
#include "hrpm/low_agent.hpp"
#include "hrpm/market_data.hpp"
#include "hrpm/portfolio.hpp"

namespace hrpm {

/// Daily bars and intraday books for a universe; snapshot `i` of every book sits at
/// global step `first_step + i` with global step = day * steps_per_day + j.
struct MarketData {
  std::vector<BarSeries> bars;
  std::vector<LobSeries> books;
  int steps_per_day = 16;
  double tick = 0.01;

  int assets() const { return static_cast<int>(bars.size()); }
  std::vector<std::string> names() const;
  int first_day() const { return bars.front().first_day(); }
  int last_day() const { return bars.front().last_day(); }
  /// Throws DataError when series disagree on assets or days, or books do not cover the bars.
  void validate() const;
  std::span<const LobSnapshot> stream(int asset) const;
  /// Stream index of the first snapshot of `day`.
  int day_start_index(int asset, int day) const;
  /// Closing prices with cash (1) at index 0.
  Eigen::VectorXd closes(int day) const;
};

MarketData from_synthetic(const SyntheticMarket& market, const SyntheticMarketConfig& config);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Exceptions are rethrown.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

// ---------------------------------------------------------------------------

struct PretrainConfig {
  std::vector<int> assets;
  std::vector<Direction> directions{Direction::Sell, Direction::Buy};
  double q_max = 1000.0;
  int t_max = 15;
  int quantity_levels = 8;
  int episodes_per_cell = 1;
  /// Full passes over the lattice per (asset, direction).
  int cycles = 20;
  int first_day = 1;
  int last_day = 1;
  int heldout_first_day = 1;
  int heldout_last_day = 1;
  int heldout_episodes = 50;
  int lob_window = 10;
  int levels = 5;
  double commission = 0.002;
  ActionGrid grid;
  LowTrainConfig low;
  /// One policy per direction shared by every asset.
  bool shared_policy = false;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct TaskCell {
  double quantity = 0.0;
  int window = 1;
};

/// {0} plus `levels` evenly spaced quantities up to q_max.
std::vector<double> quantity_lattice(double q_max, int levels);

/// Endless stream over the (quantity, window) lattice. Each cycle visits every cell
/// `episodes_per_cell` times in a fresh random order.
class TaskIterator {
 public:
  TaskIterator(const PretrainConfig& config, std::uint64_t seed);
  TaskCell next();
  std::size_t cycle_length() const { return cells_.size(); }

 private:
  void reshuffle();

  std::vector<TaskCell> cells_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

struct PretrainStats {
  std::string asset;
  Direction direction = Direction::Sell;
  long episodes = 0;
  long steps = 0;
  double heldout_policy_cost = 0.0;
  double heldout_market_cost = 0.0;
  /// Set when the policy did not beat the market-order baseline on held-out episodes.
  bool flagged = false;
};

class PolicyBank {
 public:
  /// Learned policies are saved with the bank; plain ones are not.
  void put_learned(const std::string& asset, Direction d, std::shared_ptr<const BdqPolicy> policy);
  void put(const std::string& asset, Direction d, std::shared_ptr<const ExecutionPolicy> policy);
  const BdqPolicy* learned(const std::string& asset, Direction d) const;
  const ExecutionPolicy& get(const std::string& asset, Direction d) const;
  bool contains(const std::string& asset, Direction d) const;
  std::size_t size() const { return policies_.size(); }
  /// "asset_dir" labels of the pairs absent for `assets`.
  std::vector<std::string> missing(const std::vector<std::string>& assets) const;

  void save(const std::filesystem::path& dir, int lob_window, int levels) const;
  static PolicyBank load(const std::filesystem::path& dir, const std::vector<std::string>& assets);

  /// Bank that sends every task as one market order.
  static PolicyBank market_orders(const std::vector<std::string>& assets);

 private:
  struct Entry {
    std::shared_ptr<const ExecutionPolicy> policy;
    std::shared_ptr<const BdqPolicy> bdq;
  };
  std::map<std::pair<std::string, Direction>, Entry> policies_;
};

std::string bank_label(const std::string& asset, Direction d);

struct PretrainResult {
  PolicyBank bank;
  std::vector<PretrainStats> stats;
};

struct PlacedTask {
  ExecutionTask task;
  int start = 0;
};

/// Task starting at the first snapshot of `day`, referenced to that day's close.
PlacedTask make_task(const MarketData& data, int asset, Direction d, double quantity, int window, int day);

PretrainResult pretrain_low(const PretrainConfig& config, const MarketData& data);

// ---------------------------------------------------------------------------

enum class ExecutionMode { Simulator, Ideal };
const char* to_string(ExecutionMode m);

struct HierarchyConfig {
  int holding_days = 5;
  int trading_days = 1;
  int window = 10;
  int lob_window = 10;
  int levels = 5;
  /// Low-level steps per execution task; must stay inside the trading day.
  int execution_window = 15;
  double commission = 0.002;
  double initial_value = 1e6;
  double bankruptcy_floor = 1e-6;
  /// Largest per-task quantity the banked policies were trained on.
  double q_max = 1000.0;
  /// Periods per episode; 0 runs as many as the data allows.
  int horizon = 0;
  int first_day = 10;
  int last_day = 10;
  ExecutionMode mode = ExecutionMode::Simulator;
};

/// What a strategy sees when choosing the weights for the next trading day.
struct DecisionContext {
  const MarketData& data;
  /// Last day whose close is known.
  int day = 0;
  int period = 0;
  /// Weights after the holding-period drift.
  const Eigen::VectorXd& weights;
};

struct Decision {
  Eigen::VectorXd weights;
  std::optional<HighStep> step;
};

class HighDecider {
 public:
  virtual ~HighDecider() = default;
  virtual Decision decide(const DecisionContext& ctx, Rng& rng) = 0;
};

/// Dirichlet (or greedy mean) actions from a policy net.
class PolicyDecider : public HighDecider {
 public:
  PolicyDecider(const Mlp& net, double kappa, int window, bool greedy)
      : net_(net), kappa_(kappa), window_(window), greedy_(greedy) {}
  Decision decide(const DecisionContext& ctx, Rng& rng) override;

 private:
  const Mlp& net_;
  double kappa_;
  int window_;
  bool greedy_;
};

struct PeriodRecord {
  int period = 0;
  int first_day = 0;
  int trade_day = 0;
  double value_before = 0.0;
  double value_drift = 0.0;
  double value_after = 0.0;
  Eigen::VectorXd target;
  Eigen::VectorXd weights_after;
  TradingCostReport cost;
  /// Pro-rata factor applied to buys to keep cash non-negative (1 when unscaled).
  double buy_scale = 1.0;
  std::vector<int> low_steps;
  int high_actions = 0;
};

struct EquityPoint {
  int day = 0;
  double value = 0.0;
};

struct EpisodeResult {
  HighTrajectory trajectory;
  std::vector<PeriodRecord> periods;
  std::vector<EquityPoint> curve;
  std::vector<std::string> ledger;
  std::vector<std::string> fills;
  bool bankrupt = false;
};

/// Number of whole periods that fit between first_day and last_day.
int max_periods(const HierarchyConfig& config);

/// Alternates holding-period drift, one high-level decision, sell-then-buy execution
/// through the bank (or ideally at the period's opening prices) and settlement, until
/// the horizon or bankruptcy. High-level rewards are value changes over the initial value.
EpisodeResult run_hierarchical_episode(HighDecider& decider, const PolicyBank* bank, const MarketData& data,
                                       const HierarchyConfig& config, Rng& rng);

struct TrainHighConfig {
  HierarchyConfig hierarchy;
  HighTrainConfig high;
  std::vector<int> hidden{128, 128};
  int validation_first_day = 0;
  int validation_last_day = 0;
  int validate_every = 10;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct TrainingCurvePoint {
  int update = 0;
  double mean_return = 0.0;
  double mean_entropy = 0.0;
  std::optional<double> validation_return;
};

struct TrainHighResult {
  Mlp best;
  Mlp last;
  double best_validation = 0.0;
  std::vector<TrainingCurvePoint> curve;
};

/// Throws DivergenceError on non-finite returns or parameters.
TrainHighResult train_high(const TrainHighConfig& config, const PolicyBank& bank, const MarketData& data);

Mlp init_high_net(int assets, int window, const std::vector<int>& hidden, std::uint64_t seed);

}  // namespace hrpm
