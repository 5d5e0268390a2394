#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hrpm/market_data.hpp"

namespace hrpm {

enum class Direction { Buy, Sell };

/// +1 for buys, -1 for sells.
inline double sign(Direction d) { return d == Direction::Buy ? 1.0 : -1.0; }
inline const char* to_string(Direction d) { return d == Direction::Buy ? "buy" : "sell"; }

/// Remaining quantities below this are treated as done.
inline constexpr double kQuantityEpsilon = 1e-9;

/// Order of up to |quantity| shares at a price no worse than `price`; positive
/// quantity buys, negative sells, zero skips the step. `market` orders ignore
/// the price and walk the opposite side like the end-of-window cleanup.
struct LimitOrderAction {
  double price = 0.0;
  double quantity = 0.0;
  bool market = false;

  static LimitOrderAction skip() { return {}; }
  bool is_skip() const { return quantity == 0.0; }
  Direction direction() const { return quantity >= 0.0 ? Direction::Buy : Direction::Sell; }
};

struct Fill {
  double price = 0.0;
  double quantity = 0.0;
};

struct FillReport {
  /// Unsigned executed quantity.
  double executed = 0.0;
  /// Volume-weighted price; absent when nothing executed.
  std::optional<double> average_price;
  std::vector<Fill> fills;
  /// Set when forced liquidation ran out of quoted depth.
  bool liquidity_exhausted = false;

  double notional() const;
  void add(const Fill& fill);
  void merge(const FillReport& other);
};

/// Mutable book built from one snapshot, plus at most one resting agent order.
class OrderBook {
 public:
  explicit OrderBook(const LobSnapshot& snapshot);

  const std::vector<PriceLevel>& bids() const { return bids_; }
  const std::vector<PriceLevel>& asks() const { return asks_; }
  /// Best quote on the agent's own side (ask for a seller, bid for a buyer) of the
  /// snapshot the book was built from.
  double best_same_side(Direction agent) const;
  /// Worst quoted price on the side a taker in direction `d` consumes.
  std::optional<double> worst_opposite(Direction d) const;

  std::vector<PriceLevel>& opposite_side(Direction d) { return d == Direction::Buy ? asks_ : bids_; }

  const std::optional<LimitOrderAction>& resting() const { return resting_; }
  void set_resting(const LimitOrderAction& order) { resting_ = order; }
  void clear_resting() { resting_.reset(); }

 private:
  std::vector<PriceLevel> bids_;
  std::vector<PriceLevel> asks_;
  double initial_best_bid_;
  double initial_best_ask_;
  std::optional<double> worst_bid_;
  std::optional<double> worst_ask_;
  std::optional<LimitOrderAction> resting_;
};

/// Fills against the opposite side at prices no worse than the limit, best level first.
/// Any unfilled remainder is left in the book's resting slot.
FillReport match_limit_order(OrderBook& book, const LimitOrderAction& order);

/// Matches a resting order against this book, then cancels it.
FillReport expire_resting(OrderBook& book);

/// Market-order cleanup of `quantity` shares. When quoted depth runs out the rest
/// fills at the worst quoted level and the report is flagged.
FillReport forced_liquidation(OrderBook& book, double quantity, Direction direction);

/// Negative trading cost of one fill: -(commission + signed slippage vs. reference).
double low_reward(const FillReport& fill, Direction direction, double reference_price,
                  double commission_rate);

struct ExecutionTask {
  std::string asset;
  Direction direction = Direction::Sell;
  double quantity = 0.0;
  int window = 1;
  /// Closing price of the trading period; the slippage reference.
  double reference_price = 0.0;
};

struct ExecutionPrivateState {
  int remaining_time = 0;
  double remaining_quantity = 0.0;
  Direction direction = Direction::Sell;
};

struct LowState {
  ExecutionPrivateState own;
  LobWindow market;
};

struct StepResult {
  LowState state;
  double reward = 0.0;
  bool done = false;
  FillReport fill;
  bool forced = false;
};

/// One record of the per-episode fill log.
struct FillEvent {
  int step = 0;
  std::optional<double> price;
  double quantity = 0.0;
  double reward = 0.0;
  bool forced = false;
};

/// Low-level execution environment over a snapshot stream.
///
/// The agent acts on the book at position `t`; its remainder rests until the
/// snapshot at `t + 1` arrives, is matched once against it, then cancelled. At
/// the end of the window any remaining quantity is liquidated against the
/// snapshot that closes the window. Our fills never alter later snapshots.
class ExecutionEnv {
 public:
  ExecutionEnv(std::span<const LobSnapshot> stream, int lob_window, int levels,
               double commission_rate);

  /// Starts an episode whose first action faces snapshot `start`. Needs
  /// `start >= lob_window` and `start + task.window < stream.size()`.
  LowState reset(const ExecutionTask& task, int start);
  StepResult step(const LimitOrderAction& action);

  bool done() const { return done_; }
  const OrderBook& book() const { return *book_; }
  const ExecutionTask& task() const { return task_; }
  const ExecutionPrivateState& private_state() const { return own_; }
  int position() const { return position_; }
  double cumulative_reward() const { return cumulative_reward_; }
  /// Every fill of the episode, including forced liquidation.
  const FillReport& episode_fills() const { return episode_fills_; }
  const std::vector<FillEvent>& fill_log() const { return log_; }
  int lob_window() const { return lob_window_; }
  int levels() const { return levels_; }
  double commission_rate() const { return commission_rate_; }

 private:
  LowState observe() const;
  void record(const FillReport& fill, double reward, bool forced);

  std::span<const LobSnapshot> stream_;
  int lob_window_;
  int levels_;
  double commission_rate_;

  ExecutionTask task_;
  ExecutionPrivateState own_;
  int position_ = 0;
  std::optional<OrderBook> book_;
  bool done_ = true;
  double cumulative_reward_ = 0.0;
  FillReport episode_fills_;
  std::vector<FillEvent> log_;
};

/// JSON line `{step, price, quantity, reward, forced}`.
std::string to_json_line(const FillEvent& event);

}  // namespace hrpm
