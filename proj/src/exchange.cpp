#include "hrpm/exchange.hpp"

#include "hrpm/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace hrpm {

double FillReport::notional() const {
  double n = 0.0;
  for (const Fill& f : fills) n += f.price * f.quantity;
  return n;
}

void FillReport::add(const Fill& fill) {
  if (fill.quantity <= 0.0) return;
  fills.push_back(fill);
  executed += fill.quantity;
  average_price = notional() / executed;
}

void FillReport::merge(const FillReport& other) {
  for (const Fill& f : other.fills) add(f);
  liquidity_exhausted = liquidity_exhausted || other.liquidity_exhausted;
}

OrderBook::OrderBook(const LobSnapshot& snapshot)
    : bids_(snapshot.bids),
      asks_(snapshot.asks),
      initial_best_bid_(snapshot.best_bid()),
      initial_best_ask_(snapshot.best_ask()) {
  if (!bids_.empty()) worst_bid_ = bids_.back().price;
  if (!asks_.empty()) worst_ask_ = asks_.back().price;
  std::erase_if(bids_, [](const PriceLevel& l) { return l.volume <= 0.0; });
  std::erase_if(asks_, [](const PriceLevel& l) { return l.volume <= 0.0; });
}

double OrderBook::best_same_side(Direction agent) const {
  return agent == Direction::Sell ? initial_best_ask_ : initial_best_bid_;
}

std::optional<double> OrderBook::worst_opposite(Direction d) const {
  return d == Direction::Buy ? worst_ask_ : worst_bid_;
}

namespace {

bool crosses(Direction d, double level_price, double limit) {
  return d == Direction::Buy ? level_price <= limit : level_price >= limit;
}

/// Takes up to `quantity` from the opposite side, best level first, stopping at
/// the first level that fails `accept`. Exhausted levels are removed.
template <typename Accept>
double take_liquidity(OrderBook& book, Direction d, double quantity, FillReport& report,
                      Accept accept) {
  auto& side = book.opposite_side(d);
  double left = quantity;
  std::size_t consumed = 0;
  for (auto& level : side) {
    if (left <= 0.0 || !accept(level.price)) break;
    const double take = std::min(left, level.volume);
    report.add({level.price, take});
    level.volume -= take;
    left -= take;
    if (level.volume <= 0.0) {
      level.volume = 0.0;
      ++consumed;
    }
  }
  side.erase(side.begin(), side.begin() + static_cast<std::ptrdiff_t>(consumed));
  return left;
}

}  // namespace

FillReport match_limit_order(OrderBook& book, const LimitOrderAction& order) {
  FillReport report;
  if (order.is_skip()) return report;
  const Direction d = order.direction();
  const double quantity = std::abs(order.quantity);
  if (order.market) return forced_liquidation(book, quantity, d);
  if (!(order.price > 0.0)) throw std::invalid_argument("limit price must be positive");
  const double left = take_liquidity(book, d, quantity, report,
                                     [&](double p) { return crosses(d, p, order.price); });
  if (left > 0.0) {
    LimitOrderAction rest = order;
    rest.quantity = sign(d) * left;
    book.set_resting(rest);
  }
  return report;
}

FillReport expire_resting(OrderBook& book) {
  FillReport report;
  if (!book.resting()) return report;
  const LimitOrderAction order = *book.resting();
  book.clear_resting();
  const Direction d = order.direction();
  take_liquidity(book, d, std::abs(order.quantity), report,
                 [&](double p) { return crosses(d, p, order.price); });
  return report;
}

FillReport forced_liquidation(OrderBook& book, double quantity, Direction direction) {
  FillReport report;
  if (quantity <= 0.0) return report;
  const auto worst = book.worst_opposite(direction);
  if (!worst) throw LiquidityError("forced liquidation against an empty book side");
  const double left = take_liquidity(book, direction, quantity, report, [](double) { return true; });
  if (left > 0.0) {
    report.add({*worst, left});
    report.liquidity_exhausted = true;
  }
  return report;
}

double low_reward(const FillReport& fill, Direction direction, double reference_price,
                  double commission_rate) {
  if (fill.executed <= 0.0) return 0.0;
  const double notional = fill.notional();
  return -(commission_rate * notional + sign(direction) * (notional - reference_price * fill.executed));
}

// ---------------------------------------------------------------------------

ExecutionEnv::ExecutionEnv(std::span<const LobSnapshot> stream, int lob_window, int levels,
                           double commission_rate)
    : stream_(stream), lob_window_(lob_window), levels_(levels), commission_rate_(commission_rate) {
  if (lob_window < 1 || levels < 1) throw std::invalid_argument("lob window and levels must be >= 1");
}

LowState ExecutionEnv::reset(const ExecutionTask& task, int start) {
  if (task.window < 1) throw std::invalid_argument("execution window must be >= 1");
  if (!(task.quantity >= 0.0)) throw std::invalid_argument("target quantity must be >= 0");
  if (start < lob_window_ || static_cast<std::size_t>(start + task.window) >= stream_.size()) {
    throw DataError("snapshot stream too short for an execution window at step " +
                    std::to_string(start));
  }
  task_ = task;
  own_ = {task.window, task.quantity, task.direction};
  position_ = start;
  book_.emplace(stream_[static_cast<std::size_t>(start)]);
  done_ = task.quantity <= kQuantityEpsilon;
  cumulative_reward_ = 0.0;
  episode_fills_ = {};
  log_.clear();
  return observe();
}

LowState ExecutionEnv::observe() const {
  return {own_, make_lob_window(stream_, position_, lob_window_, levels_)};
}

void ExecutionEnv::record(const FillReport& fill, double reward, bool forced) {
  log_.push_back({position_, fill.average_price, fill.executed, reward, forced});
}

StepResult ExecutionEnv::step(const LimitOrderAction& action) {
  if (done_) throw LifecycleError("step() called on a finished execution episode");
  if (!action.is_skip()) {
    if (action.direction() != own_.direction) {
      throw std::invalid_argument("order direction does not match the execution task");
    }
    if (std::abs(action.quantity) > own_.remaining_quantity * (1.0 + 1e-12) + kQuantityEpsilon) {
      throw std::invalid_argument("order quantity exceeds remaining quantity");
    }
  }
  LimitOrderAction order = action;
  if (!order.is_skip()) {
    order.quantity = sign(own_.direction) * std::min(std::abs(order.quantity), own_.remaining_quantity);
  }

  StepResult result;
  FillReport fill = match_limit_order(*book_, order);
  const std::optional<LimitOrderAction> resting = book_->resting();

  // Next snapshot arrives; the remainder gets one chance against it, then expires.
  ++position_;
  --own_.remaining_time;
  book_.emplace(stream_[static_cast<std::size_t>(position_)]);
  if (resting) {
    book_->set_resting(*resting);
    fill.merge(expire_resting(*book_));
  }
  own_.remaining_quantity -= fill.executed;
  if (own_.remaining_quantity < kQuantityEpsilon) own_.remaining_quantity = 0.0;

  const double reward = low_reward(fill, own_.direction, task_.reference_price, commission_rate_);
  record(fill, reward, false);
  result.reward = reward;
  result.fill = fill;

  if (own_.remaining_time == 0 && own_.remaining_quantity > 0.0) {
    FillReport cleanup = forced_liquidation(*book_, own_.remaining_quantity, own_.direction);
    const double forced_reward =
        low_reward(cleanup, own_.direction, task_.reference_price, commission_rate_);
    record(cleanup, forced_reward, true);
    result.reward += forced_reward;
    result.fill.merge(cleanup);
    result.forced = true;
    own_.remaining_quantity = 0.0;
  }

  episode_fills_.merge(result.fill);
  cumulative_reward_ += result.reward;
  done_ = own_.remaining_time == 0 || own_.remaining_quantity <= 0.0;
  result.done = done_;
  result.state = observe();
  return result;
}

std::string to_json_line(const FillEvent& event) {
  nlohmann::json j;
  j["step"] = event.step;
  j["price"] = event.price ? nlohmann::json(*event.price) : nlohmann::json(nullptr);
  j["quantity"] = event.quantity;
  j["reward"] = event.reward;
  j["forced"] = event.forced;
  return j.dump();
}

}  // namespace hrpm
