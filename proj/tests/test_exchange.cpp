#include <doctest.h>

#include "hrpm/errors.hpp"
#include "hrpm/exchange.hpp"
#include "hrpm/portfolio.hpp"
#include "oracles.hpp"

using namespace hrpm;

namespace {

LobSnapshot random_book(Rng& rng, int step) {
  LobSnapshot s;
  s.step = step;
  const double mid = 50.0 + 10.0 * rng.uniform();
  const int depth = 1 + static_cast<int>(rng.uniform_index(5));
  double bid = mid - 0.05;
  double ask = mid + 0.05;
  for (int l = 0; l < depth; ++l) {
    s.bids.push_back({bid, std::round(1.0 + 20.0 * rng.uniform())});
    s.asks.push_back({ask, std::round(1.0 + 20.0 * rng.uniform())});
    bid -= 0.01 * (1 + static_cast<int>(rng.uniform_index(3)));
    ask += 0.01 * (1 + static_cast<int>(rng.uniform_index(3)));
  }
  return s;
}

}  // namespace

TEST_CASE("limit orders match the brute-force matcher") {
  Rng rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const LobSnapshot snap = random_book(rng, 0);
    const bool buy = rng.uniform() < 0.5;
    const auto& opposite = buy ? snap.asks : snap.bids;
    const double limit = opposite[rng.uniform_index(opposite.size())].price + (rng.uniform() - 0.5) * 0.02;
    const double q = std::round(1.0 + 60.0 * rng.uniform());
    OrderBook book(snap);
    const FillReport r = match_limit_order(book, {limit, buy ? q : -q});
    const oracle::Match m = oracle::brute_force_match(opposite, buy, limit, q);
    REQUIRE(r.fills.size() == m.fills.size());
    for (std::size_t i = 0; i < m.fills.size(); ++i) {
      CHECK(r.fills[i].price == m.fills[i].price);
      CHECK(r.fills[i].quantity == m.fills[i].quantity);
    }
    CHECK(r.executed == m.executed);
    if (m.executed > 0.0) CHECK(*r.average_price == doctest::Approx(m.notional / m.executed).epsilon(1e-15));
    if (m.remainder > 0.0) {
      REQUIRE(book.resting());
      CHECK(std::abs(book.resting()->quantity) == m.remainder);
    } else {
      CHECK_FALSE(book.resting());
    }
  }
}

TEST_CASE("skip orders do nothing and bad limits are rejected") {
  OrderBook book(testkit::flat_book(0, 10, 0.1, 2, 5));
  const FillReport r = match_limit_order(book, LimitOrderAction::skip());
  CHECK(r.executed == 0.0);
  CHECK_FALSE(r.average_price);
  CHECK_THROWS_AS(match_limit_order(book, {0.0, 1.0}), std::invalid_argument);
}

TEST_CASE("forced liquidation flags exhausted depth and fills at the worst quote") {
  OrderBook book(testkit::flat_book(0, 10, 0.1, 2, 5));
  const FillReport r = forced_liquidation(book, 14, Direction::Sell);
  CHECK(r.liquidity_exhausted);
  CHECK(r.executed == 14);
  REQUIRE(r.fills.size() == 3);
  CHECK(r.fills[2].price == doctest::Approx(9.85));
  CHECK(r.fills[2].quantity == 4);
  OrderBook deep(testkit::flat_book(0, 10, 0.1, 3, 5));
  CHECK_FALSE(forced_liquidation(deep, 14, Direction::Buy).liquidity_exhausted);
}

TEST_CASE("low reward is minus commission and signed slippage") {
  FillReport f;
  f.add({10.0, 3.0});
  f.add({9.0, 1.0});
  const double notional = 39.0;
  CHECK(low_reward(f, Direction::Sell, 10.0, 0.01) == doctest::Approx(-(0.01 * notional - (notional - 40.0))));
  CHECK(low_reward(f, Direction::Buy, 10.0, 0.01) == doctest::Approx(-(0.01 * notional + (notional - 40.0))));
  CHECK(low_reward(FillReport{}, Direction::Buy, 10.0, 0.01) == 0.0);
}

TEST_CASE("resting remainder meets the next snapshot once, then expires") {
  // The first book bids at most 9.95, so a sell at 10.05 rests; the next book
  // holds a single bid of 3 at 10.15 which takes part of it.
  std::vector<LobSnapshot> stream;
  for (int i = 0; i < 4; ++i) stream.push_back(testkit::flat_book(i, 10.0, 0.1, 2, 5));
  stream[2] = testkit::flat_book(2, 10.2, 0.1, 1, 3);
  ExecutionEnv env(stream, 1, 2, 0.0);
  env.reset({"X", Direction::Sell, 10.0, 2, 10.0}, 1);
  const StepResult s1 = env.step({10.05, -10.0});
  CHECK(s1.fill.executed == 3.0);
  CHECK(*s1.fill.average_price == doctest::Approx(10.15));
  CHECK(env.private_state().remaining_quantity == 7.0);
  CHECK_FALSE(env.book().resting());
  const StepResult s2 = env.step(LimitOrderAction::skip());
  CHECK(s2.forced);
  CHECK(s2.done);
  CHECK(env.episode_fills().executed == 10.0);
  CHECK_THROWS_AS(env.step(LimitOrderAction::skip()), LifecycleError);
}

TEST_CASE("execution episodes always finish the task") {
  Rng rng(9);
  std::vector<LobSnapshot> stream;
  for (int i = 0; i < 40; ++i) stream.push_back(random_book(rng, i));
  ExecutionEnv env(stream, 2, 3, 0.002);
  for (int trial = 0; trial < 200; ++trial) {
    const Direction d = rng.uniform() < 0.5 ? Direction::Buy : Direction::Sell;
    const double q = std::round(100.0 * rng.uniform());
    const int window = 1 + static_cast<int>(rng.uniform_index(6));
    const int start = 2 + static_cast<int>(rng.uniform_index(30));
    env.reset({"X", d, q, window, 55.0}, start);
    int steps = 0;
    double sum = 0.0;
    while (!env.done()) {
      const double left = env.private_state().remaining_quantity;
      const double take = std::round(left * rng.uniform());
      const double price = env.book().best_same_side(d) + sign(d) * (rng.uniform() - 0.5) * 0.2;
      sum += env.step({price, sign(d) * take}).reward;
      ++steps;
    }
    CHECK(steps <= window);
    CHECK(env.episode_fills().executed == doctest::Approx(q));
    CHECK(env.cumulative_reward() == doctest::Approx(sum));
    // The portfolio's view of the same fills costs exactly minus the rewards.
    const TradingCostReport c = trading_cost({{1, d, env.episode_fills()}}, Eigen::Vector2d(1.0, 55.0), 0.002);
    CHECK(c.total == doctest::Approx(-env.cumulative_reward()).epsilon(1e-9));
  }
}

TEST_CASE("episodes need enough stream around the start") {
  std::vector<LobSnapshot> stream;
  for (int i = 0; i < 5; ++i) stream.push_back(testkit::flat_book(i, 10.0, 0.1, 2, 5));
  ExecutionEnv env(stream, 2, 2, 0.0);
  CHECK_THROWS_AS(env.reset({"X", Direction::Sell, 1.0, 2, 10.0}, 1), DataError);
  CHECK_THROWS_AS(env.reset({"X", Direction::Sell, 1.0, 3, 10.0}, 2), DataError);
  CHECK_NOTHROW(env.reset({"X", Direction::Sell, 1.0, 2, 10.0}, 2));
  CHECK_THROWS_AS(env.step({9.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(env.step({9.0, -2.0}), std::invalid_argument);
  env.reset({"X", Direction::Sell, 0.0, 2, 10.0}, 2);
  CHECK(env.done());
}

TEST_CASE("fill log lines are JSON with a null price when nothing traded") {
  CHECK(to_json_line({3, std::nullopt, 0.0, 0.0, false}) ==
        R"({"forced":false,"price":null,"quantity":0.0,"reward":0.0,"step":3})");
}
