// Acceptance run: one PASS/FAIL line per criterion. Exit status is 0 only when
// every selected criterion passes inside its time limit.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>

#include "hrpm/evaluation.hpp"
#include "hrpm/pipeline.hpp"
#include "hrpm/simplex.hpp"
#include "oracles.hpp"

using namespace hrpm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Eigen::VectorXd random_simplex(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = -std::log(1.0 - rng.uniform());
  return w / w.sum();
}

Eigen::VectorXd random_prices(Rng& rng, Eigen::Index n) {
  Eigen::VectorXd p(n);
  p(0) = 1.0;
  for (Eigen::Index i = 1; i < n; ++i) p(i) = 5.0 + 100.0 * rng.uniform();
  return p;
}

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

double relative(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------

Outcome accounting_identity() {
  Rng rng(101);
  double worst_compact = 0.0;
  double worst_ledger = 0.0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform_index(6));
    const PortfolioState prior{random_simplex(rng, n), 1e3 + 1e6 * rng.uniform(), random_prices(rng, n), 0};
    const Eigen::VectorXd trade_prices = random_prices(rng, n);
    const Eigen::VectorXd next_prices = random_prices(rng, n);
    const double lambda = 0.005 * rng.uniform();
    const DriftResult drifted = drift(prior, trade_prices);
    const TargetOrderSet target = target_quantities(drifted.value, drifted.weights, random_simplex(rng, n), trade_prices);

    std::vector<ExecutedOrder> orders;
    std::vector<oracle::Trade> trades;
    double cash = prior.value * prior.weights(0);
    for (Eigen::Index i = 1; i < n; ++i) {
      if (target.quantities(i) >= 0.0) continue;
      const double q = -target.quantities(i) * rng.uniform();
      const double price = trade_prices(i) * (1.0 - 0.01 * rng.uniform());
      ExecutedOrder o{static_cast<int>(i), Direction::Sell, {}};
      o.fill.add({price, q});
      orders.push_back(o);
      trades.push_back({static_cast<int>(i), false, {{price, q}}});
      cash += price * q * (1.0 - lambda);
    }
    for (Eigen::Index i = 1; i < n; ++i) {
      if (target.quantities(i) <= 0.0) continue;
      const double price = trade_prices(i) * (1.0 + 0.01 * rng.uniform());
      const double q = std::min(target.quantities(i), 0.5 * cash / (price * (1.0 + lambda)));
      if (q <= 0.0) continue;
      ExecutedOrder o{static_cast<int>(i), Direction::Buy, {}};
      o.fill.add({price, 0.5 * q});
      o.fill.add({price * 1.001, 0.5 * q});
      orders.push_back(o);
      trades.push_back({static_cast<int>(i), true, {{price, 0.5 * q}, {price * 1.001, 0.5 * q}}});
      cash -= o.fill.notional() * (1.0 + lambda);
    }
    const SettleResult s = settle(prior, orders, next_prices, lambda);
    const oracle::LedgerResult l =
        oracle::cash_ledger(prior.weights, prior.value, prior.prices, trades, next_prices, lambda);
    worst_compact = std::max(worst_compact, relative(s.compact_value, s.next.value));
    worst_ledger = std::max(worst_ledger, relative(s.next.value, l.value));
  }
  int drift_mismatches = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform_index(6));
    const PortfolioState prior{random_simplex(rng, n), 1e3 + 1e6 * rng.uniform(), random_prices(rng, n), 0};
    const Eigen::VectorXd p = random_prices(rng, n);
    const DriftResult d = drift(prior, p);
    const SettleResult s = settle(prior, {}, p, 0.002);
    if (s.next.value != d.value || s.next.weights != d.weights) ++drift_mismatches;
  }
  return {worst_compact <= 1e-9 && worst_ledger <= 1e-9 && drift_mismatches == 0,
          fmt::format("compact vs decomposition {:.1e}, vs cash ledger {:.1e}, drift mismatches {}", worst_compact,
                      worst_ledger, drift_mismatches)};
}

Outcome cost_duality() {
  Rng rng(202);
  std::vector<LobSnapshot> stream;
  for (int i = 0; i < 60; ++i) stream.push_back(random_book(rng, i));
  ExecutionEnv env(stream, 2, 3, 0.002);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Direction d = rng.uniform() < 0.5 ? Direction::Buy : Direction::Sell;
    const double q = std::round(1.0 + 150.0 * rng.uniform());
    const int window = 1 + static_cast<int>(rng.uniform_index(8));
    const int start = 2 + static_cast<int>(rng.uniform_index(48));
    const double reference = 50.0 + 10.0 * rng.uniform();
    env.reset({"X", d, q, window, reference}, start);
    double rewards = 0.0;
    while (!env.done()) {
      const double take = std::round(env.private_state().remaining_quantity * rng.uniform());
      const double price = env.book().best_same_side(d) + sign(d) * (rng.uniform() - 0.5) * 0.2;
      rewards += env.step({price, sign(d) * take, rng.uniform() < 0.1}).reward;
    }
    const TradingCostReport c =
        trading_cost({{1, d, env.episode_fills()}}, Eigen::Vector2d(1.0, reference), env.commission_rate());
    worst = std::max(worst, relative(c.total, -rewards));
  }
  return {worst <= 1e-9, fmt::format("max relative gap {:.1e} over 1000 episodes", worst)};
}

Outcome matching_oracle() {
  Rng rng(303);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const LobSnapshot snap = random_book(rng, 0);
    const bool buy = rng.uniform() < 0.5;
    const auto& opposite = buy ? snap.asks : snap.bids;
    const double limit = opposite[rng.uniform_index(opposite.size())].price + (rng.uniform() - 0.5) * 0.02;
    const double q = std::round(1.0 + 60.0 * rng.uniform());
    OrderBook book(snap);
    const FillReport r = match_limit_order(book, {limit, buy ? q : -q});
    const oracle::Match m = oracle::brute_force_match(opposite, buy, limit, q);
    bool same = r.fills.size() == m.fills.size() && r.executed == m.executed;
    for (std::size_t i = 0; same && i < m.fills.size(); ++i) {
      same = r.fills[i].price == m.fills[i].price && r.fills[i].quantity == m.fills[i].quantity;
    }
    if (same && m.executed > 0.0) same = r.average_price && *r.average_price == m.notional / m.executed;
    const double rest = book.resting() ? std::abs(book.resting()->quantity) : 0.0;
    if (same) same = rest == m.remainder;
    if (!same) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} of 500 books differ", mismatches)};
}

Outcome dueling_aggregation() {
  Rng rng(404);
  double worst_mean = 0.0;
  double worst_shift = 0.0;
  int argmax_changes = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    ActionGrid grid;
    grid.price_offsets.clear();
    for (std::uint64_t i = 0, n = 1 + rng.uniform_index(7); i < n; ++i) grid.price_offsets.push_back(static_cast<int>(i) - 3);
    grid.proportions.clear();
    for (std::uint64_t i = 0, n = 2 + rng.uniform_index(5); i < n; ++i) {
      grid.proportions.push_back(static_cast<double>(i) / static_cast<double>(n - 1));
    }
    const int inputs = 1 + static_cast<int>(rng.uniform_index(12));
    BranchingQNet q = BranchingQNet::random(inputs, {1 + static_cast<int>(rng.uniform_index(16))}, grid, rng);
    Eigen::VectorXd x(inputs);
    for (int i = 0; i < inputs; ++i) x(i) = rng.normal();
    const QValues a = q.q_values(x);
    worst_mean = std::max({worst_mean, std::abs((a.q_p.array() - a.value).mean()),
                           std::abs((a.q_q.array() - a.value).mean())});
    q.net().layers().back().bias.segment(1, grid.n_p()).array() += 10.0 * rng.normal();
    q.net().layers().back().bias.segment(1 + grid.n_p(), grid.n_q()).array() += 10.0 * rng.normal();
    const QValues b = q.q_values(x);
    worst_shift = std::max({worst_shift, (a.q_p - b.q_p).cwiseAbs().maxCoeff(), (a.q_q - b.q_q).cwiseAbs().maxCoeff()});
    if (argmax_lowest(a.q_p) != argmax_lowest(b.q_p) || argmax_lowest(a.q_q) != argmax_lowest(b.q_q)) ++argmax_changes;
  }
  return {worst_mean < 1e-12 && worst_shift < 1e-12 && argmax_changes == 0,
          fmt::format("max |mean(Q - V)| {:.1e}, max Q change under shift {:.1e}, argmax changes {}", worst_mean,
                      worst_shift, argmax_changes)};
}

Outcome gradient_verification() {
  Rng rng(505);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> sizes{1 + static_cast<int>(rng.uniform_index(8))};
    const int layers = 1 + static_cast<int>(rng.uniform_index(3));
    for (int l = 0; l < layers; ++l) sizes.push_back(1 + static_cast<int>(rng.uniform_index(32)));
    Mlp net = Mlp::random(sizes, rng);
    for (auto& layer : net.layers()) {
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.1 * rng.normal();
    }
    Eigen::MatrixXd x(sizes.front(), 1 + static_cast<Eigen::Index>(rng.uniform_index(4)));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    worst = std::max(worst, grad_check(net, x));
  }
  return {worst < 1e-6, fmt::format("max relative error {:.1e} over 100 nets", worst)};
}

Outcome bdq_toy() {
  // Constant book: bids 9.9 down to 9.5 with 300 shares each. Selling 900 over three
  // steps at the best bid beats walking the book at once.
  std::vector<LobSnapshot> stream;
  for (int s = 0; s < 8; ++s) {
    LobSnapshot snap;
    snap.step = s;
    for (int l = 0; l < 5; ++l) {
      snap.bids.push_back({9.9 - 0.1 * l, 300.0});
      snap.asks.push_back({10.0 + 0.1 * l, 300.0});
    }
    stream.push_back(snap);
  }
  ActionGrid grid;
  grid.price_offsets = {-2, -1, 0};
  grid.proportions = {0.0, 1.0 / 3.0, 0.5, 1.0};
  const ExecutionTask task{"toy", Direction::Sell, 900.0, 3, 10.0};
  const double tick = 0.1;
  const LowNormalization norm{900.0, 3};
  ExecutionEnv env(stream, 1, 5, 0.002);

  // The environment is deterministic, so the best open-loop sequence is optimal.
  double optimum = -std::numeric_limits<double>::infinity();
  std::vector<ActionIndex> seq;
  std::function<void()> search = [&] {
    LowState st = env.reset(task, 1);
    for (const auto& a : seq) {
      if (env.done()) break;
      st = env.step(to_limit_order(a, st.own, env.book(), grid, tick)).state;
    }
    if (env.done()) {
      optimum = std::max(optimum, env.cumulative_reward());
      return;
    }
    for (int p = 0; p < grid.n_p(); ++p) {
      for (int q = 0; q < grid.n_q(); ++q) {
        seq.push_back({p, q});
        search();
        seq.pop_back();
      }
    }
  };
  search();

  const long budget = 20000;
  int good = 0;
  std::vector<std::string> rewards;
  for (int seed = 0; seed < 10; ++seed) {
    LowTrainConfig cfg;
    cfg.hidden = {32, 32};
    cfg.epsilon_decay_steps = budget / 2;
    cfg.target_sync = 200;
    LowAgent agent(static_cast<int>(low_input_size(1, 5)), grid, norm, cfg, static_cast<std::uint64_t>(seed));
    while (agent.steps() < budget) agent.train_episode(env, task, 1, tick);
    const BdqPolicy policy(agent.online(), grid, norm, tick);
    const double r = run_execution_episode(env, policy, task, 1).reward;
    if (std::abs(r - optimum) <= 0.01 * std::abs(optimum)) ++good;
    rewards.push_back(fmt::format("{:.2f}", r));
  }
  return {good >= 8, fmt::format("optimum {:.2f}, {}/10 seeds within 1% after {} steps (greedy rewards {})", optimum,
                                 good, budget, fmt::join(rewards, " "))};
}

Outcome execution_improvement() {
  int good = 0;
  std::vector<std::string> pairs;
  for (int seed = 0; seed < 10; ++seed) {
    SyntheticMarketConfig m;
    m.assets = 1;
    m.days = 60;
    m.steps_per_day = 16;
    m.seed = 100 + static_cast<std::uint64_t>(seed);
    m.volatility = {0.0005};
    m.base_volume = 100.0;
    m.validate();
    const MarketData data = from_synthetic(gen_synthetic_market(m), m);
    PretrainConfig c;
    c.assets = {0};
    c.q_max = 1000.0;
    c.t_max = 8;
    c.quantity_levels = 4;
    c.cycles = 120;
    c.first_day = 1;
    c.last_day = 39;
    c.heldout_first_day = 40;
    c.heldout_last_day = 58;
    c.heldout_episodes = 50;
    c.lob_window = 4;
    c.levels = 5;
    c.low.hidden = {64, 64};
    c.low.epsilon_decay_steps = 120L * 36 * 4;
    c.low.target_sync = 200;
    c.seed = static_cast<std::uint64_t>(seed);
    const PretrainResult r = pretrain_low(c, data);
    double policy = 0.0;
    double market = 0.0;
    for (const auto& s : r.stats) {
      policy += s.heldout_policy_cost;
      market += s.heldout_market_cost;
    }
    if (policy <= market) ++good;
    pairs.push_back(fmt::format("{:.1f}/{:.1f}", policy / 2.0, market / 2.0));
  }
  return {good >= 8, fmt::format("{}/10 seeds at or below market orders (policy/market mean cost {})", good,
                                 fmt::join(pairs, " "))};
}

Outcome entropy_bonus() {
  SyntheticMarketConfig m;
  m.assets = 3;
  m.days = 120;
  m.steps_per_day = 4;
  m.seed = 11;
  m.drift = {0.01, 0.0, -0.002};
  m.volatility = {0.01};
  m.validate();
  const MarketData data = from_synthetic(gen_synthetic_market(m), m);
  const std::vector<double> etas{0.0, 0.01, 0.05, 0.1};
  std::vector<double> mean_entropy;
  std::vector<double> mean_dominant;
  for (double eta : etas) {
    double h_sum = 0.0;
    double w_sum = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
      TrainHighConfig c;
      c.hierarchy.holding_days = 3;
      c.hierarchy.window = 5;
      c.hierarchy.first_day = 5;
      c.hierarchy.last_day = 79;
      c.hierarchy.horizon = 8;
      c.hierarchy.mode = ExecutionMode::Ideal;
      c.hidden = {16};
      c.high.eta = eta;
      c.high.episodes = 1000;
      c.high.batch = 8;
      c.high.learning_rate = 3e-3;
      c.validate_every = 1 << 30;
      c.seed = static_cast<std::uint64_t>(seed);
      const TrainHighResult r = train_high(c, PolicyBank{}, data);
      HierarchyConfig test = c.hierarchy;
      test.first_day = 80;
      test.last_day = 119;
      test.horizon = 0;
      PolicyDecider greedy(r.last, c.high.kappa, test.window, true);
      Rng rng(1);
      const EpisodeResult e = run_hierarchical_episode(greedy, nullptr, data, test, rng);
      double h = 0.0;
      double w = 0.0;
      for (const auto& p : e.periods) {
        h += entropy(HighAction{p.target, p.target.array().log().matrix()});
        w += p.target(1);
      }
      h_sum += h / static_cast<double>(e.periods.size());
      w_sum += w / static_cast<double>(e.periods.size());
    }
    mean_entropy.push_back(h_sum / 10.0);
    mean_dominant.push_back(w_sum / 10.0);
  }
  const bool monotone = std::is_sorted(mean_entropy.begin(), mean_entropy.end());
  return {monotone && mean_dominant.front() > 0.9,
          fmt::format("mean entropy {:.4f} for eta {}; dominant weight {:.4f} at eta 0",
                      fmt::join(mean_entropy, " / "), fmt::join(etas, "/"), mean_dominant.front())};
}

Outcome bandit() {
  const Eigen::Vector2d relatives(1.05, 0.98);
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(1);
  int good = 0;
  std::vector<int> needed;
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    Mlp net({1, 2});
    HighTrainConfig cfg;
    cfg.gamma = 1.0;
    cfg.kappa = 50.0;
    cfg.batch = 8;
    cfg.learning_rate = 0.05;
    Adam optimizer(net, {cfg.learning_rate});
    int episodes = 0;
    bool reached = false;
    while (episodes < 2000 && !reached) {
      std::vector<HighTrajectory> batch;
      for (int b = 0; b < cfg.batch; ++b, ++episodes) {
        const SampledAction s = sample_action(net, x, cfg.kappa, rng);
        const double reward = s.action.weights.dot(relatives) - 1.0;
        batch.push_back({HighStep{x, s.action, s.logits, s.log_density, reward, entropy(s.action)}});
      }
      reinforce_update(net, optimizer, batch, cfg);
      reached = policy_mean(net, x)(0) > 0.95;
    }
    if (reached) ++good;
    needed.push_back(reached ? episodes : -1);
  }
  return {good >= 9, fmt::format("{}/10 seeds above 0.95 (episodes needed {})", good, fmt::join(needed, " "))};
}

Outcome metrics_oracle() {
  const std::vector<std::vector<double>> curves{{100, 120, 60, 130},
                                                {100, 101, 99, 102, 104, 103},
                                                {50, 49, 48, 47.5, 47},
                                                {1e6, 1.01e6, 1.03e6, 0.99e6, 1.05e6},
                                                {10, 11, 10.5, 12, 11.8, 12.5, 12.1}};
  double worst = 0.0;
  for (const auto& v : curves) {
    EquityCurve c;
    std::vector<int> days;
    for (std::size_t i = 0; i < v.size(); ++i) {
      days.push_back(static_cast<int>(3 * i + 1));
      c.points.push_back({days.back(), v[i]});
    }
    const MetricsReport m = compute_metrics(c);
    if (!m.asr || !m.ddr) return {false, "ASR or DDR missing on a curve with both defined"};
    worst = std::max({worst, relative(m.arr, oracle::arr(days, v)), std::abs(m.mdd - oracle::mdd(v)),
                      relative(*m.asr, oracle::asr(days, v)), relative(*m.ddr, oracle::ddr(days, v))});
  }
  EquityCurve hand;
  hand.points = {{0, 100}, {1, 120}, {2, 60}, {3, 130}};
  const double m = mdd(hand);
  return {worst <= 1e-12 && m == 0.5, fmt::format("max discrepancy {:.1e} over 5 curves, MDD(100,120,60,130) = {}", worst, m)};
}

Outcome baseline_oracle() {
  const std::vector<std::vector<double>> closes{
      {10.00, 20.00}, {10.20, 19.80}, {10.10, 20.30}, {10.40, 20.10}, {10.30, 19.70}, {10.60, 19.90},
      {10.90, 20.40}, {10.70, 20.80}, {10.50, 21.10}, {10.80, 20.70}, {11.10, 20.50}, {11.00, 20.90},
      {10.70, 21.40}, {10.90, 21.20}, {11.30, 20.80}, {11.60, 20.60}, {11.40, 21.00}, {11.20, 21.50},
      {11.50, 21.30}, {11.80, 21.00}, {12.00, 20.70}, {11.70, 21.10}, {11.90, 21.60}, {12.20, 21.40}};
  const MarketData data = testkit::bars_market(closes);
  HierarchyConfig h;
  h.holding_days = 3;
  h.window = 1;
  h.first_day = 1;
  h.last_day = static_cast<int>(closes.size()) - 1;
  h.mode = ExecutionMode::Ideal;
  BaselineParams params;
  params.lookback = 3;
  double worst_ideal = 0.0;
  std::size_t periods = 0;
  for (auto [kind, rule] : {std::pair{BaselineKind::UCRP, oracle::Rule::UCRP},
                            std::pair{BaselineKind::Winner, oracle::Rule::Winner}}) {
    BaselineDecider decider(kind, params);
    const BacktestResult r = run_backtest(to_string(kind), decider, nullptr, data, h, 1);
    const auto expect = oracle::ideal_run(closes, rule, h.holding_days, h.first_day,
                                          static_cast<int>(r.episode.periods.size()), h.initial_value, h.commission,
                                          params.lookback);
    if (expect.size() < 4) return {false, "too few periods"};
    periods = expect.size();
    for (std::size_t t = 0; t < expect.size(); ++t) {
      worst_ideal = std::max(worst_ideal, relative(r.episode.periods[t].value_after, expect[t]));
    }
  }

  Rng rng(606);
  std::vector<Eigen::VectorXd> history;
  Eigen::Vector4d p(1.0, 10.0, 20.0, 5.0);
  for (int d = 0; d < 20; ++d) {
    history.push_back(p);
    for (int i = 1; i < 4; ++i) p(i) *= std::exp(0.05 * rng.normal());
  }
  const BaselineParams bp;
  Eigen::VectorXd olmar = Eigen::Vector4d::Constant(0.25);
  Eigen::VectorXd wmamr = olmar;
  Eigen::VectorXd olmar_ref = olmar;
  Eigen::VectorXd wmamr_ref = olmar;
  double worst_online = 0.0;
  for (int d = 1; d <= 20; ++d) {
    const std::vector<Eigen::VectorXd> seen(history.begin(), history.begin() + d);
    olmar = baseline_weights(BaselineKind::OLMAR, bp, seen, olmar);
    wmamr = baseline_weights(BaselineKind::WMAMR, bp, seen, wmamr);
    olmar_ref = oracle::olmar_step(olmar_ref, seen, bp.olmar_window, bp.olmar_epsilon);
    wmamr_ref = oracle::wmamr_step(wmamr_ref, seen, bp.wmamr_window, bp.wmamr_epsilon);
    worst_online = std::max({worst_online, (olmar - olmar_ref).cwiseAbs().maxCoeff(),
                             (wmamr - wmamr_ref).cwiseAbs().maxCoeff()});
  }
  return {worst_ideal <= 1e-10 && worst_online <= 1e-8,
          fmt::format("UCRP/Winner max relative gap {:.1e} over {} periods, OLMAR/WMAMR max weight gap {:.1e}",
                      worst_ideal, periods, worst_online)};
}

Outcome commission_not_enough() {
  std::vector<double> slippage;
  std::vector<double> commission;
  for (int seed = 0; seed < 5; ++seed) {
    SyntheticMarketConfig m;
    m.assets = 4;
    m.days = 120;
    m.steps_per_day = 16;
    m.seed = 30 + static_cast<std::uint64_t>(seed);
    m.validate();
    const MarketData data = from_synthetic(gen_synthetic_market(m), m);
    const PolicyBank bank = PolicyBank::market_orders(data.names());
    BaselineDecider ucrp(BaselineKind::UCRP, {});
    HierarchyConfig h;
    h.holding_days = 5;
    h.window = 5;
    h.lob_window = 4;
    h.execution_window = 15;
    h.first_day = 5;
    h.last_day = 119;
    h.mode = ExecutionMode::Simulator;
    const BacktestResult r = run_backtest("UCRP", ucrp, &bank, data, h, 1);
    for (const auto& p : r.episode.periods) {
      if (p.cost.commission == 0.0) continue;
      slippage.push_back(std::abs(p.cost.slippage));
      commission.push_back(p.cost.commission);
    }
  }
  const double s = median(slippage);
  const double c = median(commission);
  return {s > c, fmt::format("median |slippage| {:.2f} vs median commission {:.2f} over {} trading periods", s, c,
                             slippage.size())};
}

std::string report_hash(const std::filesystem::path& run) {
  std::set<std::filesystem::path> files{run / "comparison.json"};
  for (const auto& e : std::filesystem::directory_iterator(run / "reports")) files.insert(e.path());
  std::uint64_t h = fnv1a64("");
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    const std::string body{std::istreambuf_iterator<char>(in), {}};
    h = fnv1a64(f.filename().string() + "\n" + body, h);
  }
  return fmt::format("{:016x}", h);
}

Outcome pipeline_determinism() {
  const std::string cfg =
      "seed = 42\n"
      "assets = 3\n"
      "days = 120\n"
      "steps_per_day = 16\n"
      "drift = 0.0005\n"
      "volatility = 0.01\n"
      "base_volume = 500\n"
      "low.cycles = 2\n"
      "low.hidden = 32, 32\n"
      "low.heldout_episodes = 10\n"
      "high.episodes = 32\n"
      "high.hidden = 32, 32\n";
  auto run = [&](const std::string& name, int jobs) {
    const auto dir = std::filesystem::temp_directory_path() / ("hrpm_acceptance_" + name);
    std::filesystem::remove_all(dir);
    KeyValueFile kv = KeyValueFile::parse(cfg);
    kv.set("output_dir", dir.string());
    const RunConfig c = RunConfig::read(kv);
    const RunPaths paths(dir);
    open_run(c, paths);
    cmd_gen_data(c, paths);
    cmd_pretrain(c, paths, jobs);
    cmd_train(c, paths, jobs);
    cmd_backtest(c, paths, "all");
    cmd_report(dir);
    return report_hash(dir);
  };
  const std::string a = run("a", 1);
  const std::string b = run("b", 2);
  return {a == b, fmt::format("report hashes {} and {} (1 and 2 worker threads)", a, b)};
}

struct Criterion {
  int id;
  double limit_seconds;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> only;
  app.add_option("criteria", only, "criterion numbers to run (default all)");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::err);

  const std::vector<Criterion> all{{1, 10, accounting_identity},     {2, 30, cost_duality},
                                   {3, 10, matching_oracle},         {4, 10, dueling_aggregation},
                                   {5, 60, gradient_verification},   {6, 300, bdq_toy},
                                   {7, 600, execution_improvement},  {8, 900, entropy_bonus},
                                   {9, 120, bandit},                 {10, 1, metrics_oracle},
                                   {11, 5, baseline_oracle},         {12, 300, commission_not_enough},
                                   {13, 1800, pipeline_determinism}};
  int failures = 0;
  for (const auto& c : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = seconds < c.limit_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::cout << fmt::format("criterion {:>2}: {}  {} [{:.2f} s, limit {} s{}]", c.id, pass ? "PASS" : "FAIL", o.detail,
                             seconds, c.limit_seconds, in_time ? "" : ", over time")
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
