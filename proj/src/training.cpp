#include "hrpm/training.hpp"

#include "hrpm/errors.hpp"
#include "hrpm/mlp_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace hrpm {

std::vector<std::string> MarketData::names() const {
  std::vector<std::string> out;
  for (const auto& b : bars) out.push_back(b.asset);
  return out;
}

void MarketData::validate() const {
  if (bars.empty()) throw DataError("market data holds no assets");
  if (books.size() != bars.size()) throw DataError("bar and book series count differ");
  if (steps_per_day < 2) throw DataError("steps per day must be >= 2");
  if (!(tick > 0.0)) throw DataError("tick size must be positive");
  for (std::size_t a = 0; a < bars.size(); ++a) {
    const BarSeries& s = bars[a];
    if (s.bars.empty()) throw DataError("empty bar series for " + s.asset);
    if (s.first_day() != first_day() || s.last_day() != last_day()) {
      throw DataError("bar series of " + s.asset + " covers different days");
    }
    const LobSeries& b = books[a];
    if (b.asset != s.asset) throw DataError("book series order does not match bars for " + s.asset);
    if (b.snapshots.empty()) throw DataError("empty book series for " + b.asset);
    const int first = b.snapshots.front().step;
    for (std::size_t i = 0; i < b.snapshots.size(); ++i) {
      if (b.snapshots[i].step != first + static_cast<int>(i)) throw DataError("book steps of " + b.asset + " not contiguous");
    }
    if (first > first_day() * steps_per_day ||
        b.snapshots.back().step < (last_day() + 1) * steps_per_day - 1) {
      throw DataError("book series of " + b.asset + " does not cover the bar days");
    }
  }
}

std::span<const LobSnapshot> MarketData::stream(int asset) const {
  return books.at(static_cast<std::size_t>(asset)).snapshots;
}

int MarketData::day_start_index(int asset, int day) const {
  return day * steps_per_day - books.at(static_cast<std::size_t>(asset)).snapshots.front().step;
}

Eigen::VectorXd MarketData::closes(int day) const {
  Eigen::VectorXd p(assets() + 1);
  p(0) = 1.0;
  for (int a = 0; a < assets(); ++a) p(a + 1) = bars[static_cast<std::size_t>(a)].at_day(day).close;
  return p;
}

MarketData from_synthetic(const SyntheticMarket& market, const SyntheticMarketConfig& config) {
  MarketData d{market.bars, market.books, config.steps_per_day, config.tick_size};
  d.validate();
  return d;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(jobs, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------

std::vector<double> quantity_lattice(double q_max, int levels) {
  if (!(q_max > 0.0) || levels < 1) throw ConfigError("quantity lattice needs q_max > 0 and levels >= 1");
  std::vector<double> q{0.0};
  for (int i = 1; i <= levels; ++i) q.push_back(i == levels ? q_max : q_max * i / levels);
  return q;
}

TaskIterator::TaskIterator(const PretrainConfig& config, std::uint64_t seed) : rng_(seed) {
  if (config.t_max < 1) throw ConfigError("t_max must be >= 1");
  if (config.episodes_per_cell < 1) throw ConfigError("episodes per cell must be >= 1");
  for (double q : quantity_lattice(config.q_max, config.quantity_levels)) {
    for (int w = 1; w <= config.t_max; ++w) {
      for (int e = 0; e < config.episodes_per_cell; ++e) cells_.push_back({q, w});
    }
  }
  order_.resize(cells_.size());
  reshuffle();
}

void TaskIterator::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[static_cast<std::size_t>(rng_.uniform_index(i))]);
  }
  pos_ = 0;
}

TaskCell TaskIterator::next() {
  if (pos_ == order_.size()) reshuffle();
  return cells_[order_[pos_++]];
}

// ---------------------------------------------------------------------------

std::string bank_label(const std::string& asset, Direction d) { return asset + "_" + to_string(d); }

void PolicyBank::put_learned(const std::string& asset, Direction d, std::shared_ptr<const BdqPolicy> policy) {
  policies_[{asset, d}] = {policy, policy};
}

void PolicyBank::put(const std::string& asset, Direction d, std::shared_ptr<const ExecutionPolicy> policy) {
  policies_[{asset, d}] = {std::move(policy), nullptr};
}

const ExecutionPolicy& PolicyBank::get(const std::string& asset, Direction d) const {
  const auto it = policies_.find({asset, d});
  if (it == policies_.end()) throw DataError("no banked policy for " + bank_label(asset, d));
  return *it->second.policy;
}

const BdqPolicy* PolicyBank::learned(const std::string& asset, Direction d) const {
  const auto it = policies_.find({asset, d});
  return it == policies_.end() ? nullptr : it->second.bdq.get();
}

bool PolicyBank::contains(const std::string& asset, Direction d) const { return policies_.contains({asset, d}); }

std::vector<std::string> PolicyBank::missing(const std::vector<std::string>& assets) const {
  std::vector<std::string> out;
  for (const auto& a : assets) {
    for (Direction d : {Direction::Buy, Direction::Sell}) {
      if (!contains(a, d)) out.push_back(bank_label(a, d));
    }
  }
  return out;
}

void PolicyBank::save(const std::filesystem::path& dir, int lob_window, int levels) const {
  std::filesystem::create_directories(dir);
  for (const auto& [key, entry] : policies_) {
    if (!entry.bdq) continue;
    save_bdq_policy(*entry.bdq, lob_window, levels, dir / (bank_label(key.first, key.second) + ".ckpt"));
  }
}

PolicyBank PolicyBank::load(const std::filesystem::path& dir, const std::vector<std::string>& assets) {
  PolicyBank bank;
  for (const auto& a : assets) {
    for (Direction d : {Direction::Buy, Direction::Sell}) {
      const auto path = dir / (bank_label(a, d) + ".ckpt");
      if (!std::filesystem::exists(path)) continue;
      bank.put_learned(a, d, std::make_shared<const BdqPolicy>(load_bdq_policy(path)));
    }
  }
  return bank;
}

PolicyBank PolicyBank::market_orders(const std::vector<std::string>& assets) {
  PolicyBank bank;
  auto policy = std::make_shared<const MarketOrderPolicy>();
  for (const auto& a : assets) {
    bank.put(a, Direction::Buy, policy);
    bank.put(a, Direction::Sell, policy);
  }
  return bank;
}

PlacedTask make_task(const MarketData& data, int asset, Direction d, double quantity, int window, int day) {
  PlacedTask p;
  p.task = {data.bars[static_cast<std::size_t>(asset)].asset, d, quantity, window,
            data.bars[static_cast<std::size_t>(asset)].at_day(day).close};
  p.start = data.day_start_index(asset, day);
  return p;
}

namespace {

struct PretrainJob {
  std::vector<int> assets;
  Direction direction;
  std::string label;
};

int pick_day(Rng& rng, int first, int last) {
  return first + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(last - first + 1)));
}

}  // namespace

PretrainResult pretrain_low(const PretrainConfig& config, const MarketData& data) {
  if (config.assets.empty()) throw ConfigError("pretraining needs at least one asset");
  if (config.t_max > data.steps_per_day - 1) throw ConfigError("t_max must stay inside one trading day");
  if (config.first_day * data.steps_per_day < config.lob_window) {
    throw ConfigError("first pretraining day leaves no room for the LOB window");
  }
  if (config.first_day > config.last_day || config.heldout_first_day > config.heldout_last_day ||
      config.last_day > data.last_day() || config.heldout_last_day > data.last_day()) {
    throw ConfigError("pretraining day ranges are empty or exceed the data");
  }
  config.grid.validate();

  std::vector<PretrainJob> jobs;
  for (Direction d : config.directions) {
    if (config.shared_policy) {
      jobs.push_back({config.assets, d, std::string("shared_") + to_string(d)});
    } else {
      for (int a : config.assets) jobs.push_back({{a}, d, bank_label(data.bars[static_cast<std::size_t>(a)].asset, d)});
    }
  }

  const LowNormalization norm{config.q_max, config.t_max};
  const std::vector<double> lattice = quantity_lattice(config.q_max, config.quantity_levels);
  std::vector<std::shared_ptr<const BdqPolicy>> policies(jobs.size());
  std::vector<PretrainStats> stats(jobs.size());

  parallel_for(static_cast<int>(jobs.size()), config.jobs, [&](int j) {
    const PretrainJob& job = jobs[static_cast<std::size_t>(j)];
    const std::uint64_t seed = derive_seed(config.seed, "pretrain/" + job.label);
    LowAgent agent(static_cast<int>(low_input_size(config.lob_window, config.levels)), config.grid, norm,
                   config.low, seed);
    TaskIterator tasks(config, derive_seed(seed, "tasks"));
    Rng days(derive_seed(seed, "days"));
    const long episodes = static_cast<long>(config.cycles) * static_cast<long>(tasks.cycle_length());
    PretrainStats& st = stats[static_cast<std::size_t>(j)];
    for (long e = 0; e < episodes; ++e) {
      const TaskCell cell = tasks.next();
      const int asset = job.assets[static_cast<std::size_t>(e) % job.assets.size()];
      const PlacedTask p = make_task(data, asset, job.direction, cell.quantity, cell.window,
                                     pick_day(days, config.first_day, config.last_day));
      ExecutionEnv env(data.stream(asset), config.lob_window, config.levels, config.commission);
      agent.train_episode(env, p.task, p.start, data.tick);
      ++st.episodes;
    }
    st.steps = agent.steps();
    auto policy = std::make_shared<const BdqPolicy>(agent.online(), config.grid, norm, data.tick);

    // Held-out comparison against one market order for the whole task.
    Rng held(derive_seed(config.seed, "heldout/" + job.label));
    const MarketOrderPolicy market;
    for (int e = 0; e < config.heldout_episodes; ++e) {
      const int asset = job.assets[static_cast<std::size_t>(e) % job.assets.size()];
      const double q = lattice[1 + static_cast<std::size_t>(held.uniform_index(lattice.size() - 1))];
      const PlacedTask p = make_task(data, asset, job.direction, q, config.t_max,
                                     pick_day(held, config.heldout_first_day, config.heldout_last_day));
      ExecutionEnv env(data.stream(asset), config.lob_window, config.levels, config.commission);
      st.heldout_policy_cost -= run_execution_episode(env, *policy, p.task, p.start).reward;
      st.heldout_market_cost -= run_execution_episode(env, market, p.task, p.start).reward;
    }
    if (config.heldout_episodes > 0) {
      st.heldout_policy_cost /= config.heldout_episodes;
      st.heldout_market_cost /= config.heldout_episodes;
    }
    st.asset = job.assets.size() == 1 ? data.bars[static_cast<std::size_t>(job.assets[0])].asset : "shared";
    st.direction = job.direction;
    st.flagged = st.heldout_policy_cost > st.heldout_market_cost;
    policies[static_cast<std::size_t>(j)] = policy;
  });

  PretrainResult result;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    if (stats[j].flagged) {
      spdlog::warn("{}: held-out cost {:.4f} above market-order baseline {:.4f}", jobs[j].label,
                   stats[j].heldout_policy_cost, stats[j].heldout_market_cost);
    }
    for (int a : jobs[j].assets) {
      result.bank.put_learned(data.bars[static_cast<std::size_t>(a)].asset, jobs[j].direction, policies[j]);
    }
  }
  result.stats = std::move(stats);
  return result;
}

// ---------------------------------------------------------------------------

const char* to_string(ExecutionMode m) { return m == ExecutionMode::Simulator ? "simulator" : "ideal"; }

Decision PolicyDecider::decide(const DecisionContext& ctx, Rng& rng) {
  HighState state{make_feature_window(ctx.data.bars, ctx.day, window_), ctx.weights};
  const Eigen::VectorXd input = high_input(state);
  const SampledAction s = sample_action(net_, input, kappa_, rng, greedy_);
  Decision d;
  d.weights = s.action.weights;
  d.step = HighStep{input, s.action, s.logits, s.log_density, 0.0, entropy(s.action)};
  return d;
}

int max_periods(const HierarchyConfig& config) {
  const int span = config.last_day - config.first_day + 1;
  return std::max(0, span / (config.holding_days + config.trading_days));
}

namespace {

void check(const HierarchyConfig& c, const MarketData& data) {
  if (c.holding_days < 1 || c.window < 1) throw ConfigError("holding period and window must be >= 1");
  if (c.trading_days != 1) throw ConfigError("trading periods must be exactly one day");
  if (!(c.initial_value > 0.0)) throw ConfigError("initial value must be positive");
  if (c.first_day - 1 < data.first_day() || c.last_day > data.last_day()) {
    throw DataError("episode days fall outside the data");
  }
  if (c.first_day + c.holding_days - c.window < data.first_day()) {
    throw DataError("not enough history for the first feature window");
  }
  if (c.mode == ExecutionMode::Simulator) {
    if (c.execution_window < 1 || c.execution_window > data.steps_per_day - 1) {
      throw ConfigError("execution window must fit inside one trading day");
    }
    if (c.lob_window > data.steps_per_day) throw ConfigError("LOB window longer than one day");
  }
}

/// Highest price a buy on `asset` could pay inside the execution window.
double buy_price_bound(const MarketData& data, int asset, int start, int window) {
  const auto stream = data.stream(asset);
  double worst = 0.0;
  for (int i = start; i <= start + window; ++i) {
    const auto& asks = stream[static_cast<std::size_t>(i)].asks;
    for (const auto& l : asks) worst = std::max(worst, l.price);
  }
  return worst;
}

}  // namespace

EpisodeResult run_hierarchical_episode(HighDecider& decider, const PolicyBank* bank, const MarketData& data,
                                       const HierarchyConfig& config, Rng& rng) {
  check(config, data);
  if (config.mode == ExecutionMode::Simulator && bank == nullptr) throw ConfigError("simulator execution needs a policy bank");
  const int m = data.assets();
  const double lambda = config.commission;
  const int h = config.holding_days;
  const int periods = config.horizon > 0 ? std::min(config.horizon, max_periods(config)) : max_periods(config);

  EpisodeResult out;
  PortfolioState state{Eigen::VectorXd::Unit(m + 1, 0), config.initial_value, data.closes(config.first_day - 1), 0};
  out.curve.push_back({config.first_day - 1, state.value});
  int day = config.first_day;

  for (int t = 0; t < periods; ++t) {
    const int trade_day = day + h;
    const Eigen::VectorXd holdings = state.holdings();
    for (int d = day; d < trade_day; ++d) out.curve.push_back({d, holdings.dot(data.closes(d))});

    const Eigen::VectorXd p_open = data.closes(trade_day - 1);
    const DriftResult drifted = drift(state, p_open);
    Decision decision = decider.decide({data, trade_day - 1, t, drifted.weights}, rng);
    if (!is_simplex(decision.weights, 1e-8)) throw NumericError("strategy produced weights off the simplex");

    const TargetOrderSet orders = target_quantities(drifted.value, drifted.weights, decision.weights, p_open);
    const Eigen::VectorXd p_next = data.closes(trade_day);

    PeriodRecord rec;
    rec.period = t;
    rec.first_day = day;
    rec.trade_day = trade_day;
    rec.value_before = state.value;
    rec.value_drift = drifted.value;
    rec.target = decision.weights;
    rec.low_steps.assign(static_cast<std::size_t>(m), 0);
    rec.high_actions = 1;

    std::vector<ExecutedOrder> executed;
    auto execute = [&](int i, Direction dir, double quantity) {
      ExecutedOrder order{i, dir, {}};
      if (config.mode == ExecutionMode::Ideal) {
        order.fill.add({p_open(i), quantity});
      } else {
        const int a = i - 1;
        if (quantity > config.q_max) {
          spdlog::debug("task of {} shares exceeds q_max {}; private state saturates", quantity, config.q_max);
        }
        const PlacedTask p = make_task(data, a, dir, quantity, config.execution_window, trade_day);
        ExecutionEnv env(data.stream(a), config.lob_window, config.levels, lambda);
        const EpisodeOutcome o = run_execution_episode(env, bank->get(p.task.asset, dir), p.task, p.start);
        order.fill = o.fills;
        rec.low_steps[static_cast<std::size_t>(a)] = o.steps;
        for (const FillEvent& e : env.fill_log()) out.fills.push_back(to_json_line(e));
      }
      executed.push_back(order);
      return order.fill;
    };

    double cash = state.holdings()(0);
    for (int i = 1; i <= m; ++i) {
      const double q = orders.quantities(i);
      if (q < -kQuantityEpsilon) {
        const FillReport f = execute(i, Direction::Sell, -q);
        cash += (1.0 - lambda) * f.notional();
      }
    }
    double bound = 0.0;
    for (int i = 1; i <= m; ++i) {
      const double q = orders.quantities(i);
      if (q <= kQuantityEpsilon) continue;
      const double price = config.mode == ExecutionMode::Ideal
                               ? p_open(i)
                               : buy_price_bound(data, i - 1, data.day_start_index(i - 1, trade_day),
                                                 config.execution_window);
      bound += q * price * (1.0 + lambda);
    }
    if (bound > cash) {
      rec.buy_scale = std::max(0.0, cash) / bound;
      spdlog::debug("period {}: buys scaled by {:.6f} to stay within cash", t, rec.buy_scale);
    }
    for (int i = 1; i <= m; ++i) {
      const double q = orders.quantities(i) * rec.buy_scale;
      if (q > kQuantityEpsilon) execute(i, Direction::Buy, q);
    }

    const SettleResult settled = settle(state, executed, p_next, lambda);
    rec.value_after = settled.next.value;
    rec.weights_after = settled.next.weights;
    rec.cost = settled.cost;
    out.ledger.push_back(ledger_json_line(t, state.value, settled));
    out.curve.push_back({trade_day, std::max(settled.next.value, config.bankruptcy_floor)});

    if (decision.step) {
      decision.step->reward = high_reward(state.value, settled.next.value) / config.initial_value;
      out.trajectory.push_back(std::move(*decision.step));
    }
    out.periods.push_back(std::move(rec));
    state = settled.next;
    if (settled.bankrupt) {
      out.bankrupt = true;
      break;
    }
    day = trade_day + 1;
  }
  return out;
}

Mlp init_high_net(int assets, int window, const std::vector<int>& hidden, std::uint64_t seed) {
  std::vector<int> sizes{static_cast<int>(high_input_size(assets, window))};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(assets + 1);
  Rng rng(seed);
  return Mlp::random(sizes, rng, 0.1);
}

TrainHighResult train_high(const TrainHighConfig& config, const PolicyBank& bank, const MarketData& data) {
  const HighTrainConfig& hc = config.high;
  if (hc.batch < 1 || hc.episodes < 1) throw ConfigError("episodes and batch must be >= 1");
  if (!(hc.kappa > 0.0) || hc.eta < 0.0 || !(hc.gamma > 0.0 && hc.gamma <= 1.0)) {
    throw ConfigError("need kappa > 0, eta >= 0 and gamma in (0, 1]");
  }
  const HierarchyConfig& base = config.hierarchy;
  const PolicyBank* bank_ptr = base.mode == ExecutionMode::Simulator ? &bank : nullptr;
  if (bank_ptr) {
    const auto missing = bank.missing(data.names());
    if (!missing.empty()) throw DataError("policy bank incomplete");
  }

  TrainHighResult result;
  Mlp net = init_high_net(data.assets(), base.window, config.hidden, derive_seed(config.seed, "high/init"));
  Adam optimizer(net, {hc.learning_rate});

  HierarchyConfig validation = base;
  validation.horizon = 0;
  if (config.validation_last_day > config.validation_first_day) {
    validation.first_day = config.validation_first_day;
    validation.last_day = config.validation_last_day;
  }
  auto validate = [&](const Mlp& policy) {
    PolicyDecider decider(policy, hc.kappa, base.window, true);
    Rng rng(derive_seed(config.seed, "high/validation"));
    const EpisodeResult r = run_hierarchical_episode(decider, bank_ptr, data, validation, rng);
    return r.curve.back().value / base.initial_value - 1.0;
  };

  result.best = net.frozen();
  result.best_validation = validate(net);
  const int updates = (hc.episodes + hc.batch - 1) / hc.batch;
  const int slack = std::max(0, (base.last_day - base.first_day + 1) -
                                    std::max(1, base.horizon > 0 ? base.horizon : max_periods(base)) *
                                        (base.holding_days + base.trading_days));
  for (int u = 0; u < updates; ++u) {
    std::vector<HighTrajectory> batch(static_cast<std::size_t>(hc.batch));
    parallel_for(hc.batch, config.jobs, [&](int b) {
      const int episode = u * hc.batch + b;
      Rng rng(derive_seed(config.seed, "high/episode/" + std::to_string(episode)));
      HierarchyConfig hcfg = base;
      hcfg.first_day += static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(std::min(slack, base.holding_days) + 1)));
      PolicyDecider decider(net, hc.kappa, base.window, false);
      batch[static_cast<std::size_t>(b)] = run_hierarchical_episode(decider, bank_ptr, data, hcfg, rng).trajectory;
    });
    const UpdateStats stats = reinforce_update(net, optimizer, batch, hc);
    if (!std::isfinite(stats.mean_return) || !net.all_finite()) {
      throw DivergenceError("high-level training diverged at update " + std::to_string(u));
    }
    TrainingCurvePoint point{u, stats.mean_return, stats.mean_entropy, std::nullopt};
    if ((u + 1) % std::max(1, config.validate_every) == 0 || u + 1 == updates) {
      const double v = validate(net);
      point.validation_return = v;
      if (v > result.best_validation) {
        result.best_validation = v;
        result.best = net.frozen();
      }
    }
    result.curve.push_back(point);
  }
  result.last = net.frozen();
  return result;
}

}  // namespace hrpm
