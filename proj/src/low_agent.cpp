#include "hrpm/low_agent.hpp"

#include "hrpm/errors.hpp"
#include "hrpm/mlp_io.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace hrpm {

void ActionGrid::validate() const {
  if (price_offsets.empty()) throw std::invalid_argument("action grid needs at least one price offset");
  if (proportions.size() < 2) throw std::invalid_argument("action grid needs at least two proportions");
  bool zero = false;
  bool one = false;
  for (double p : proportions) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantity proportions must lie in [0, 1]");
    zero = zero || p == 0.0;
    one = one || p == 1.0;
  }
  if (!zero || !one) throw std::invalid_argument("quantity proportions must include 0 and 1");
}

Eigen::VectorXd low_input(const LowState& state, const LowNormalization& norm) {
  const Eigen::Index n = state.market.values.size();
  Eigen::VectorXd x(n + 2);
  x.head(n) = state.market.values;
  x(n) = std::min(1.0, state.own.remaining_time / static_cast<double>(norm.t_max));
  x(n + 1) = std::min(1.0, state.own.remaining_quantity / norm.q_max);
  return x;
}

// ---------------------------------------------------------------------------

BranchingQNet::BranchingQNet(int inputs, const std::vector<int>& hidden, const ActionGrid& grid)
    : n_p_(grid.n_p()), n_q_(grid.n_q()) {
  std::vector<int> sizes{inputs};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1 + n_p_ + n_q_);
  net_ = Mlp(sizes);
}

BranchingQNet::BranchingQNet(Mlp net, int n_p, int n_q) : net_(std::move(net)), n_p_(n_p), n_q_(n_q) {
  if (net_.output_size() != 1 + n_p + n_q) throw ShapeError("Q-net output size does not match the action grid");
}

BranchingQNet BranchingQNet::random(int inputs, const std::vector<int>& hidden, const ActionGrid& grid,
                                    Rng& rng) {
  std::vector<int> sizes{inputs};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1 + grid.n_p() + grid.n_q());
  return BranchingQNet(Mlp::random(sizes, rng, 0.1), grid.n_p(), grid.n_q());
}

QValues BranchingQNet::q_values(const Eigen::VectorXd& input) const {
  const Eigen::VectorXd raw = net_.forward(input);
  if (!raw.allFinite()) throw NumericError("Q-net output is not finite");
  QValues q;
  q.value = raw(0);
  q.adv_p = raw.segment(1, n_p_);
  q.adv_q = raw.segment(1 + n_p_, n_q_);
  q.q_p = branch_q(raw, 1, n_p_);
  q.q_q = branch_q(raw, 1 + n_p_, n_q_);
  return q;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> BranchingQNet::q_batch(const Eigen::MatrixXd& inputs) const {
  const Eigen::MatrixXd raw = net_.forward(inputs);
  if (!raw.allFinite()) throw NumericError("Q-net output is not finite");
  return {branch_q(raw, 1, n_p_), branch_q(raw, 1 + n_p_, n_q_)};
}

int argmax_lowest(const Eigen::VectorXd& q) {
  int best = 0;
  for (int i = 1; i < q.size(); ++i) {
    if (q(i) > q(best)) best = i;
  }
  return best;
}

ActionIndex select_action(const QValues& q, double epsilon, Rng& rng) {
  auto pick = [&](const Eigen::VectorXd& branch) {
    if (epsilon > 0.0 && rng.uniform() < epsilon) {
      return static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(branch.size())));
    }
    return argmax_lowest(branch);
  };
  ActionIndex a;
  a.price = pick(q.q_p);
  a.quantity = pick(q.q_q);
  return a;
}

LimitOrderAction to_limit_order(const ActionIndex& a, const ExecutionPrivateState& own,
                                const OrderBook& book, const ActionGrid& grid, double tick) {
  const double proportion = grid.proportions.at(static_cast<std::size_t>(a.quantity));
  const double quantity = proportion == 1.0 ? own.remaining_quantity : proportion * own.remaining_quantity;
  if (quantity <= 0.0) return LimitOrderAction::skip();
  const int offset = grid.price_offsets.at(static_cast<std::size_t>(a.price));
  double price = own.direction == Direction::Sell ? book.best_same_side(Direction::Sell) + offset * tick
                                                  : book.best_same_side(Direction::Buy) - offset * tick;
  if (price < tick) {
    spdlog::debug("limit price {} clamped to one tick", price);
    price = tick;
  }
  return {price, sign(own.direction) * quantity, false};
}

// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, Rng& rng) const {
  if (n > items_.size()) throw std::invalid_argument("sample larger than the replay buffer");
  // Floyd's algorithm: n distinct indices, each subset equally likely.
  std::vector<std::size_t> out;
  std::unordered_set<std::size_t> seen;
  const std::size_t size = items_.size();
  for (std::size_t j = size - n; j < size; ++j) {
    const std::size_t t = static_cast<std::size_t>(rng.uniform_index(j + 1));
    const std::size_t pick = seen.contains(t) ? j : t;
    seen.insert(pick);
    out.push_back(pick);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::MatrixXd stack(const std::vector<const Transition*>& batch, bool next) {
  const Eigen::Index rows = (next ? batch.front()->next_state : batch.front()->state).size();
  Eigen::MatrixXd x(rows, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = next ? batch[i]->next_state : batch[i]->state;
  }
  return x;
}

}  // namespace

TdTargets td_targets(const BranchingQNet& online, const BranchingQNet& target,
                     const std::vector<const Transition*>& batch, double gamma) {
  if (batch.empty()) throw std::invalid_argument("td_targets on an empty batch");
  const auto n = static_cast<Eigen::Index>(batch.size());
  TdTargets y{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  const Eigen::MatrixXd next = stack(batch, true);
  const auto [op, oq] = online.q_batch(next);
  const auto [tp, tq] = target.q_batch(next);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Transition& t = *batch[static_cast<std::size_t>(i)];
    if (t.done || gamma == 0.0) {
      y.y_p(i) = t.reward;
      y.y_q(i) = t.reward;
      continue;
    }
    y.y_p(i) = t.reward + gamma * tp(argmax_lowest(op.col(i)), i);
    y.y_q(i) = t.reward + gamma * tq(argmax_lowest(oq.col(i)), i);
  }
  return y;
}

LossResult bdq_loss(BranchingQNet& online, const TdTargets& targets,
                    const std::vector<const Transition*>& batch) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  const int n_p = online.n_p();
  const int n_q = online.n_q();
  const Eigen::MatrixXd raw = online.net().forward_train(stack(batch, false));
  const Eigen::MatrixXd qp = branch_q(raw, 1, n_p);
  const Eigen::MatrixXd qq = branch_q(raw, 1 + n_p, n_q);
  Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(raw.rows(), n);
  LossResult result;
  // Scatter dL/dQ_d(taken) into V and the mean-centred advantages.
  auto scatter = [&](Eigen::Index col, Eigen::Index offset, int branch, int taken, double g) {
    dout(0, col) += g;
    dout.block(offset, col, branch, 1).array() -= g / branch;
    dout(offset + taken, col) += g;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const ActionIndex a = batch[static_cast<std::size_t>(i)]->action;
    const double ep = targets.y_p(i) - qp(a.price, i);
    const double eq = targets.y_q(i) - qq(a.quantity, i);
    result.loss += 0.5 * (ep * ep + eq * eq);
    scatter(i, 1, n_p, a.price, -ep / static_cast<double>(n));
    scatter(i, 1 + n_p, n_q, a.quantity, -eq / static_cast<double>(n));
  }
  result.loss /= static_cast<double>(n);
  result.gradient = online.net().backward(dout);
  return result;
}

// ---------------------------------------------------------------------------

LowAgent::LowAgent(int input_size, const ActionGrid& grid, const LowNormalization& norm,
                   const LowTrainConfig& config, std::uint64_t seed)
    : grid_(grid), norm_(norm), config_(config), rng_(seed), buffer_(config.capacity) {
  grid_.validate();
  if (config.batch == 0 || config.target_sync < 1) throw std::invalid_argument("batch and sync interval must be >= 1");
  Rng init(derive_seed(seed, "low/init"));
  online_ = BranchingQNet::random(input_size, config.hidden, grid_, init);
  target_ = online_;
  optimizer_ = Adam(online_.net(), {config.learning_rate});
}

double LowAgent::epsilon() const {
  if (steps_ >= config_.epsilon_decay_steps) return config_.epsilon_end;
  const double f = static_cast<double>(steps_) / static_cast<double>(config_.epsilon_decay_steps);
  return config_.epsilon_start + f * (config_.epsilon_end - config_.epsilon_start);
}

ActionIndex LowAgent::act(const LowState& state, double epsilon) {
  return select_action(online_.q_values(low_input(state, norm_)), epsilon, rng_);
}

StepStats LowAgent::train_step(ExecutionEnv& env, const LowState& state, double tick, LowState& next) {
  const ActionIndex a = act(state, epsilon());
  const LimitOrderAction order = to_limit_order(a, state.own, env.book(), grid_, tick);
  const StepResult r = env.step(order);
  const double scale = config_.reward_scale / (norm_.q_max * env.task().reference_price);
  buffer_.push({low_input(state, norm_), a, r.reward * scale, low_input(r.state, norm_), r.done});
  ++steps_;
  next = r.state;
  return update();
}

double LowAgent::train_episode(ExecutionEnv& env, const ExecutionTask& task, int start, double tick) {
  LowState state = env.reset(task, start);
  while (!env.done()) {
    LowState next;
    train_step(env, state, tick, next);
    state = std::move(next);
  }
  return env.cumulative_reward();
}

StepStats LowAgent::update() {
  StepStats stats;
  if (buffer_.size() < config_.batch) return stats;
  std::vector<const Transition*> batch;
  for (std::size_t i : buffer_.sample_indices(config_.batch, rng_)) batch.push_back(&buffer_.at(i));
  const TdTargets y = td_targets(online_, target_, batch, config_.gamma);
  LossResult loss = bdq_loss(online_, y, batch);
  if (!std::isfinite(loss.loss) || !loss.gradient.all_finite()) {
    throw DivergenceError("non-finite TD loss during low-level training");
  }
  optimizer_.step(online_.net(), loss.gradient);
  ++updates_;
  if (updates_ % config_.target_sync == 0) target_ = BranchingQNet(online_.net().frozen(), grid_.n_p(), grid_.n_q());
  stats.updated = true;
  stats.loss = loss.loss;
  return stats;
}

// ---------------------------------------------------------------------------

BdqPolicy::BdqPolicy(BranchingQNet net, ActionGrid grid, LowNormalization norm, double tick)
    : net_(std::move(net)), grid_(std::move(grid)), norm_(norm), tick_(tick) {}

LimitOrderAction BdqPolicy::act(const ExecutionEnv& env, const LowState& state) const {
  const QValues q = net_.q_values(low_input(state, norm_));
  const ActionIndex a{argmax_lowest(q.q_p), argmax_lowest(q.q_q)};
  return to_limit_order(a, state.own, env.book(), grid_, tick_);
}

LimitOrderAction MarketOrderPolicy::act(const ExecutionEnv&, const LowState& state) const {
  return {0.0, sign(state.own.direction) * state.own.remaining_quantity, true};
}

EpisodeOutcome run_execution_episode(ExecutionEnv& env, const ExecutionPolicy& policy,
                                     const ExecutionTask& task, int start) {
  LowState state = env.reset(task, start);
  EpisodeOutcome out;
  while (!env.done()) {
    StepResult r = env.step(policy.act(env, state));
    out.forced = out.forced || r.forced;
    ++out.steps;
    state = std::move(r.state);
  }
  out.reward = env.cumulative_reward();
  out.fills = env.episode_fills();
  return out;
}

nlohmann::json low_sidecar(const BdqPolicy& policy, int lob_window, int levels) {
  return {{"price_offsets", policy.grid().price_offsets},
          {"proportions", policy.grid().proportions},
          {"q_max", policy.normalization().q_max},
          {"t_max", policy.normalization().t_max},
          {"tick", policy.tick()},
          {"lob_window", lob_window},
          {"levels", levels}};
}

void save_bdq_policy(const BdqPolicy& policy, int lob_window, int levels, const std::filesystem::path& ckpt) {
  save_checkpoint(policy.net().net(), ckpt);
  std::filesystem::path side = ckpt;
  side.replace_extension(".json");
  write_json_file(low_sidecar(policy, lob_window, levels), side);
}

BdqPolicy load_bdq_policy(const std::filesystem::path& ckpt) {
  std::filesystem::path side = ckpt;
  side.replace_extension(".json");
  const nlohmann::json j = read_json_file(side);
  try {
    ActionGrid grid;
    grid.price_offsets = j.at("price_offsets").get<std::vector<int>>();
    grid.proportions = j.at("proportions").get<std::vector<double>>();
    grid.validate();
    LowNormalization norm{j.at("q_max").get<double>(), j.at("t_max").get<int>()};
    BranchingQNet net(load_checkpoint(ckpt), grid.n_p(), grid.n_q());
    return BdqPolicy(std::move(net), grid, norm, j.at("tick").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(side.string() + ": " + e.what());
  }
}

}  // namespace hrpm
