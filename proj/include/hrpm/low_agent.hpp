#pragma once

#include <Eigen/Dense>

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <vector>

#include "hrpm/exchange.hpp"
#include "hrpm/mlp.hpp"
#include "hrpm/random.hpp"

namespace hrpm {

/// Discrete action space: tick offsets from the best same-side quote (positive is
/// passive) and proportions of the remaining quantity (0 skips).
struct ActionGrid {
  std::vector<int> price_offsets{-2, -1, 0, 1, 2};
  std::vector<double> proportions{0.0, 0.25, 0.5, 0.75, 1.0};

  int n_p() const { return static_cast<int>(price_offsets.size()); }
  int n_q() const { return static_cast<int>(proportions.size()); }
  /// Throws std::invalid_argument unless n_p >= 1, n_q >= 2 and proportions hold 0 and 1.
  void validate() const;
};

/// Scales for the private part of the state; inputs saturate at 1.
struct LowNormalization {
  double q_max = 1.0;
  int t_max = 1;
};

Eigen::VectorXd low_input(const LowState& state, const LowNormalization& norm);
inline Eigen::Index low_input_size(int lob_window, int levels) {
  return static_cast<Eigen::Index>(lob_window) * levels * 4 + 2;
}

/// Per-branch Q values from raw head outputs laid out as [V, Adv_p..., Adv_q...],
/// one sample per column: Q_d = V + Adv_d - mean(Adv_d).
template <typename Derived>
auto branch_q(const Eigen::MatrixBase<Derived>& raw, Eigen::Index offset, Eigen::Index n) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> adv = raw.middleRows(offset, n);
  const Eigen::Matrix<Scalar, 1, Eigen::Dynamic> centre = raw.row(0) - adv.colwise().mean();
  return MatrixX<Scalar>(adv.rowwise() + centre);
}

struct QValues {
  double value = 0.0;
  Eigen::VectorXd adv_p;
  Eigen::VectorXd adv_q;
  Eigen::VectorXd q_p;
  Eigen::VectorXd q_q;
};

struct ActionIndex {
  int price = 0;
  int quantity = 0;

  friend bool operator==(const ActionIndex&, const ActionIndex&) = default;
};

/// Shared trunk whose last linear layer emits the state value and both advantage
/// branches.
class BranchingQNet {
 public:
  BranchingQNet() = default;
  BranchingQNet(int inputs, const std::vector<int>& hidden, const ActionGrid& grid);
  BranchingQNet(Mlp net, int n_p, int n_q);

  static BranchingQNet random(int inputs, const std::vector<int>& hidden, const ActionGrid& grid, Rng& rng);

  int n_p() const { return n_p_; }
  int n_q() const { return n_q_; }
  const Mlp& net() const { return net_; }
  Mlp& net() { return net_; }

  /// Throws NumericError on non-finite outputs.
  QValues q_values(const Eigen::VectorXd& input) const;
  /// Q_p (n_p x batch) and Q_q (n_q x batch).
  std::pair<Eigen::MatrixXd, Eigen::MatrixXd> q_batch(const Eigen::MatrixXd& inputs) const;

 private:
  Mlp net_;
  int n_p_ = 0;
  int n_q_ = 0;
};

/// Lowest index among the maxima.
int argmax_lowest(const Eigen::VectorXd& q);

/// Per branch: uniform index with probability epsilon, else the greedy index.
ActionIndex select_action(const QValues& q, double epsilon, Rng& rng);

/// Maps a grid action to an order against the current book. Sell prices sit above
/// the best ask for positive offsets, buys mirror around the best bid. Prices below
/// one tick are clamped to one tick.
LimitOrderAction to_limit_order(const ActionIndex& a, const ExecutionPrivateState& own,
                                const OrderBook& book, const ActionGrid& grid, double tick);

struct Transition {
  Eigen::VectorXd state;
  ActionIndex action;
  double reward = 0.0;
  Eigen::VectorXd next_state;
  bool done = false;
};

/// Bounded FIFO with uniform sampling, without replacement within a batch.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_[i]; }
  /// Indices into the buffer; needs n <= size().
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

struct TdTargets {
  Eigen::VectorXd y_p;
  Eigen::VectorXd y_q;
};

/// Double-Q targets: the online net picks the next action per branch, the target
/// net scores it; terminal transitions bootstrap nothing.
TdTargets td_targets(const BranchingQNet& online, const BranchingQNet& target,
                     const std::vector<const Transition*>& batch, double gamma);

struct LossResult {
  double loss = 0.0;
  Gradient gradient;
};

/// Mean over the batch of the branch-averaged squared TD error, with gradients
/// through the taken actions' Q values only.
LossResult bdq_loss(BranchingQNet& online, const TdTargets& targets,
                    const std::vector<const Transition*>& batch);

struct LowTrainConfig {
  double gamma = 1.0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  long epsilon_decay_steps = 20000;
  std::size_t batch = 32;
  long target_sync = 1000;
  double learning_rate = 1e-3;
  std::size_t capacity = 100000;
  /// Learning-only reward multiplier, divided by q_max * reference price.
  double reward_scale = 1000.0;
  std::vector<int> hidden{128, 128};
};

struct StepStats {
  bool updated = false;
  double loss = 0.0;
};

class LowAgent {
 public:
  LowAgent(int input_size, const ActionGrid& grid, const LowNormalization& norm,
           const LowTrainConfig& config, std::uint64_t seed);

  double epsilon() const;
  ActionIndex act(const LowState& state, double epsilon);

  /// One environment step under the exploration schedule, one buffer push and, once
  /// the buffer holds a batch, one learning update.
  StepStats train_step(ExecutionEnv& env, const LowState& state, double tick, LowState& next);

  /// Full training episode; returns the currency reward sum.
  double train_episode(ExecutionEnv& env, const ExecutionTask& task, int start, double tick);

  StepStats update();

  const BranchingQNet& online() const { return online_; }
  BranchingQNet& online() { return online_; }
  const BranchingQNet& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const ActionGrid& grid() const { return grid_; }
  const LowNormalization& normalization() const { return norm_; }
  long steps() const { return steps_; }
  long updates() const { return updates_; }

 private:
  ActionGrid grid_;
  LowNormalization norm_;
  LowTrainConfig config_;
  Rng rng_;
  BranchingQNet online_;
  BranchingQNet target_;
  Adam optimizer_;
  ReplayBuffer buffer_;
  long steps_ = 0;
  long updates_ = 0;
};

/// Decision rule run inside the execution environment.
class ExecutionPolicy {
 public:
  virtual ~ExecutionPolicy() = default;
  virtual LimitOrderAction act(const ExecutionEnv& env, const LowState& state) const = 0;
};

/// Greedy policy of a frozen branching Q-net.
class BdqPolicy : public ExecutionPolicy {
 public:
  BdqPolicy(BranchingQNet net, ActionGrid grid, LowNormalization norm, double tick);
  LimitOrderAction act(const ExecutionEnv& env, const LowState& state) const override;

  const BranchingQNet& net() const { return net_; }
  const ActionGrid& grid() const { return grid_; }
  const LowNormalization& normalization() const { return norm_; }
  double tick() const { return tick_; }

 private:
  BranchingQNet net_;
  ActionGrid grid_;
  LowNormalization norm_;
  double tick_;
};

/// Sends the whole remaining quantity as a market order at the first step.
class MarketOrderPolicy : public ExecutionPolicy {
 public:
  LimitOrderAction act(const ExecutionEnv& env, const LowState& state) const override;
};

struct EpisodeOutcome {
  double reward = 0.0;
  FillReport fills;
  int steps = 0;
  bool forced = false;
};

/// Runs one episode to completion under `policy`.
EpisodeOutcome run_execution_episode(ExecutionEnv& env, const ExecutionPolicy& policy,
                                     const ExecutionTask& task, int start);

nlohmann::json low_sidecar(const BdqPolicy& policy, int lob_window, int levels);
void save_bdq_policy(const BdqPolicy& policy, int lob_window, int levels, const std::filesystem::path& ckpt);
BdqPolicy load_bdq_policy(const std::filesystem::path& ckpt);

}  // namespace hrpm
