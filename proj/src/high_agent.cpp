#include "hrpm/high_agent.hpp"

#include "hrpm/errors.hpp"
#include "hrpm/simplex.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <spdlog/spdlog.h>

#include <cmath>

namespace hrpm {

Eigen::VectorXd high_input(const HighState& state) {
  Eigen::VectorXd x(state.features.values.size() + state.weights.size());
  x << state.features.values, state.weights;
  return x;
}

Eigen::VectorXd policy_mean(const Mlp& net, const Eigen::VectorXd& input) {
  const Eigen::VectorXd logits = net.forward(input);
  if (!logits.allFinite()) throw NumericError("policy logits are not finite");
  return softmax(logits);
}

Eigen::VectorXd concentration(const Eigen::VectorXd& mean, double kappa) {
  if (!(kappa > 0.0)) throw std::invalid_argument("Dirichlet scale must be positive");
  Eigen::VectorXd alpha = kappa * mean;
  if ((alpha.array() < kConcentrationFloor).any()) {
    spdlog::debug("Dirichlet concentration clamped to {}", kConcentrationFloor);
    alpha = alpha.cwiseMax(kConcentrationFloor);
  }
  return alpha;
}

double dirichlet_log_density(const Eigen::VectorXd& alpha, const Eigen::VectorXd& log_weights) {
  double lp = std::lgamma(alpha.sum());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    lp += (alpha(i) - 1.0) * log_weights(i) - std::lgamma(alpha(i));
  }
  return lp;
}

HighAction sample_dirichlet(const Eigen::VectorXd& alpha, Rng& rng) {
  Eigen::VectorXd g(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) g(i) = rng.log_gamma_variate(alpha(i));
  HighAction a;
  a.log_weights = g.array() - log_sum_exp(g);
  a.weights = a.log_weights.array().exp();
  a.weights /= a.weights.sum();
  return a;
}

SampledAction sample_action(const Mlp& net, const Eigen::VectorXd& input, double kappa, Rng& rng,
                            bool greedy) {
  SampledAction s;
  s.logits = net.forward(input);
  if (!s.logits.allFinite()) throw NumericError("policy logits are not finite");
  s.mean = softmax(s.logits);
  const Eigen::VectorXd alpha = concentration(s.mean, kappa);
  if (greedy) {
    s.action.weights = s.mean;
    s.action.log_weights = s.logits.array() - log_sum_exp(s.logits);
  } else {
    s.action = sample_dirichlet(alpha, rng);
  }
  s.log_density = dirichlet_log_density(alpha, s.action.log_weights);
  return s;
}

Eigen::VectorXd log_density_grad(const Eigen::VectorXd& logits, double kappa,
                                 const Eigen::VectorXd& log_weights) {
  using boost::math::digamma;
  const Eigen::VectorXd mean = softmax(logits);
  const Eigen::VectorXd raw = kappa * mean;
  const Eigen::VectorXd alpha = raw.cwiseMax(kConcentrationFloor);
  const double psi_total = digamma(alpha.sum());
  // d log p / d mean_i, zero where the floor is active.
  Eigen::VectorXd g(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    g(i) = raw(i) < kConcentrationFloor ? 0.0 : kappa * (psi_total - digamma(alpha(i)) + log_weights(i));
  }
  // Softmax Jacobian-vector product.
  return (mean.array() * (g.array() - mean.dot(g))).matrix();
}

double entropy(const HighAction& action) { return entropy(action.weights); }

Eigen::VectorXd returns_to_go(const HighTrajectory& trajectory, double gamma, double eta) {
  const auto n = static_cast<Eigen::Index>(trajectory.size());
  Eigen::VectorXd g(n);
  double running = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const HighStep& s = trajectory[static_cast<std::size_t>(t)];
    running = s.reward + eta * s.entropy + gamma * running;
    g(t) = running;
  }
  return g;
}

UpdateStats reinforce_update(Mlp& net, Adam& optimizer, const std::vector<HighTrajectory>& batch,
                             const HighTrainConfig& config) {
  UpdateStats stats;
  std::vector<Eigen::VectorXd> returns;
  std::size_t horizon = 0;
  std::size_t steps = 0;
  double entropy_sum = 0.0;
  for (const auto& traj : batch) {
    returns.push_back(returns_to_go(traj, config.gamma, config.eta));
    horizon = std::max(horizon, traj.size());
    steps += traj.size();
    if (!traj.empty()) stats.mean_return += returns.back()(0);
    for (const auto& s : traj) entropy_sum += s.entropy;
  }
  if (steps == 0) return stats;
  stats.mean_return /= static_cast<double>(batch.size());
  stats.mean_entropy = entropy_sum / static_cast<double>(steps);

  Eigen::VectorXd baseline = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(horizon));
  Eigen::VectorXd count = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(horizon));
  for (const auto& g : returns) {
    baseline.head(g.size()) += g;
    count.head(g.size()).array() += 1.0;
  }
  baseline.array() /= count.array();

  const Eigen::Index inputs = net.input_size();
  Eigen::MatrixXd x(inputs, static_cast<Eigen::Index>(steps));
  Eigen::MatrixXd dout(net.output_size(), static_cast<Eigen::Index>(steps));
  Eigen::Index col = 0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    double discount = 1.0;
    for (std::size_t t = 0; t < batch[b].size(); ++t) {
      const HighStep& s = batch[b][t];
      const auto ti = static_cast<Eigen::Index>(t);
      const double advantage = returns[b](ti) - baseline(ti);
      x.col(col) = s.input;
      // Ascent on the surrogate: minimize its negation.
      dout.col(col) = -scale * discount * advantage * log_density_grad(s.logits, config.kappa, s.action.log_weights);
      discount *= config.gamma;
      ++col;
    }
  }
  net.forward_train(x);
  const Gradient grad = net.backward(dout);
  stats.gradient_norm = std::sqrt(grad.squared_norm());
  if (!grad.all_finite()) {
    spdlog::warn("non-finite policy gradient, update skipped");
    return stats;
  }
  optimizer.step(net, grad);
  stats.applied = true;
  return stats;
}

nlohmann::json high_sidecar(int assets, int window, const HighTrainConfig& config) {
  return {{"M", assets},
          {"k", window},
          {"kappa", config.kappa},
          {"eta", config.eta},
          {"gamma", config.gamma},
          {"features", {"open", "high", "low", "close", "volume"}},
          {"normalization", "prices / first-day close, volume / first-day volume (1 if zero)"}};
}

}  // namespace hrpm
