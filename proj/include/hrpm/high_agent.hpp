#pragma once

#include <Eigen/Dense>

#include <json.hpp>

#include <vector>

#include "hrpm/market_data.hpp"
#include "hrpm/mlp.hpp"
#include "hrpm/random.hpp"

namespace hrpm {

struct HighState {
  FeatureWindow features;
  Eigen::VectorXd weights;
};

/// Flattened feature window followed by the current weights.
Eigen::VectorXd high_input(const HighState& state);
inline Eigen::Index high_input_size(int assets, int window) {
  return static_cast<Eigen::Index>(assets) * window * FeatureWindow::kFeatures + assets + 1;
}

struct HighAction {
  Eigen::VectorXd weights;
  /// Log of each weight, kept separately because tiny sampled weights underflow.
  Eigen::VectorXd log_weights;
};

struct SampledAction {
  HighAction action;
  double log_density = 0.0;
  Eigen::VectorXd logits;
  Eigen::VectorXd mean;
};

inline constexpr double kConcentrationFloor = 1e-3;

/// Softmax of the net's logits. Throws NumericError on non-finite logits.
Eigen::VectorXd policy_mean(const Mlp& net, const Eigen::VectorXd& input);

/// Dirichlet concentration kappa * mean, each entry floored at kConcentrationFloor.
Eigen::VectorXd concentration(const Eigen::VectorXd& mean, double kappa);

double dirichlet_log_density(const Eigen::VectorXd& alpha, const Eigen::VectorXd& log_weights);
HighAction sample_dirichlet(const Eigen::VectorXd& alpha, Rng& rng);

/// Draws w ~ Dirichlet(kappa * policy_mean). With `greedy` the policy mean itself
/// is returned, scored under the same density.
SampledAction sample_action(const Mlp& net, const Eigen::VectorXd& input, double kappa, Rng& rng,
                            bool greedy = false);

/// d log p(w) / d logits for w ~ Dirichlet(kappa * softmax(logits)).
Eigen::VectorXd log_density_grad(const Eigen::VectorXd& logits, double kappa,
                                 const Eigen::VectorXd& log_weights);

double entropy(const HighAction& action);

struct HighStep {
  Eigen::VectorXd input;
  HighAction action;
  Eigen::VectorXd logits;
  double log_density = 0.0;
  double reward = 0.0;
  double entropy = 0.0;
};

using HighTrajectory = std::vector<HighStep>;

/// G_t = sum_{j>=t} gamma^(j-t) (r_j + eta H_j).
Eigen::VectorXd returns_to_go(const HighTrajectory& trajectory, double gamma, double eta);

struct HighTrainConfig {
  double gamma = 0.99;
  double eta = 0.0;
  double learning_rate = 1e-3;
  double kappa = 50.0;
  int episodes = 200;
  int batch = 8;
};

struct UpdateStats {
  bool applied = false;
  double gradient_norm = 0.0;
  double mean_return = 0.0;
  double mean_entropy = 0.0;
};

/// One REINFORCE step over a batch of trajectories. The baseline at time index t is
/// the batch mean of G_t over trajectories that reached t. Non-finite gradients skip
/// the update.
UpdateStats reinforce_update(Mlp& net, Adam& optimizer, const std::vector<HighTrajectory>& batch,
                             const HighTrainConfig& config);

/// Policy sidecar written next to the checkpoint.
nlohmann::json high_sidecar(int assets, int window, const HighTrainConfig& config);

}  // namespace hrpm
