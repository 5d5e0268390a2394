#include <doctest.h>

#include "hrpm/errors.hpp"
#include "hrpm/mlp.hpp"
#include "hrpm/mlp_io.hpp"
#include "oracles.hpp"

using namespace hrpm;

namespace {

std::vector<int> random_sizes(Rng& rng) {
  std::vector<int> sizes{1 + static_cast<int>(rng.uniform_index(6))};
  const int hidden = static_cast<int>(rng.uniform_index(3));
  for (int h = 0; h < hidden; ++h) sizes.push_back(1 + static_cast<int>(rng.uniform_index(8)));
  sizes.push_back(1 + static_cast<int>(rng.uniform_index(4)));
  return sizes;
}

Eigen::MatrixXd random_inputs(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = rng.normal();
  }
  return x;
}

}  // namespace

TEST_CASE("forward pass matches a hand computation") {
  Mlp net({2, 2, 1});
  net.layers()[0].weight << 1.0, -1.0, 0.5, 2.0;
  net.layers()[0].bias << 0.0, -1.0;
  net.layers()[1].weight << 3.0, -2.0;
  net.layers()[1].bias << 0.5;
  // Hidden: relu(1 - 2) = 0, relu(0.5 + 4 - 1) = 3.5; output 0.5 - 7 = -6.5.
  const Eigen::VectorXd y = net.forward(Eigen::Vector2d(1.0, 2.0));
  CHECK(y(0) == doctest::Approx(-6.5));
  CHECK(net.parameter_count() == 9);
  CHECK(net.sizes() == std::vector<int>{2, 2, 1});
}

TEST_CASE("backward agrees with central differences on random nets") {
  Rng rng(17);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto sizes = random_sizes(rng);
    Mlp net = Mlp::random(sizes, rng);
    // Zero biases put pre-activations behind dead units exactly on the ReLU kink.
    for (auto& layer : net.layers()) {
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.1 * rng.normal();
    }
    const Eigen::MatrixXd x = random_inputs(rng, sizes.front(), 1 + static_cast<Eigen::Index>(rng.uniform_index(4)));
    worst = std::max(worst, grad_check(net, x));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gradient checker catches a wrong gradient") {
  Rng rng(2);
  Mlp net = Mlp::random({3, 4, 2}, rng);
  const Eigen::MatrixXd x = random_inputs(rng, 3, 2);
  const auto [loss, dout] = probe_loss<double>(net.forward_train(x));
  Gradient g = net.backward(dout);
  g.biases[1](0) += 1e-3;
  CHECK(gradient_error(net, x, g) > 1e-6);
}

TEST_CASE("backward needs a forward pass") {
  Mlp net({2, 1});
  CHECK_THROWS_AS(net.backward(Eigen::MatrixXd::Ones(1, 1)), LifecycleError);
  CHECK_THROWS_AS(net.forward(Eigen::Vector3d::Ones()), ShapeError);
  CHECK_THROWS_AS(Mlp(std::vector<int>{3}), ShapeError);
}

TEST_CASE("parameters round trip through the flat vector") {
  Rng rng(5);
  const Mlp net = Mlp::random({3, 5, 2}, rng);
  Mlp copy({3, 5, 2});
  copy.set_parameters(net.parameters());
  const Eigen::Vector3d x(0.1, -0.3, 2.0);
  CHECK(copy.forward(x) == net.forward(x));
  CHECK(net.parameters().size() == net.parameter_count());
}

TEST_CASE("adam reduces a least-squares loss") {
  Rng rng(9);
  Mlp net = Mlp::random({2, 8, 1}, rng);
  Adam adam(net, {0.01});
  const Eigen::MatrixXd x = random_inputs(rng, 2, 32);
  const Eigen::MatrixXd y = (x.row(0) * 0.7 - x.row(1) * 0.2).array() + 0.3;
  auto loss = [&] { return 0.5 * (net.forward(x) - y).squaredNorm() / 32.0; };
  const double before = loss();
  for (int i = 0; i < 500; ++i) {
    const Eigen::MatrixXd out = net.forward_train(x);
    adam.step(net, net.backward((out - y) / 32.0));
  }
  CHECK(loss() < 0.05 * before);
  CHECK(adam.steps() == 500);
}

TEST_CASE("checkpoints round trip exactly and reject bad files") {
  const auto dir = testkit::scratch_dir("mlp_io");
  Rng rng(1);
  const Mlp net = Mlp::random({4, 3, 2}, rng);
  save_checkpoint(net, dir / "net.ckpt");
  const Mlp back = load_checkpoint(dir / "net.ckpt");
  CHECK(back.parameters() == net.parameters());
  CHECK(back.sizes() == net.sizes());

  nlohmann::json j = to_json(net);
  j["format"] = "other";
  CHECK_THROWS_AS(mlp_from_json(j), DataError);
  j = to_json(net);
  j["version"] = 99;
  CHECK_THROWS_AS(mlp_from_json(j), DataError);
  j = to_json(net);
  j["layers"][1]["inputs"] = 7;
  CHECK_THROWS_AS(mlp_from_json(j), ShapeError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), DataError);
}

TEST_CASE("extended precision nets agree with double nets") {
  Rng rng(6);
  const Mlp net = Mlp::random({3, 4, 2}, rng);
  const Eigen::Vector3d x(0.5, -1.0, 0.25);
  const auto wide = net.cast<long double>();
  const VectorX<long double> yw = wide.forward(x.cast<long double>());
  const Eigen::VectorXd y = net.forward(x);
  CHECK(std::abs(static_cast<double>(yw(0)) - y(0)) < 1e-14);
}
