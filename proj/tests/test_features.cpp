#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "ciirl/features.hpp"
#include "ciirl/mdp.hpp"
#include "ciirl/oracles.hpp"
#include "ciirl/util.hpp"

using namespace ciirl;

namespace {

// straight-line re-evaluation of the MLP with plain loops, written against
// the layer convention (hidden tanh, linear output) independently of the
// FeatureNet internals
std::vector<double> reference_forward(const FeatureNet& net, const Eigen::VectorXd& x) {
  std::vector<double> cur(x.data(), x.data() + x.size());
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> next(layers[l].W.rows(), 0.0);
    for (Eigen::Index i = 0; i < layers[l].W.rows(); ++i) {
      double z = layers[l].b[i];
      for (Eigen::Index j = 0; j < layers[l].W.cols(); ++j) z += layers[l].W(i, j) * cur[j];
      next[i] = (l + 1 == layers.size()) ? z : std::tanh(z);
    }
    cur = std::move(next);
  }
  return cur;
}

FeatureNet random_net(std::vector<int> dims, Eigen::MatrixXd inputs, std::uint64_t seed) {
  FeatureNet net(std::move(dims), Activation::Tanh, std::move(inputs));
  net.init_uniform_fan_in(seed);
  return net;
}

}  // namespace

TEST_CASE("zero-initialized network maps every state to zero") {
  FeatureNet net({4, 3, 2}, Activation::Tanh, FeatureNet::one_hot_inputs(4));
  for (int s = 0; s < 4; ++s) CHECK(net.forward(s).norm() == 0.0);
}

TEST_CASE("identity single layer on one-hot inputs returns the encoding") {
  FeatureNet net({3, 3}, Activation::Tanh, FeatureNet::one_hot_inputs(3));
  Eigen::VectorXd params = net.flatten_params();
  // W = I, b = 0 in row-major flatten order
  params.setZero();
  params[0] = params[4] = params[8] = 1.0;
  net.set_params(params);
  for (int s = 0; s < 3; ++s) {
    Eigen::VectorXd f = net.forward(s);
    for (int j = 0; j < 3; ++j) CHECK(f[j] == doctest::Approx(s == j ? 1.0 : 0.0));
  }
}

TEST_CASE("forward matches an independent re-evaluation") {
  FeatureNet net = random_net({5, 4, 3}, FeatureNet::one_hot_inputs(5), 31);
  for (int s = 0; s < 5; ++s) {
    auto expect = reference_forward(net, net.item_inputs().row(s).transpose());
    Eigen::VectorXd got = net.forward(s);
    for (int j = 0; j < 3; ++j) CHECK(got[j] == doctest::Approx(expect[j]).epsilon(1e-12));
  }
}

TEST_CASE("forward caching does not change returned values") {
  FeatureNet net = random_net({4, 2, 2}, FeatureNet::one_hot_inputs(4), 5);
  Eigen::VectorXd first = net.forward(2);
  Eigen::VectorXd second = net.forward(2);
  CHECK(first == second);
  Eigen::VectorXd p = net.flatten_params();
  p[8] += 0.25;  // first-layer bias, reaches every item
  net.set_params(p);
  Eigen::VectorXd third = net.forward(2);
  CHECK(third != first);
  auto expect = reference_forward(net, net.item_inputs().row(2).transpose());
  CHECK(third[0] == doctest::Approx(expect[0]).epsilon(1e-12));
}

TEST_CASE("zero upstream produces zero gradients") {
  FeatureNet net = random_net({3, 2, 2}, FeatureNet::one_hot_inputs(3), 7);
  net.forward(1);
  auto grads = net.zero_grads();
  net.backward(1, Eigen::VectorXd::Zero(2), grads);
  CHECK(grads.flatten().norm() == 0.0);
}

TEST_CASE("single linear layer gradient is upstream times input") {
  Eigen::MatrixXd inputs(1, 3);
  inputs << 0.5, -1.0, 2.0;
  FeatureNet net = random_net({3, 2}, inputs, 9);
  net.forward(0);
  auto grads = net.zero_grads();
  Eigen::VectorXd up(2);
  up << 1.5, -0.5;
  net.backward(0, up, grads);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) CHECK(grads.layers[0].W(i, j) == doctest::Approx(up[i] * inputs(0, j)));
  CHECK(grads.layers[0].b[0] == doctest::Approx(1.5));
  CHECK(grads.layers[0].b[1] == doctest::Approx(-0.5));
}

TEST_CASE("backward requires a forward cache") {
  FeatureNet net = random_net({3, 2}, FeatureNet::one_hot_inputs(3), 11);
  auto grads = net.zero_grads();
  CHECK_THROWS_AS(net.backward(0, Eigen::VectorXd::Zero(2), grads), std::logic_error);
  net.forward(0);
  Eigen::VectorXd p = net.flatten_params();
  p[0] += 1.0;
  net.set_params(p);  // invalidates the cache
  CHECK_THROWS_AS(net.backward(0, Eigen::VectorXd::Zero(2), grads), std::logic_error);
}

TEST_CASE("gradients match central finite differences on experiment-sized nets") {
  // every layer configuration used in the experiments, 10 random points
  std::vector<std::vector<int>> configs = {{2, 1, 4}, {2, 8, 4}, {6, 3, 2}, {2, 1, 1}};
  int point = 0;
  for (const auto& dims : configs) {
    for (std::uint64_t seed = 1; point < 10; ++seed) {
      Eigen::MatrixXd inputs = Eigen::MatrixXd::Random(3, dims.front());
      FeatureNet net = random_net(dims, inputs, seed * 13 + 1);
      Rng rng(seed);
      Eigen::VectorXd upstream = Eigen::VectorXd::Zero(dims.back());
      for (int j = 0; j < dims.back(); ++j) upstream[j] = rng.uniform(-1.0, 1.0);
      int item = static_cast<int>(seed) % 3;

      net.forward(item);
      auto grads = net.zero_grads();
      net.backward(item, upstream, grads);
      Eigen::VectorXd analytic = grads.flatten();

      Eigen::VectorXd at = net.flatten_params();
      auto loss = [&](std::span<const double> p) {
        FeatureNet probe = net;
        probe.set_params(Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()));
        return upstream.dot(probe.forward(item));
      };
      auto fd = finite_diff(loss, std::span<const double>(at.data(), at.size()), 1e-5);
      for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        double denom = std::max({1.0, std::abs(analytic[i]), std::abs(fd[i])});
        CHECK(std::abs(analytic[i] - fd[i]) / denom <= 1e-4);
      }
      ++point;
      if (point % 3 == 0) break;
    }
  }
}

TEST_CASE("input gradient matches finite differences in the input") {
  FeatureNet net = random_net({3, 4, 2}, Eigen::MatrixXd::Random(2, 3), 17);
  Eigen::VectorXd head(2);
  head << 0.8, -1.2;
  Eigen::VectorXd x(3);
  x << 0.3, -0.6, 0.9;
  Eigen::VectorXd g = net.input_gradient(x, head);
  auto fn = [&](std::span<const double> xs) {
    return head.dot(net.forward_input(Eigen::Map<const Eigen::VectorXd>(xs.data(), xs.size())));
  };
  auto fd = finite_diff(fn, std::span<const double>(x.data(), x.size()), 1e-6);
  for (int i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-6));
}

TEST_CASE("rmsprop leaves parameters alone under zero gradient") {
  RmsProp opt(3, 1e-3);
  Eigen::VectorXd params(3);
  params << 1.0, -2.0, 0.5;
  Eigen::VectorXd before = params;
  opt.step(params, Eigen::VectorXd::Zero(3));
  CHECK(params == before);
}

TEST_CASE("rmsprop reproduces a hand-stepped scalar trace") {
  // acc_k = 0.99 acc_{k-1} + 0.01 g^2; x -= 0.001 g / (sqrt(acc_k) + 1e-8)
  const double g = 0.5;
  double acc = 0.0, x_ref = 2.0;
  RmsProp opt(1, 1e-3, 0.99, 1e-8);
  Eigen::VectorXd x(1);
  x << 2.0;
  Eigen::VectorXd grad(1);
  grad << g;
  for (int k = 0; k < 5; ++k) {
    acc = 0.99 * acc + 0.01 * g * g;
    x_ref -= 1e-3 * g / (std::sqrt(acc) + 1e-8);
    opt.step(x, grad);
    CHECK(x[0] == doctest::Approx(x_ref).epsilon(1e-15));
  }
}

TEST_CASE("reward model checkpoints round-trip exactly") {
  GridworldSpec spec;
  spec.width = spec.height = 4;
  spec.start_cells = {{0, 0}};
  spec.goal_cells = {{3, 3}};
  Gridworld gw = build_gridworld(spec);
  RewardModel model = make_reward_model(gw, InputEncoding::Coords, {3}, 2, Activation::Tanh, 77);
  model.head << 0.123456789123456789, -7.5;

  auto path = std::filesystem::temp_directory_path() / "ciirl_ckpt_test" / "model.json";
  save_checkpoint(path, model.net, model.head, "reward", to_string(InputEncoding::Coords), 4, 4);
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.kind == "reward");
  CHECK(ck.width == 4);
  CHECK(ck.net.flatten_params() == model.net.flatten_params());
  CHECK(ck.head == model.head);
  CHECK(ck.net.item_inputs() == model.net.item_inputs());
  std::filesystem::remove_all(path.parent_path());
}

TEST_CASE("reward model evaluates head dot features") {
  GridworldSpec spec;
  spec.width = spec.height = 3;
  spec.start_cells = {{0, 0}};
  spec.goal_cells = {{2, 2}};
  Gridworld gw = build_gridworld(spec);
  RewardModel model = make_reward_model(gw, InputEncoding::OneHot, {2}, 3, Activation::Tanh, 5);
  auto rewards = model.state_rewards();
  for (int s = 0; s < 9; ++s) CHECK(rewards[s] == doctest::Approx(model.head.dot(model.net.forward(s))));
}
