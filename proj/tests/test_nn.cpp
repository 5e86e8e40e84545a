#include "alpl/error.hpp"
#include "alpl/nn.hpp"
#include "alpl/rng.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using alpl::nn::DenseNet;
using alpl::nn::Matrix;

namespace {

bool same_bytes(const alpl::nn::Parameters& a, const alpl::nn::Parameters& b) {
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if (std::memcmp(a.weights[l].data(), b.weights[l].data(), sizeof(double) * a.weights[l].size()) != 0) return false;
    if (std::memcmp(a.biases[l].data(), b.biases[l].data(), sizeof(double) * a.biases[l].size()) != 0) return false;
  }
  return true;
}

Matrix random_matrix(alpl::Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

}  // namespace

TEST_CASE("zero network gives uniform probabilities") {
  DenseNet net({3, 5, 4});
  Matrix x(2, 3);
  x << 1, -2, 3, 0.5, 0, 7;
  const auto out = alpl::nn::forward(net, x);
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(out.probabilities(i, j) == doctest::Approx(0.25).epsilon(1e-15));
  }
}

TEST_CASE("softmax of hand-picked logits") {
  Matrix z(2, 4);
  z << 1, 1, 1, 1, std::log(2.0), 0, 0, 0;
  const Matrix p = alpl::nn::softmax_rows(z);
  CHECK(p(0, 2) == doctest::Approx(0.25));
  Matrix z2(1, 2);
  z2 << std::log(2.0), 0.0;
  const Matrix p2 = alpl::nn::softmax_rows(z2);
  CHECK(p2(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(p2(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("softmax rows sum to one for large logits") {
  alpl::Rng rng(5);
  const Matrix z = random_matrix(rng, 200, 10, 1e3);
  const Matrix p = alpl::nn::softmax_rows(z);
  REQUIRE(p.allFinite());
  for (Eigen::Index i = 0; i < p.rows(); ++i) CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("forward rejects a width mismatch") {
  DenseNet net({3, 2});
  CHECK_THROWS_AS(alpl::nn::forward(net, Matrix::Zero(1, 4)), alpl::ConfigError);
  CHECK_THROWS_AS(DenseNet(std::vector<std::size_t>{}), alpl::ConfigError);
  CHECK_THROWS_AS(alpl::nn::init_net(std::vector<std::size_t>{}, 1), alpl::ConfigError);
}

TEST_CASE("init_net is determined by the seed") {
  const std::vector<std::size_t> dims = {784, 300, 300, 300, 10};
  const auto a = alpl::nn::init_net(dims, 42);
  const auto b = alpl::nn::init_net(dims, 42);
  const auto c = alpl::nn::init_net(dims, 43);
  CHECK(same_bytes(a.params(), b.params()));
  CHECK_FALSE(same_bytes(a.params(), c.params()));
  CHECK(a.num_layers() == 4);
  CHECK(a.params().weights[0].rows() == 300);
  CHECK(a.params().weights[0].cols() == 784);
  CHECK(a.params().weights[3].rows() == 10);
  const double limit = std::sqrt(6.0 / 784.0);
  CHECK(a.params().weights[0].cwiseAbs().maxCoeff() <= limit);
  CHECK(a.params().biases[1].isZero());
}

TEST_CASE("zero logit gradient gives zero parameter gradients") {
  const auto net = alpl::nn::init_net(std::vector<std::size_t>{4, 6, 3}, 1);
  alpl::Rng rng(2);
  const auto out = alpl::nn::forward(net, random_matrix(rng, 5, 4));
  const auto g = alpl::nn::backward(net, out, Matrix::Zero(5, 3));
  for (const auto& w : g.weights) CHECK(w.isZero());
  for (const auto& b : g.biases) CHECK(b.isZero());
}

TEST_CASE("single linear layer gradient is the outer product") {
  const auto net = alpl::nn::init_net(std::vector<std::size_t>{3, 2}, 9);
  Matrix x(1, 3);
  x << 0.5, -1.0, 2.0;
  Matrix g(1, 2);
  g << 0.3, -0.7;
  const auto grads = alpl::nn::backward(net, alpl::nn::forward(net, x), g);
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 3; ++c) CHECK(grads.weights[0](r, c) == doctest::Approx(g(0, r) * x(0, c)));
    CHECK(grads.biases[0](r) == doctest::Approx(g(0, r)));
  }
}

TEST_CASE("backward matches finite differences of a linear functional of the logits") {
  alpl::Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const auto net = alpl::nn::init_net(std::vector<std::size_t>{4, 7, 5, 3}, 100 + trial);
    const Matrix x = random_matrix(rng, 6, 4);
    const Matrix c = random_matrix(rng, 6, 3);  // L = sum(c .* logits)
    const auto grads = alpl::nn::backward(net, alpl::nn::forward(net, x), c);
    const auto rows = oracle::to_rows(x);

    auto loss = [&](const DenseNet& n) {
      const auto f = oracle::naive_forward(n, rows);
      double s = 0.0;
      for (std::size_t i = 0; i < f.logits.size(); ++i) {
        for (std::size_t j = 0; j < 3; ++j) s += c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * f.logits[i][j];
      }
      return s;
    };
    DenseNet probe = net;
    const double h = 1e-4;
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      for (Eigen::Index r = 0; r < probe.params().weights[l].rows(); ++r) {
        for (Eigen::Index col = 0; col < probe.params().weights[l].cols(); ++col) {
          double& w = probe.params().weights[l](r, col);
          const double orig = w;
          w = orig + h;
          const double up = loss(probe);
          w = orig - h;
          const double down = loss(probe);
          w = orig;
          CHECK(oracle::rel_err(grads.weights[l](r, col), (up - down) / (2 * h)) < 1e-5);
        }
      }
    }
  }
}

TEST_CASE("backward rejects non-finite or misshapen gradients") {
  const auto net = alpl::nn::init_net(std::vector<std::size_t>{2, 3}, 1);
  const auto out = alpl::nn::forward(net, Matrix::Ones(1, 2));
  Matrix g = Matrix::Zero(1, 3);
  g(0, 1) = std::nan("");
  CHECK_THROWS_AS(alpl::nn::backward(net, out, g), alpl::NumericError);
  CHECK_THROWS_AS(alpl::nn::backward(net, out, Matrix::Zero(2, 3)), alpl::ConfigError);
}

TEST_CASE("adam with zero gradients leaves parameters unchanged") {
  auto net = alpl::nn::init_net(std::vector<std::size_t>{3, 4, 2}, 3);
  const auto before = net.params();
  auto state = alpl::nn::AdamState::for_net(net);
  alpl::nn::adam_step(net, state, net.params().zeros_like());
  CHECK(state.step_count == 1);
  CHECK(same_bytes(before, net.params()));
}

TEST_CASE("adam first step moves by about lr against the gradient sign") {
  DenseNet net({1, 2});
  auto state = alpl::nn::AdamState::for_net(net, {.lr = 0.001});
  auto g = net.params().zeros_like();
  g.weights[0](0, 0) = 250.0;
  g.weights[0](1, 0) = -3e4;
  alpl::nn::adam_step(net, state, g);
  CHECK(net.params().weights[0](0, 0) == doctest::Approx(-0.001).epsilon(1e-6));
  CHECK(net.params().weights[0](1, 0) == doctest::Approx(0.001).epsilon(1e-6));
}

TEST_CASE("adam matches a scalar reference trace") {
  // Hand-rolled scalar Adam, independent of the Eigen implementation.
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double grads[3] = {0.5, -1.5, 2.0};
  double theta = 0.2, m = 0.0, v = 0.0;
  DenseNet net({1, 1});
  net.params().biases[0](0) = theta;
  auto state = alpl::nn::AdamState::for_net(net, {.lr = lr, .beta1 = b1, .beta2 = b2, .eps = eps});
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    theta -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
    auto pg = net.params().zeros_like();
    pg.biases[0](0) = g;
    alpl::nn::adam_step(net, state, pg);
    CHECK(net.params().biases[0](0) == doctest::Approx(theta).epsilon(1e-14));
  }
  CHECK(state.step_count == 3);
}

TEST_CASE("adam rejects shape mismatches") {
  auto net = alpl::nn::init_net(std::vector<std::size_t>{3, 2}, 1);
  auto state = alpl::nn::AdamState::for_net(net);
  DenseNet other({4, 2});
  CHECK_THROWS_AS(alpl::nn::adam_step(net, state, other.params()), alpl::ConfigError);
}

TEST_CASE("predict_proba and embed agree with forward") {
  const auto net = alpl::nn::init_net(std::vector<std::size_t>{5, 8, 6, 3}, 4);
  alpl::Rng rng(3);
  const Matrix x = random_matrix(rng, 9, 5);
  const auto out = alpl::nn::forward(net, x);
  CHECK((alpl::nn::predict_proba(net, x) - out.probabilities).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((alpl::nn::embed(net, x) - out.penultimate()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(out.penultimate().cols() == 6);
}
