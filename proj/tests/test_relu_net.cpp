#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fastnn/relu_net.hpp"
#include "oracles.hpp"

using namespace fastnn;

namespace {

DenseReluNet random_small_net(Rng& rng, bool clipped) {
  const int depth = 1 + static_cast<int>(rng.uniform_index(4));
  std::vector<Eigen::Index> widths;
  widths.push_back(1 + static_cast<Eigen::Index>(rng.uniform_index(6)));
  for (int l = 0; l < depth; ++l)
    widths.push_back(2 + static_cast<Eigen::Index>(rng.uniform_index(15)));
  widths.push_back(1 + static_cast<Eigen::Index>(rng.uniform_index(3)));
  DenseReluNet net = make_net(widths, rng.next_u64(),
                              clipped ? rng.uniform(0.5, 2.0) : kInf);
  return net;
}

}  // namespace

TEST_CASE("truncate clips by magnitude and keeps sign") {
  CHECK(truncate(3.7, 2.0) == 2.0);
  CHECK(truncate(-5.0, 2.0) == -2.0);
  CHECK(truncate(1.5, 2.0) == 1.5);
  CHECK(truncate(2.0, 2.0) == 2.0);
  CHECK(truncate(0.3, kInf) == 0.3);
  Eigen::MatrixXd z(1, 3);
  z << -4.0, 0.25, 9.0;
  Eigen::MatrixXd t = truncate(z, 1.0);
  CHECK(t(0, 0) == -1.0);
  CHECK(t(0, 1) == 0.25);
  CHECK(t(0, 2) == 1.0);
}

TEST_CASE("forward applies affine maps with ReLU in between") {
  DenseReluNet net;
  net.weights = {Eigen::MatrixXd::Identity(2, 2),
                 Eigen::MatrixXd::Identity(2, 2)};
  net.biases = {Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  Eigen::VectorXd x(2);
  x << 1.0, -2.0;
  Eigen::VectorXd out = forward(net, x);
  CHECK(out(0) == 1.0);
  CHECK(out(1) == 0.0);

  net.truncation = 0.5;
  out = forward(net, x);
  CHECK(out(0) == 0.5);
}

TEST_CASE("forward agrees with a straight-line interpreter") {
  Rng rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    DenseReluNet net = random_small_net(rng, rep % 3 == 0);
    Eigen::MatrixXd x =
        uniform_matrix(rng, net.input_dim(), 5, -2.0, 2.0);
    Eigen::MatrixXd out = forward(net, x);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      std::vector<double> xi(static_cast<std::size_t>(x.rows()));
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        xi[static_cast<std::size_t>(i)] = x(i, c);
      auto ref = oracles::naive_forward(net, xi);
      for (Eigen::Index i = 0; i < out.rows(); ++i)
        CHECK(out(i, c) ==
              doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward of a single linear unit matches the hand derivative") {
  DenseReluNet net;
  net.weights = {Eigen::MatrixXd::Ones(1, 1)};
  net.biases = {Eigen::VectorXd::Zero(1)};
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(1, 1);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 1);
  NetGrads g;
  double loss = backward_mse(net, x, y, g);
  CHECK(loss == doctest::Approx(1.0));
  CHECK(g.dweights[0](0, 0) == doctest::Approx(2.0));
  CHECK(g.dbiases[0](0) == doctest::Approx(2.0));
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(2024);
  int done = 0;
  while (done < 10) {
    DenseReluNet net = random_small_net(rng, done % 3 == 0);
    Eigen::MatrixXd x = uniform_matrix(rng, net.input_dim(), 4, -1.5, 1.5);
    if (oracles::min_preactivation_gap(net, x) < 1e-4) continue;
    Eigen::MatrixXd y =
        uniform_matrix(rng, net.output_dim(), 4, -1.0, 1.0);
    NetGrads g;
    backward_mse(net, x, y, g);
    NetGrads fd = oracles::fd_gradients(net, x, y, 1e-5);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
      double err = (g.dweights[l] - fd.dweights[l]).cwiseAbs().maxCoeff();
      double scale = std::max(1.0, fd.dweights[l].cwiseAbs().maxCoeff());
      CHECK(err / scale < 1e-6);
      double berr = (g.dbiases[l] - fd.dbiases[l]).cwiseAbs().maxCoeff();
      CHECK(berr / scale < 1e-6);
    }
    ++done;
  }
}

TEST_CASE("saturated output blocks every gradient") {
  DenseReluNet net;
  net.weights = {Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1)};
  net.biases = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  net.truncation = 1.0;
  Eigen::MatrixXd x = 5.0 * Eigen::MatrixXd::Ones(1, 1);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 1);
  NetGrads g;
  Eigen::MatrixXd gin;
  backward_mse(net, x, y, g, &gin);
  for (std::size_t l = 0; l < 2; ++l) {
    CHECK(g.dweights[l].cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.dbiases[l].cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(gin(0, 0) == 0.0);
}

TEST_CASE("inactive ReLU blocks upstream gradients") {
  DenseReluNet net;
  net.weights = {Eigen::MatrixXd::Ones(1, 1), Eigen::MatrixXd::Ones(1, 1)};
  net.biases = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  Eigen::MatrixXd x(1, 1);
  x << 0.0;  // pre-activation exactly zero: slope treated as zero
  Eigen::MatrixXd y(1, 1);
  y << 1.0;
  NetGrads g;
  backward_mse(net, x, y, g);
  CHECK(g.dweights[0](0, 0) == 0.0);
  CHECK(g.dbiases[0](0) == 0.0);
  CHECK(g.dbiases[1](0) != 0.0);
}

TEST_CASE("grad_input matches finite differences through the input") {
  Rng rng(7);
  DenseReluNet net = make_net({3, 8, 8, 1}, 55);
  Eigen::MatrixXd x = uniform_matrix(rng, 3, 1, -1.0, 1.0);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(1, 1);
  NetGrads g;
  Eigen::MatrixXd gin;
  backward_mse(net, x, y, g, &gin);
  for (Eigen::Index i = 0; i < 3; ++i) {
    Eigen::MatrixXd xp = x, xm = x;
    xp(i, 0) += 1e-6;
    xm(i, 0) -= 1e-6;
    double fd = (oracles::naive_mse(net, xp, y) -
                 oracles::naive_mse(net, xm, y)) /
                2e-6;
    CHECK(gin(i, 0) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("adam first step moves a fresh parameter by about -lr") {
  Eigen::MatrixXd param = Eigen::MatrixXd::Zero(1, 1);
  AdamBuf buf = make_adam_buf(1, 1);
  Eigen::MatrixXd grad(1, 1);
  grad << 2.0;
  AdamParams hp;
  hp.lr = 1e-3;
  adam_update(param, buf, grad, 1, hp);
  CHECK(std::abs(param(0, 0) + 1e-3) < 1e-9);

  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  AdamBuf buf2 = make_adam_buf(1, 1);
  Eigen::MatrixXd p2 = Eigen::MatrixXd::Constant(1, 1, 0.7);
  adam_update(p2, buf2, zero, 1, hp);
  CHECK(p2(0, 0) == 0.7);
}

TEST_CASE("adam on a quadratic descends deterministically") {
  auto run = [] {
    DenseReluNet net = make_net({2, 6, 1}, 99);
    NetAdam st = make_net_adam(net);
    AdamParams hp;
    Rng rng(4);
    Eigen::MatrixXd x = uniform_matrix(rng, 2, 32, -1.0, 1.0);
    Eigen::MatrixXd y = (x.row(0).array() * x.row(1).array()).matrix();
    NetGrads g;
    double first = backward_mse(net, x, y, g);
    for (int it = 0; it < 200; ++it) {
      backward_mse(net, x, y, g);
      adam_step(net, st, g, hp);
    }
    NetGrads tail;
    double last = backward_mse(net, x, y, tail);
    CHECK(last < first);
    return net;
  };
  DenseReluNet a = run(), b = run();
  for (std::size_t l = 0; l < a.weights.size(); ++l)
    CHECK((a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_net draws within the fan-in bound, biases zero") {
  DenseReluNet net = make_net({24, 16, 1}, 7);
  double bound0 = std::sqrt(6.0 / 24.0);
  CHECK(net.weights[0].cwiseAbs().maxCoeff() <= bound0);
  CHECK(net.weights[0].cwiseAbs().maxCoeff() > 0.5 * bound0);
  CHECK(net.biases[0].cwiseAbs().maxCoeff() == 0.0);
  DenseReluNet again = make_net({24, 16, 1}, 7);
  CHECK((net.weights[0] - again.weights[0]).cwiseAbs().maxCoeff() == 0.0);
  DenseReluNet other = make_net({24, 16, 1}, 8);
  CHECK((net.weights[0] - other.weights[0]).cwiseAbs().maxCoeff() > 0.0);
  CHECK(net.param_count() == 24 * 16 + 16 + 16 + 1);
  CHECK_THROWS_AS(make_net({5}, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_net({5, 0, 1}, 1), std::invalid_argument);
}

TEST_CASE("input dropout: identity at rho 0, unbiased at rho 0.5") {
  Rng rng(31);
  Eigen::MatrixXd x = uniform_matrix(rng, 100, 50, 0.5, 1.5);
  Eigen::MatrixXd copy = x;
  input_dropout_inplace(copy, 0.0, rng);
  CHECK((copy - x).cwiseAbs().maxCoeff() == 0.0);

  Eigen::MatrixXd dropped = x;
  input_dropout_inplace(dropped, 0.5, rng);
  int zeros = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (dropped(i, j) == 0.0)
        ++zeros;
      else
        CHECK(dropped(i, j) == doctest::Approx(2.0 * x(i, j)));
    }
  CHECK(zeros > 2200);
  CHECK(zeros < 2800);
  CHECK(dropped.mean() == doctest::Approx(x.mean()).epsilon(0.05));
  CHECK_THROWS_AS(input_dropout_inplace(dropped, 1.0, rng),
                  std::invalid_argument);
}

TEST_CASE("clamp_weights projects onto the max-norm ball") {
  DenseReluNet net = make_net({2, 4, 1}, 3);
  net.weights[0](0, 0) = 9.0;
  net.biases[0](1) = -7.0;
  clamp_weights(net, 1.5);
  CHECK(net.max_abs_weight() <= 1.5);
  CHECK(net.weights[0](0, 0) == 1.5);
  CHECK(net.biases[0](1) == -1.5);
}
