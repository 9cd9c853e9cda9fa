#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "road/nn.hpp"
#include "support/oracles.hpp"

using namespace road;
using Catch::Approx;

namespace {

DenseNetwork small_net(std::uint64_t seed, std::size_t in = 3,
                       std::vector<std::size_t> hidden = {5, 4}) {
  RngState rng(seed);
  std::vector<LayerSpec> specs;
  std::size_t prev = in;
  for (std::size_t h : hidden) {
    specs.push_back({prev, h, Activation::ReLU});
    prev = h;
  }
  specs.push_back({prev, 1, Activation::Sigmoid});
  return init_network(specs, rng);
}

Matrix random_inputs(RngState& rng, std::size_t n, std::size_t d, double scale = 1.0) {
  Matrix X(n, d);
  for (double& v : X.a) v = rng.uniform(-scale, scale);
  return X;
}

// Finite differences are only meaningful away from the relu kink; with zero
// bias init a sample that turns a whole layer off lands exactly on it.
double min_abs_relu_z(const DenseNetwork& net, const Matrix& X) {
  ForwardTrace tr;
  forward(net, X, &tr);
  double zmin = 1e300;
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    if (net.layers[l].act == Activation::ReLU)
      for (double z : tr.z[l].a) zmin = std::min(zmin, std::abs(z));
  return zmin;
}

}  // namespace

TEST_CASE("initialization respects the fan-based bound and zeroes biases") {
  RngState rng(42);
  const auto net = init_network({{2, 1, Activation::Sigmoid}}, rng);
  const double bound = std::sqrt(6.0 / 3.0);
  REQUIRE(net.layers.size() == 1);
  for (double w : net.layers[0].W.a) {
    REQUIRE(w <= bound);
    REQUIRE(w >= -bound);
  }
  for (double b : net.layers[0].b) REQUIRE(b == 0.0);
}

TEST_CASE("initialization is deterministic in the seed") {
  const auto a = small_net(7);
  const auto b = small_net(7);
  const auto c = small_net(8);
  REQUIRE(flatten_params(a) == flatten_params(b));
  REQUIRE(flatten_params(a) != flatten_params(c));
}

TEST_CASE("initialization draws differ across layers and positions") {
  const auto net = small_net(3, 6, {8, 8});
  const auto flat = flatten_params(net);
  double min_w = 1e9, max_w = -1e9;
  for (double v : flat) {
    min_w = std::min(min_w, v);
    max_w = std::max(max_w, v);
  }
  REQUIRE(max_w > min_w);  // not a constant fill
}

TEST_CASE("mismatched layer chain is rejected") {
  RngState rng(0);
  REQUIRE_THROWS_AS(init_network({{3, 4, Activation::ReLU}, {5, 1, Activation::Sigmoid}}, rng),
                    ConfigError);
  REQUIRE_THROWS_AS(init_network({}, rng), ConfigError);
  REQUIRE_THROWS_AS(init_network({{0, 4, Activation::ReLU}}, rng), ConfigError);
}

TEST_CASE("zero-weight sigmoid network outputs one half") {
  RngState rng(0);
  auto net = init_network({{4, 1, Activation::Sigmoid}}, rng);
  for (double& w : net.layers[0].W.a) w = 0.0;
  Matrix X(3, 4, 1.5);
  const auto out = forward_scores(net, X);
  for (double v : out) REQUIRE(v == 0.5);
}

TEST_CASE("identity layer with the identity matrix reproduces its input") {
  DenseNetwork net;
  DenseLayer layer;
  layer.act = Activation::Identity;
  layer.W = Matrix(3, 3);
  for (std::size_t i = 0; i < 3; ++i) layer.W(i, i) = 1.0;
  layer.b.assign(3, 0.0);
  net.layers.push_back(layer);
  RngState rng(5);
  const Matrix X = random_inputs(rng, 4, 3);
  const Matrix out = forward(net, X);
  REQUIRE(out.a == X.a);
}

TEST_CASE("forward agrees with a straight-line per-sample recomputation") {
  const auto net = small_net(11, 4, {6, 5});
  RngState rng(12);
  const Matrix X = random_inputs(rng, 9, 4);
  const Matrix out = forward(net, X);

  for (std::size_t i = 0; i < X.rows; ++i) {
    std::vector<double> a(X.row(i), X.row(i) + X.cols);
    for (const auto& layer : net.layers) {
      std::vector<double> next(layer.W.rows);
      for (std::size_t j = 0; j < layer.W.rows; ++j) {
        double z = layer.b[j];
        for (std::size_t k = 0; k < layer.W.cols; ++k) z += layer.W(j, k) * a[k];
        switch (layer.act) {
          case Activation::ReLU: next[j] = z > 0.0 ? z : 0.0; break;
          case Activation::Sigmoid: next[j] = 1.0 / (1.0 + std::exp(-z)); break;
          case Activation::Identity: next[j] = z; break;
        }
      }
      a = std::move(next);
    }
    REQUIRE(out(i, 0) == Approx(a[0]).epsilon(1e-12));
  }
}

TEST_CASE("sigmoid outputs stay strictly inside (0,1)") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto net = small_net(seed);
    RngState rng(seed + 100);
    const Matrix X = random_inputs(rng, 50, 3, 5.0);
    for (double v : forward_scores(net, X)) {
      REQUIRE(v > 0.0);
      REQUIRE(v < 1.0);
    }
  }
}

TEST_CASE("forward rejects wrong input width") {
  const auto net = small_net(1);
  Matrix X(2, 5, 0.0);
  REQUIRE_THROWS_AS(forward(net, X), NumericError);
}

TEST_CASE("zero output gradient produces zero parameter gradients") {
  const auto net = small_net(21);
  RngState rng(22);
  const Matrix X = random_inputs(rng, 6, 3);
  ForwardTrace tr;
  forward(net, X, &tr);
  const Matrix d_out(6, 1, 0.0);
  const auto grads = backward(net, tr, d_out);
  for (double v : flatten_grads(grads)) REQUIRE(v == 0.0);
}

TEST_CASE("single identity layer gradient has a closed form") {
  // J = sum of outputs => dW = ones^T X (column sums), db = n
  DenseNetwork net;
  DenseLayer layer;
  layer.act = Activation::Identity;
  layer.W = Matrix(1, 2);
  layer.W(0, 0) = 0.3;
  layer.W(0, 1) = -0.7;
  layer.b.assign(1, 0.1);
  net.layers.push_back(layer);

  Matrix X(3, 2);
  X(0, 0) = 1.0; X(0, 1) = 2.0;
  X(1, 0) = 3.0; X(1, 1) = 4.0;
  X(2, 0) = 5.0; X(2, 1) = 6.0;
  ForwardTrace tr;
  forward(net, X, &tr);
  const Matrix d_out(3, 1, 1.0);
  Matrix d_in;
  const auto grads = backward(net, tr, d_out, &d_in);
  REQUIRE(grads.dW[0](0, 0) == Approx(9.0));
  REQUIRE(grads.dW[0](0, 1) == Approx(12.0));
  REQUIRE(grads.db[0][0] == Approx(3.0));
  // dJ/dX row i = W
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(d_in(i, 0) == Approx(0.3));
    REQUIRE(d_in(i, 1) == Approx(-0.7));
  }
}

TEST_CASE("parameter gradients match central finite differences") {
  int tested = 0;
  for (std::uint64_t seed = 0; tested < 8 && seed < 64; ++seed) {
    auto net = small_net(seed, 4, {6, 5});
    RngState rng(seed * 13 + 5);
    const Matrix X = random_inputs(rng, 12, 4);
    if (min_abs_relu_z(net, X) < 1e-3) continue;  // too close to a kink
    Matrix C(12, 1);  // fixed random mixing of the outputs into a scalar
    for (double& v : C.a) v = rng.uniform(-1.0, 1.0);

    auto objective = [&]() {
      const Matrix out = forward(net, X);
      double acc = 0.0;
      for (std::size_t i = 0; i < out.a.size(); ++i) acc += C.a[i] * out.a[i];
      return acc;
    };
    const auto fd = oracle::fd_gradient(net, objective);

    ForwardTrace tr;
    forward(net, X, &tr);
    const auto analytic = flatten_grads(backward(net, tr, C));
    REQUIRE(oracle::relative_error(fd, analytic) < 1e-6);
    ++tested;
  }
  REQUIRE(tested == 8);
}

TEST_CASE("input gradients match central finite differences") {
  auto net = small_net(31, 3, {5, 4});
  RngState rng(32);
  Matrix X = random_inputs(rng, 7, 3);
  REQUIRE(min_abs_relu_z(net, X) > 1e-3);  // fixture must stay off the kink
  Matrix C(7, 1);
  for (double& v : C.a) v = rng.uniform(-1.0, 1.0);

  auto objective = [&]() {
    const Matrix out = forward(net, X);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.a.size(); ++i) acc += C.a[i] * out.a[i];
    return acc;
  };
  std::vector<double> fd(X.a.size());
  for (std::size_t i = 0; i < X.a.size(); ++i) {
    const double saved = X.a[i];
    const double h = 1e-5 * std::max(1.0, std::abs(saved));
    X.a[i] = saved + h;
    const double jp = objective();
    X.a[i] = saved - h;
    const double jm = objective();
    X.a[i] = saved;
    fd[i] = (jp - jm) / (2.0 * h);
  }
  ForwardTrace tr;
  forward(net, X, &tr);
  Matrix d_in;
  backward(net, tr, C, &d_in);
  REQUIRE(oracle::relative_error(fd, d_in.a) < 1e-6);
}

TEST_CASE("sgd arithmetic") {
  DenseNetwork net;
  DenseLayer layer;
  layer.act = Activation::Identity;
  layer.W = Matrix(1, 1);
  layer.W(0, 0) = 1.0;
  layer.b.assign(1, 0.5);
  net.layers.push_back(layer);

  GradientSet g;
  g.dW.emplace_back(1, 1);
  g.dW[0](0, 0) = 2.0;
  g.db.push_back({4.0});

  SECTION("zero learning rate is a no-op") {
    sgd_step(net, g, 0.0);
    REQUIRE(net.layers[0].W(0, 0) == 1.0);
    REQUIRE(net.layers[0].b[0] == 0.5);
  }
  SECTION("one step moves against the gradient") {
    sgd_step(net, g, 0.1);
    REQUIRE(net.layers[0].W(0, 0) == Approx(0.8));
    REQUIRE(net.layers[0].b[0] == Approx(0.1));
  }
  SECTION("two half steps equal one full step") {
    auto net2 = net;
    sgd_step(net, g, 0.05);
    sgd_step(net, g, 0.05);
    sgd_step(net2, g, 0.1);
    REQUIRE(net.layers[0].W(0, 0) == Approx(net2.layers[0].W(0, 0)));
  }
}

TEST_CASE("binary cross entropy values and clamping") {
  SECTION("coin-flip prediction scores ln 2") {
    const auto res = binary_cross_entropy({0.5, 0.5}, {0, 1});
    REQUIRE(res.mean == Approx(std::log(2.0)));
  }
  SECTION("perfect and inverted predictions hit the clamp, stay finite") {
    const auto res = binary_cross_entropy({1.0, 0.0}, {1, 0});
    REQUIRE(res.per_sample[0] == Approx(-std::log(1.0 - 1e-7)));
    REQUIRE(std::isfinite(res.mean));
    const auto bad = binary_cross_entropy({0.0, 1.0}, {1, 0});
    REQUIRE(bad.per_sample[0] == Approx(-std::log(1e-7)));
    REQUIRE(bad.d_mean_dp[0] == 0.0);  // flat inside the clamp
  }
  SECTION("weights scale the mean linearly") {
    const std::vector<double> w{2.0, 0.0};
    const auto res = binary_cross_entropy({0.3, 0.9}, {1, 0}, &w);
    REQUIRE(res.mean == Approx(-std::log(0.3)));
  }
  SECTION("size mismatches are rejected") {
    REQUIRE_THROWS_AS(binary_cross_entropy({0.5}, {0, 1}), NumericError);
    const std::vector<double> w{1.0};
    REQUIRE_THROWS_AS(binary_cross_entropy({0.5, 0.5}, {0, 1}, &w), NumericError);
  }
  SECTION("gradient matches finite differences away from the clamp") {
    const std::vector<int> t{1, 0, 1};
    std::vector<double> p{0.3, 0.6, 0.8};
    const auto res = binary_cross_entropy(p, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double h = 1e-7;
      auto pp = p, pm = p;
      pp[i] += h;
      pm[i] -= h;
      const double fd = (binary_cross_entropy(pp, t).mean - binary_cross_entropy(pm, t).mean) /
                        (2.0 * h);
      REQUIRE(res.d_mean_dp[i] == Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("flatten and unflatten round-trip") {
  auto net = small_net(55);
  const auto flat = flatten_params(net);
  auto copy = net;
  for (auto& layer : copy.layers)
    for (double& w : layer.W.a) w = 0.0;
  unflatten_params(copy, flat);
  REQUIRE(flatten_params(copy) == flat);
  REQUIRE_THROWS_AS(unflatten_params(net, std::vector<double>(3, 0.0)), std::exception);
}

TEST_CASE("forward is bitwise repeatable") {
  const auto net = small_net(77);
  RngState rng(78);
  const Matrix X = random_inputs(rng, 20, 3);
  const auto a = forward_scores(net, X);
  const auto b = forward_scores(net, X);
  REQUIRE(a == b);
}
