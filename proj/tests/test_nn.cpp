#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "risa/error.hpp"
#include "risa/nn.hpp"
#include "risa/rng.hpp"

using namespace risa;
using nn::Activation;
using nn::DenseNet;

namespace {

DenseNet single_layer(Matrix w, Vector b, Activation act) {
  std::vector<nn::DenseLayer> layers;
  layers.push_back({std::move(w), std::move(b), act});
  return DenseNet(std::move(layers));
}

// independent straight-line re-evaluation of the stored weights
Vector oracle_forward(const DenseNet& net, Vector x) {
  for (const auto& layer : net.layers()) {
    Vector out(layer.w.rows, 0.0);
    for (std::size_t i = 0; i < layer.w.rows; ++i) {
      double z = layer.b[i];
      for (std::size_t j = 0; j < layer.w.cols; ++j) z += layer.w(i, j) * x[j];
      switch (layer.act) {
        case Activation::linear: out[i] = z; break;
        case Activation::relu: out[i] = std::max(0.0, z); break;
        case Activation::softplus: out[i] = z > 30.0 ? z : std::log1p(std::exp(z)); break;
        case Activation::exponential: out[i] = std::exp(z); break;
      }
    }
    x = out;
  }
  return x;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

}  // namespace

TEST_CASE("identity single layer reproduces its input") {
  Matrix w(2, 2);
  w(0, 0) = 1.0;
  w(1, 1) = 1.0;
  DenseNet net = single_layer(std::move(w), Vector(2, 0.0), Activation::linear);
  const Vector out = net.evaluate({1.0, 2.0});
  CHECK(out == Vector{1.0, 2.0});
}

TEST_CASE("relu clamps a negative pre-activation") {
  Matrix w(1, 2);
  w(0, 0) = 1.0;
  w(0, 1) = -1.0;
  DenseNet net = single_layer(std::move(w), Vector(1, 0.0), Activation::relu);
  const Vector out = net.evaluate({2.0, 3.0});
  CHECK(out == Vector{0.0});  // 2 - 3 = -1 clamps to 0
}

TEST_CASE("seeded two-layer net matches a straight-line re-evaluation") {
  DenseNet net = DenseNet::make(3, {4, 2}, {Activation::relu, Activation::linear}, 99);
  const Vector x = {0.3, -1.2, 0.8};
  const Vector got = net.evaluate(x);
  const Vector want = oracle_forward(net, x);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i)
    CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("forward is pure and repeatable") {
  DenseNet net = DenseNet::make(4, {8, 3}, {Activation::softplus, Activation::linear}, 7);
  const Vector x = {0.1, 0.2, 0.3, 0.4};
  CHECK(net.evaluate(x) == net.evaluate(x));
  CHECK(net.forward(x) == net.evaluate(x));
}

TEST_CASE("forward rejects dimension mismatch and non-finite input") {
  DenseNet net = DenseNet::make(2, {2}, {Activation::linear}, 1);
  CHECK_THROWS_AS(net.evaluate({1.0}), ContractViolation);
  CHECK_THROWS_AS(net.evaluate({1.0, std::nan("")}), ContractViolation);
}

TEST_CASE("linear regression gradient matches the closed form") {
  // 1-layer linear net, squared-error loss: dL/dW = 2*(pred - target)*x
  Matrix w(1, 2);
  w(0, 0) = 0.5;
  w(0, 1) = -0.25;
  DenseNet net = single_layer(std::move(w), Vector(1, 0.1), Activation::linear);
  const Vector x = {1.5, -2.0};
  const double target = 0.7;
  const double pred = net.forward(x)[0];
  const nn::GradientTape tape = net.backward({2.0 * (pred - target)});
  CHECK(tape.dw[0](0, 0) == doctest::Approx(2.0 * (pred - target) * x[0]).epsilon(1e-14));
  CHECK(tape.dw[0](0, 1) == doctest::Approx(2.0 * (pred - target) * x[1]).epsilon(1e-14));
  CHECK(tape.db[0][0] == doctest::Approx(2.0 * (pred - target)).epsilon(1e-14));
}

TEST_CASE("analytic gradients match central finite differences") {
  const double h = 1e-5;
  const std::vector<std::vector<Activation>> shapes = {
      {Activation::relu, Activation::linear},
      {Activation::softplus, Activation::softplus},
      {Activation::relu, Activation::relu, Activation::softplus},
  };
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t s = 0; s < shapes.size(); ++s) {
    const auto& acts = shapes[s];
    std::vector<std::size_t> widths(acts.size(), 5);
    widths.back() = 3;
    DenseNet net = DenseNet::make(4, widths, acts, 1000 + s);
    Vector x(4), c(3);
    for (double& v : x) v = unit(rng);
    for (double& v : c) v = unit(rng);

    // scalar loss L = c . net(x)
    net.forward(x);
    const nn::GradientTape tape = net.backward(c);

    auto loss_at = [&](const DenseNet& n) {
      const Vector out = n.evaluate(x);
      double acc = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) acc += c[i] * out[i];
      return acc;
    };
    double worst = 0.0;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      for (std::size_t i = 0; i < net.layers()[l].w.data.size(); ++i) {
        DenseNet plus = net, minus = net;
        plus.layers()[l].w.data[i] += h;
        minus.layers()[l].w.data[i] -= h;
        const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
        worst = std::max(worst, rel_err(tape.dw[l].data[i], fd));
      }
      for (std::size_t i = 0; i < net.layers()[l].b.size(); ++i) {
        DenseNet plus = net, minus = net;
        plus.layers()[l].b[i] += h;
        minus.layers()[l].b[i] -= h;
        const double fd = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
        worst = std::max(worst, rel_err(tape.db[l][i], fd));
      }
    }
    // input gradient too
    for (std::size_t i = 0; i < x.size(); ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const Vector op = net.evaluate(xp), om = net.evaluate(xm);
      double lp = 0.0, lm = 0.0;
      for (std::size_t j = 0; j < op.size(); ++j) {
        lp += c[j] * op[j];
        lm += c[j] * om[j];
      }
      worst = std::max(worst, rel_err(tape.dinput[i], (lp - lm) / (2.0 * h)));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("zero upstream gradient gives an all-zero tape") {
  DenseNet net = DenseNet::make(3, {4, 2}, {Activation::relu, Activation::linear}, 5);
  net.forward({0.5, 0.5, 0.5});
  const nn::GradientTape tape = net.backward(Vector(2, 0.0));
  for (const auto& m : tape.dw)
    for (double v : m.data) CHECK(v == 0.0);
  for (const auto& v : tape.db)
    for (double b : v) CHECK(b == 0.0);
  for (double v : tape.dinput) CHECK(v == 0.0);
}

TEST_CASE("backward before any forward is a state error") {
  DenseNet net = DenseNet::make(2, {2}, {Activation::linear}, 3);
  CHECK_THROWS_AS(net.backward({1.0, 1.0}), StateError);
}

TEST_CASE("tape shapes mirror the owning network") {
  DenseNet net = DenseNet::make(3, {7, 2}, {Activation::relu, Activation::linear}, 11);
  const nn::GradientTape tape = net.zero_tape();
  REQUIRE(tape.dw.size() == net.layers().size());
  for (std::size_t l = 0; l < tape.dw.size(); ++l) {
    CHECK(tape.dw[l].rows == net.layers()[l].w.rows);
    CHECK(tape.dw[l].cols == net.layers()[l].w.cols);
    CHECK(tape.db[l].size() == net.layers()[l].b.size());
  }
  CHECK(tape.dinput.size() == net.input_dim());
}

TEST_CASE("sgd_step arithmetic") {
  Matrix w(1, 1);
  w(0, 0) = 1.0;
  DenseNet net = single_layer(std::move(w), Vector(1, 0.0), Activation::linear);
  nn::GradientTape tape = net.zero_tape();
  tape.dw[0](0, 0) = 2.0;

  SUBCASE("lr = 0 leaves parameters unchanged") {
    nn::sgd_step(net, tape, 0.0);
    CHECK(net.layers()[0].w(0, 0) == 1.0);
  }
  SUBCASE("w=1, grad=2, lr=0.1 -> w=0.8") {
    nn::sgd_step(net, tape, 0.1);
    CHECK(net.layers()[0].w(0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("negative lr is a contract violation") {
    CHECK_THROWS_AS(nn::sgd_step(net, tape, -0.1), ContractViolation);
  }
  SUBCASE("non-finite gradient raises a divergence error") {
    tape.dw[0](0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(nn::sgd_step(net, tape, 0.1), DivergenceError);
  }
}

TEST_CASE("sgd converges to the analytic minimizer of a convex quadratic") {
  // samples (x=1 -> 3), (x=-1 -> 1); least-squares minimizer is w=1, b=2
  Matrix w(1, 1);
  w(0, 0) = -0.3;
  DenseNet net = single_layer(std::move(w), Vector(1, 0.2), Activation::linear);
  const std::vector<std::pair<double, double>> samples = {{1.0, 3.0}, {-1.0, 1.0}};
  for (int iter = 0; iter < 4000; ++iter) {
    nn::GradientTape total = net.zero_tape();
    for (const auto& [x, t] : samples) {
      const double pred = net.forward({x})[0];
      total.add(net.backward({2.0 * (pred - t)}));
    }
    total.scale(0.5);
    nn::sgd_step(net, total, 0.1);
  }
  CHECK(std::abs(net.layers()[0].w(0, 0) - 1.0) < 1e-6);
  CHECK(std::abs(net.layers()[0].b[0] - 2.0) < 1e-6);
}

TEST_CASE("momentum optimizer reaches the same fixed point") {
  DenseNet net = DenseNet::make(2, {1}, {Activation::linear}, 21);
  nn::SgdOptimizer opt(0.05, 0.9);
  for (int iter = 0; iter < 2000; ++iter) {
    const double pred = net.forward({1.0, -1.0})[0];
    opt.step(net, net.backward({2.0 * (pred - 0.5)}));
  }
  CHECK(net.evaluate({1.0, -1.0})[0] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("identical seed and config give bit-identical parameters") {
  const DenseNet a = DenseNet::make(5, {8, 4}, {Activation::relu, Activation::linear}, 123);
  const DenseNet b = DenseNet::make(5, {8, 4}, {Activation::relu, Activation::linear}, 123);
  for (std::size_t l = 0; l < a.layers().size(); ++l) {
    CHECK(a.layers()[l].w.data == b.layers()[l].w.data);
    CHECK(a.layers()[l].b == b.layers()[l].b);
  }
  const DenseNet c = DenseNet::make(5, {8, 4}, {Activation::relu, Activation::linear}, 124);
  CHECK(a.layers()[0].w.data != c.layers()[0].w.data);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  DenseNet net = DenseNet::make(6, {5, 3}, {Activation::softplus, Activation::linear}, 77);
  const std::string path = "nn_checkpoint_test.bin";
  nn::save_checkpoint(net, path);
  const DenseNet loaded = nn::load_checkpoint(path);
  REQUIRE(loaded.layers().size() == net.layers().size());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    CHECK(loaded.layers()[l].w.data == net.layers()[l].w.data);
    CHECK(loaded.layers()[l].b == net.layers()[l].b);
    CHECK(loaded.layers()[l].act == net.layers()[l].act);
  }
  std::remove(path.c_str());
}

TEST_CASE("constructor validates chained dimensions") {
  std::vector<nn::DenseLayer> layers;
  layers.push_back({Matrix(3, 2), Vector(3, 0.0), Activation::relu});
  layers.push_back({Matrix(2, 4), Vector(2, 0.0), Activation::linear});  // 4 != 3
  CHECK_THROWS_AS(DenseNet(std::move(layers)), ContractViolation);
}
