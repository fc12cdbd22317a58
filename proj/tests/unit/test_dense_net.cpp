#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <nmln/dense_net.hpp>
#include <nmln/errors.hpp>
#include <nmln/rng.hpp>

using namespace nmln;

namespace {

void randomize(DenseNet& net, Rng& rng) {
  for (auto& p : net.mutable_parameters()) p = 2.0 * uniform01(rng) - 1.0;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = 2.0 * uniform01(rng) - 1.0;
  return v;
}

double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    default: return x;
  }
}

// Independent forward pass straight from weight() and bias().
std::vector<double> manual_forward(const DenseNet& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    std::vector<double> y(net.widths()[l + 1]);
    for (int o = 0; o < net.widths()[l + 1]; ++o) {
      double s = net.bias(l, o);
      for (int i = 0; i < net.widths()[l]; ++i) s += net.weight(l, o, i) * x[i];
      y[o] = activate(net.activations()[l], s);
    }
    x = std::move(y);
  }
  return x;
}

double dot_output(const DenseNet& net, std::span<const double> input,
                  std::span<const double> cotangent) {
  Tape tape;
  const auto out = net_forward(net, input, tape);
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * cotangent[i];
  return s;
}

}  // namespace

TEST_CASE("construction rules") {
  CHECK_THROWS_AS(DenseNet({3}, {}), InvalidArgument);
  CHECK_THROWS_AS(DenseNet({3, 2}, {Activation::relu}), InvalidArgument);
  CHECK_THROWS_AS(DenseNet({3, 2, 1}, {Activation::relu}), InvalidArgument);
  const DenseNet net({3, 4, 2}, {Activation::relu, Activation::identity});
  CHECK(net.num_parameters() == 3 * 4 + 4 + 4 * 2 + 2);
  CHECK(parse_activation("sigmoid") == Activation::sigmoid);
  CHECK(to_string(Activation::relu) == "relu");
  CHECK_THROWS_AS(parse_activation("tanh"), InvalidArgument);
}

TEST_CASE("forward: zero parameters give zero output") {
  const DenseNet net({4, 5, 3}, {Activation::relu, Activation::identity});
  Tape tape;
  const std::vector<double> x{1, 0, 1, 1};
  for (double v : net_forward(net, x, tape)) CHECK(v == 0.0);
}

TEST_CASE("forward: single identity layer is an affine map") {
  DenseNet net({3, 2}, {Activation::identity});
  Rng rng(1);
  randomize(net, rng);
  const std::vector<double> x{0.5, -1.0, 2.0};
  Tape tape;
  const auto out = net_forward(net, x, tape);
  for (int o = 0; o < 2; ++o) {
    double expected = net.bias(0, o);
    for (int i = 0; i < 3; ++i) expected += net.weight(0, o, i) * x[i];
    CHECK(out[o] == doctest::Approx(expected).epsilon(1e-15));
  }
  CHECK_THROWS_AS(net_forward(net, std::vector<double>{1.0}, tape), InvalidArgument);
}

TEST_CASE("forward matches manual matrix arithmetic") {
  Rng rng(2);
  for (Activation a : {Activation::relu, Activation::sigmoid, Activation::identity}) {
    DenseNet net({6, 5, 4, 2}, {a, a, Activation::identity});
    randomize(net, rng);
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = random_vector(6, rng);
      Tape tape;
      const auto out = net_forward(net, x, tape);
      const auto expected = manual_forward(net, x);
      for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - expected[i]) < 1e-12);
    }
  }
}

TEST_CASE("backward: zero cotangent gives zero gradients") {
  Rng rng(3);
  DenseNet net({3, 4, 2}, {Activation::sigmoid, Activation::identity});
  randomize(net, rng);
  Tape tape;
  net_forward(net, random_vector(3, rng), tape);
  std::vector<double> pg(net.num_parameters(), 0.0), ig(3, 0.0);
  net_backward(net, tape, std::vector<double>{0.0, 0.0}, pg, ig);
  for (double g : pg) CHECK(g == 0.0);
  for (double g : ig) CHECK(g == 0.0);
}

TEST_CASE("backward: identity net input gradient is a weight row") {
  Rng rng(4);
  DenseNet net({3, 2}, {Activation::identity});
  randomize(net, rng);
  Tape tape;
  net_forward(net, random_vector(3, rng), tape);
  for (int j = 0; j < 2; ++j) {
    std::vector<double> cot(2, 0.0), pg(net.num_parameters(), 0.0), ig(3, 0.0);
    cot[j] = 1.0;
    net_backward(net, tape, cot, pg, ig);
    for (int i = 0; i < 3; ++i) CHECK(ig[i] == net.weight(0, j, i));
  }
}

TEST_CASE("backward accumulates and rejects stale tapes") {
  Rng rng(5);
  DenseNet net({2, 3, 1}, {Activation::sigmoid, Activation::identity});
  randomize(net, rng);
  Tape tape;
  net_forward(net, std::vector<double>{1.0, 0.0}, tape);
  std::vector<double> once(net.num_parameters(), 0.0), twice(net.num_parameters(), 0.0);
  net_backward(net, tape, std::vector<double>{1.0}, once, {});
  net_backward(net, tape, std::vector<double>{1.0}, twice, {});
  net_backward(net, tape, std::vector<double>{1.0}, twice, {});
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2.0 * once[i]));
  net.mutable_parameters()[0] += 0.1;
  CHECK_THROWS_AS(net_backward(net, tape, std::vector<double>{1.0}, once, {}), std::logic_error);
}

TEST_CASE("property: backward matches central differences") {
  Rng rng(6);
  constexpr double h = 1e-4;
  for (Activation a : {Activation::sigmoid, Activation::identity, Activation::relu}) {
    DenseNet net({5, 6, 4, 3}, {a, a, Activation::identity});
    randomize(net, rng);
    for (int trial = 0; trial < 5; ++trial) {
      const auto x = random_vector(5, rng);
      const auto cot = random_vector(3, rng);
      Tape tape;
      net_forward(net, x, tape);
      std::vector<double> pg(net.num_parameters(), 0.0), ig(5, 0.0);
      net_backward(net, tape, cot, pg, ig);

      auto check = [&](double analytic, double plus, double minus) {
        const double numeric = (plus - minus) / (2.0 * h);
        const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
        CHECK(std::abs(analytic - numeric) / scale < 1e-4);
      };
      for (std::size_t p = 0; p < net.num_parameters(); ++p) {
        DenseNet plus = net, minus = net;
        plus.mutable_parameters()[p] += h;
        minus.mutable_parameters()[p] -= h;
        check(pg[p], dot_output(plus, x, cot), dot_output(minus, x, cot));
      }
      for (std::size_t i = 0; i < x.size(); ++i) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        check(ig[i], dot_output(net, xp, cot), dot_output(net, xm, cot));
      }
    }
  }
}
