#include "i2c/errors.hpp"
#include "i2c/nn/checkpoint.hpp"
#include "i2c/nn/distribution.hpp"
#include "i2c/nn/layers.hpp"
#include "i2c/nn/optimizer.hpp"
#include "i2c/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace i2c;
using namespace i2c::nn;

namespace {

double leaky(double z) { return z > 0 ? z : kLeakySlope * z; }

// Plain nested-loop forward pass reading weights straight from the store.
std::vector<double> loop_forward(const ParameterStore& s, const std::string& prefix,
                                 const std::vector<int>& sizes, std::vector<double> x) {
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const auto& w = s.entry(s.index(prefix + ".l" + std::to_string(l) + ".weight")).values;
    const auto& b = s.entry(s.index(prefix + ".l" + std::to_string(l) + ".bias")).values;
    const int in = sizes[l], out = sizes[l + 1];
    std::vector<double> y(out);
    for (int r = 0; r < out; ++r) {
      double acc = b[r];
      for (int c = 0; c < in; ++c) acc += w[static_cast<std::size_t>(c) * out + r] * x[c];
      y[r] = (l + 2 < sizes.size()) ? leaky(acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

double weighted_sum(const Matrix& y, const Matrix& w) { return (y.array() * w.array()).sum(); }

}  // namespace

TEST_CASE("dense forward with zero parameters is zero") {
  ParameterStore s;
  Rng rng(1);
  Mlp net = Mlp::declare({{3, 5, 2}}, s, "net", rng);
  for (std::size_t e = 0; e < s.entry_count(); ++e) s.values(e).setZero();
  Vector out = forward(net, s, std::vector<double>{0.3, -2.0, 7.0});
  CHECK(out.isZero(0.0));
}

TEST_CASE("identity linear layer returns its input") {
  ParameterStore s;
  Rng rng(2);
  Dense d = Dense::declare(s, "id", 3, 3, rng);
  s.values(d.weight_index()).setIdentity();
  s.values(d.bias_index()).setZero();
  Matrix x(3, 2);
  x << 1, -4, 2.5, 0, -3, 9;
  CHECK(d.forward(s, x) == x);
}

TEST_CASE("random 2-4-3 network matches a loop oracle") {
  ParameterStore s;
  Rng rng(3);
  const std::vector<int> sizes{2, 4, 3};
  Mlp net = Mlp::declare({sizes}, s, "net", rng);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x{n(rng), n(rng)};
    Vector got = forward(net, s, x);
    auto want = loop_forward(s, "net", sizes, x);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(got[k] - want[k]) < 1e-12);
  }
}

TEST_CASE("forward rejects a wrong input size") {
  ParameterStore s;
  Rng rng(4);
  Mlp net = Mlp::declare({{3, 4, 1}}, s, "net", rng);
  CHECK_THROWS_AS(net.forward(s, Matrix::Zero(2, 1)), ConfigError);
  CHECK_THROWS_AS(Mlp::declare({{3, 1}}, s, "flat", rng), ConfigError);
}

TEST_CASE("backward of a constant loss leaves zero gradients") {
  ParameterStore s;
  Rng rng(5);
  Mlp net = Mlp::declare({{3, 4, 2}}, s, "net", rng);
  MlpTape tape;
  net.forward(s, Matrix::Random(3, 5), &tape);
  net.backward(s, tape, Matrix::Zero(2, 5));
  CHECK(s.grad_norm() == 0.0);
}

TEST_CASE("backward without forward is a state error") {
  ParameterStore s;
  Rng rng(6);
  Mlp net = Mlp::declare({{3, 4, 2}}, s, "net", rng);
  MlpTape tape;
  CHECK_THROWS_AS(net.backward(s, tape, Matrix::Zero(2, 1)), StateError);
}

TEST_CASE("sum of a linear layer has weight gradient equal to the broadcast input") {
  ParameterStore s;
  Rng rng(7);
  Dense d = Dense::declare(s, "lin", 3, 2, rng);
  Matrix x(3, 1);
  x << 0.5, -1.5, 2.0;
  d.backward(s, x, Matrix::Ones(2, 1));
  Matrix expect = Matrix::Ones(2, 1) * x.transpose();
  CHECK((s.grads(d.weight_index()) - expect).norm() == 0.0);
  CHECK(s.grads(d.bias_index()).isOnes(0.0));
}

TEST_CASE("mlp gradients match central differences") {
  for (Nonlinearity nl : {Nonlinearity::LeakyRelu, Nonlinearity::Tanh}) {
    ParameterStore s;
    Rng rng(8);
    Mlp net = Mlp::declare({{4, 6, 5, 3}, nl}, s, "net", rng);
    Matrix x = Matrix::Random(4, 7);
    Matrix w = Matrix::Random(3, 7);
    MlpTape tape;
    net.forward(s, x, &tape);
    net.backward(s, tape, w);
    const double h = 1e-5;
    for (std::size_t e = 0; e < s.entry_count(); ++e) {
      for (std::size_t k = 0; k < s.entry(e).size(); ++k) {
        double& v = s.entry(e).values[k];
        const double v0 = v;
        v = v0 + h;
        const double up = weighted_sum(net.forward(s, x), w);
        v = v0 - h;
        const double down = weighted_sum(net.forward(s, x), w);
        v = v0;
        const double numeric = (up - down) / (2 * h);
        const double analytic = s.entry(e).grads[k];
        CHECK(std::abs(analytic - numeric) <=
              1e-4 * std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
      }
    }
  }
}

TEST_CASE("lstm gradients match central differences for parameters and inputs") {
  ParameterStore s;
  Rng rng(9);
  Lstm lstm = Lstm::declare(s, "enc", 3, 4, 2, rng);
  std::vector<Matrix> steps{Matrix::Random(3, 3), Matrix::Random(3, 3), Matrix::Random(3, 3)};
  Eigen::RowVectorXd m0(3), m1(3), m2(3);
  m0 << 1, 1, 0;
  m1 << 1, 0, 0;
  m2 << 1, 0, 0;
  std::vector<Eigen::RowVectorXd> masks{m0, m1, m2};
  Matrix w = Matrix::Random(4, 3);
  LstmTape tape;
  lstm.forward(s, steps, masks, 3, &tape);
  auto dx = lstm.backward(s, &s, tape, w);
  auto loss = [&] { return weighted_sum(lstm.forward(s, steps, masks, 3), w); };
  const double h = 1e-5;
  for (std::size_t e = 0; e < s.entry_count(); ++e) {
    for (std::size_t k = 0; k < s.entry(e).size(); ++k) {
      double& v = s.entry(e).values[k];
      const double v0 = v;
      v = v0 + h;
      const double up = loss();
      v = v0 - h;
      const double down = loss();
      v = v0;
      const double numeric = (up - down) / (2 * h);
      const double analytic = s.entry(e).grads[k];
      CHECK(std::abs(analytic - numeric) <=
            1e-4 * std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
    }
  }
  for (std::size_t t = 0; t < steps.size(); ++t) {
    for (Eigen::Index k = 0; k < steps[t].size(); ++k) {
      double& v = steps[t].data()[k];
      const double v0 = v;
      v = v0 + h;
      const double up = loss();
      v = v0 - h;
      const double down = loss();
      v = v0;
      const double numeric = (up - down) / (2 * h);
      CHECK(std::abs(dx[t].data()[k] - numeric) <=
            1e-4 * std::max({std::abs(numeric), std::abs(dx[t].data()[k]), 1e-6}));
    }
  }
}

TEST_CASE("lstm forget-gate bias starts at one and empty input gives the zero state") {
  ParameterStore s;
  Rng rng(10);
  Lstm lstm = Lstm::declare(s, "enc", 2, 3, 2, rng);
  const auto& b = s.entry(s.index("enc.l0.bias")).values;
  for (int k = 3; k < 6; ++k) CHECK(b[k] == 1.0);
  CHECK(lstm.forward(s, {}, {}, 4).isZero(0.0));
}

TEST_CASE("softmax_temperature closed forms") {
  auto u = softmax_temperature(std::vector<double>{2.0, 2.0, 2.0}, 7.0);
  for (double p : u.probs) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  auto sharp = softmax_temperature(std::vector<double>{1.0, 0.0}, 1000.0);
  CHECK(sharp[0] > 1 - 1e-6);
  CHECK(sharp[1] < 1e-6);
  auto d = softmax_temperature(std::vector<double>{1.0, 0.0}, 1.0);
  CHECK(std::abs(d[0] - std::exp(1.0) / (std::exp(1.0) + 1.0)) < 1e-12);
}

TEST_CASE("softmax_temperature errors") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(softmax_temperature(std::vector<double>{0.0, inf}, 1.0), NumericError);
  CHECK_THROWS_AS(softmax_temperature(std::vector<double>{0.0, std::nan("")}, 1.0), NumericError);
  CHECK_THROWS_AS(softmax_temperature(std::vector<double>{0.0, 1.0}, 0.0), InputError);
}

TEST_CASE("softmax is a valid distribution and sharpens with lambda") {
  Rng rng(11);
  std::normal_distribution<double> n(0.0, 50.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> q(5);
    for (double& v : q) v = n(rng);
    const double lambda = 0.01 + uniform01(rng) * 20;
    auto d = softmax_temperature(q, lambda);
    CHECK(is_valid(d));
    auto lp = log_softmax_temperature(q, lambda);
    for (int k = 0; k < 5; ++k) {
      if (d[k] > 1e-300) CHECK(std::abs(std::exp(lp[k]) - d[k]) < 1e-12);
    }
  }
  std::vector<double> q{0.3, -0.1, 0.05};
  double last = 0.0;
  for (double lambda : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    const double m = softmax_temperature(q, lambda).max_probability();
    CHECK(m > last);
    last = m;
  }
}

TEST_CASE("kl_divergence closed forms and oracle") {
  Distribution p{{0.2, 0.3, 0.5}};
  CHECK(kl_divergence(p, p) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(kl_divergence(Distribution{{1.0, 0.0}}, Distribution{{0.5, 0.5}}) - std::log(2.0)) <
        1e-8);
  CHECK_THROWS_AS(kl_divergence(p, Distribution{{0.5, 0.5}}), ConfigError);

  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(5), b(5);
    double sa = 0, sb = 0;
    for (int k = 0; k < 5; ++k) {
      a[k] = 0.01 + uniform01(rng);
      b[k] = 0.01 + uniform01(rng);
      sa += a[k];
      sb += b[k];
    }
    double oracle = 0.0;
    for (int k = 0; k < 5; ++k) {
      a[k] /= sa;
      b[k] /= sb;
    }
    for (int k = 0; k < 5; ++k) oracle += a[k] * std::log(a[k] / b[k]);
    const double got = kl_divergence(Distribution{a}, Distribution{b});
    CHECK(std::abs(got - oracle) < 1e-12);
    CHECK(got >= 0.0);
  }
}

TEST_CASE("optimizer: zero gradients are a fixed point and sgd is exact") {
  ParameterStore s;
  s.add("w", {3}, {1.0, -2.0, 0.5});
  const auto before = s.entry(0).values;
  optimizer_step(s, 0.1);
  CHECK(s.entry(0).values == before);
  CHECK(s.version() == 1);

  s.entry(0).grads = {0.5, 1.0, -2.0};
  optimizer_step(s, 0.1, {OptimizerKind::Sgd});
  CHECK(s.entry(0).values[0] == 1.0 - 0.1 * 0.5);
  CHECK(s.entry(0).values[1] == -2.0 - 0.1 * 1.0);
  CHECK(s.entry(0).values[2] == 0.5 - 0.1 * -2.0);
  CHECK(s.grad_norm() == 0.0);
  CHECK(s.version() == 2);
}

TEST_CASE("adam minimizes a convex quadratic") {
  ParameterStore s;
  s.add("x", {2}, {1.0, -1.0});
  auto loss = [&] {
    const auto& v = s.entry(0).values;
    return v[0] * v[0] + 5.0 * v[1] * v[1];
  };
  const double initial = loss();
  std::vector<double> history;
  for (int step = 0; step < 100; ++step) {
    const auto& v = s.entry(0).values;
    s.entry(0).grads = {2.0 * v[0], 10.0 * v[1]};
    optimizer_step(s, 0.02);
    history.push_back(loss());
  }
  // Momentum makes single steps overshoot; the envelope over 10-step blocks must shrink.
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t start = 0; start < history.size(); start += 10) {
    const double block = *std::max_element(history.begin() + start, history.begin() + start + 10);
    CHECK(block <= previous);
    previous = block;
  }
  CHECK(history.back() < 1e-3 * initial);
}

TEST_CASE("optimizer refuses non-finite gradients and names the parameter") {
  ParameterStore s;
  s.add("good", {1}, {1.0});
  s.add("bad", {2}, {1.0, 2.0});
  s.entry(1).grads[1] = std::nan("");
  const auto before = s.entry(1).values;
  try {
    optimizer_step(s, 0.1);
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("bad") != std::string::npos);
  }
  CHECK(s.entry(1).values == before);
  CHECK(s.version() == 0);
}

TEST_CASE("gradient clipping caps the global norm") {
  ParameterStore s;
  s.add("a", {2}, {0.0, 0.0});
  s.entry(0).grads = {3.0, 4.0};
  CHECK(clip_grad_norm(s, 1.0) == doctest::Approx(5.0));
  CHECK(s.grad_norm() == doctest::Approx(1.0));
}

TEST_CASE("parameter store bookkeeping") {
  ParameterStore s;
  s.add("w", {2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(s.add("w", {1}, {0}), ConfigError);
  CHECK_THROWS_AS(s.add("v", {3}, {0, 1}), ConfigError);
  CHECK_THROWS_AS(s.index("missing"), ConfigError);
  ParameterStore target = s;
  s.entry(0).values = {3, 2, 1, 0};
  target.blend_towards(s, 0.25);
  CHECK(target.entry(0).values == nn::Buffer{1.5, 2.0, 2.5, 3.0});
}

TEST_CASE("checkpoint round trip is bit exact") {
  Checkpoint c;
  c.metadata["phase"] = "phase2";
  Rng rng(13);
  ParameterStore s;
  Mlp::declare({{3, 4, 2}}, s, "net", rng);
  s.entry(0).first_moment[0] = 0.125;
  s.set_version(17);
  c.stores["policy"] = s;
  const auto bytes = serialize_checkpoint(c);
  const auto back = deserialize_checkpoint(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(back.metadata.at("phase") == "phase2");
  CHECK(back.stores.at("policy").version() == 17);
  CHECK(back.stores.at("policy").entry(0).first_moment[0] == 0.125);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), ConfigError);
  CHECK_THROWS_AS(deserialize_checkpoint("not a checkpoint"), ConfigError);
}
