#include "i2c/causal/causal.hpp"
#include "i2c/causal/dataset.hpp"
#include "i2c/envs/environment.hpp"
#include "i2c/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace i2c;
using namespace i2c::causal;
using i2c::testing::TableCritic;

namespace {

JointAction random_action(int agents, int actions, Rng& rng) {
  JointAction a(static_cast<std::size_t>(agents));
  for (int& x : a) x = static_cast<int>(rng() % actions);
  return a;
}

class UniformPolicy : public JointPolicy {
 public:
  UniformPolicy(int agents, int actions) : agents_(agents), actions_(actions) {}
  JointAction sample(const envs::JointObservation&, Rng& rng) const override {
    return random_action(agents_, actions_, rng);
  }

 private:
  int agents_, actions_;
};

// Q = base(a) + bonus * (number of messages) on agent 0's action 2.
class CountingMessageCritic : public MessageActionValue {
 public:
  explicit CountingMessageCritic(double bonus) : bonus_(bonus) {}
  int num_agents() const override { return 2; }
  int num_actions() const override { return 3; }
  int encoding_size() const override { return 1; }
  std::vector<double> encode(const comms::MessageBundle& b) const override {
    return {static_cast<double>(b.size())};
  }
  std::vector<double> absent_encoding() const override { return {0.0}; }
  std::vector<double> evaluate(const envs::JointObservation&,
                               std::span<const std::vector<double>> enc,
                               std::span<const JointAction> actions) const override {
    std::vector<double> out;
    for (const auto& a : actions) {
      double q = 0.1 * a[0] - 0.05 * a[1] + 0.02 * a[0] * a[1];
      if (a[0] == 2) q += bonus_ * enc[0][0];
      out.push_back(q);
    }
    return out;
  }

 private:
  double bonus_;
};

CausalDataset tenths() {
  CausalDataset d;
  d.env = "coop-nav";
  d.num_agents = 3;
  d.max_visible = 2;
  for (int k = 1; k <= 100; ++k) d.samples.push_back({0, 1, 0, {0.0, 1.0}, 0.1 * k, 0});
  return d;
}

}  // namespace

TEST_CASE("conditional distribution on a hand-built two-agent table") {
  // Q[a0 + 2 a1]
  TableCritic q(2, 2, {0.0, 1.0, 0.5, -0.5});
  auto o = testing::blank_observation(2, 1);
  auto p = conditional_policy_dist(q, 0, {0, 1}, o, 1.0);
  const double e0 = std::exp(0.5), e1 = std::exp(-0.5);
  CHECK(std::abs(p[0] - e0 / (e0 + e1)) < 1e-12);
  CHECK(std::abs(p[1] - e1 / (e0 + e1)) < 1e-12);
}

TEST_CASE("a critic constant in a_i gives a uniform conditional") {
  testing::FunctionCritic q(3, 3, [](const JointAction& a) { return 2.0 * a[1] - a[2]; });
  auto o = testing::blank_observation(3, 1);
  auto p = conditional_policy_dist(q, 0, {0, 2, 1}, o, 10.0);
  for (double v : p.probs) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("larger lambda sharpens the conditional") {
  Rng rng(1);
  auto q = TableCritic::random(3, 3, rng);
  auto o = testing::blank_observation(3, 1);
  const JointAction a{0, 1, 2};
  CHECK(conditional_policy_dist(q, 1, a, o, 10.0).max_probability() >
        conditional_policy_dist(q, 1, a, o, 1.0).max_probability());
}

TEST_CASE("causal effect matches exhaustive enumeration") {
  Rng rng(2);
  auto o = testing::blank_observation(3, 1);
  for (int trial = 0; trial < 100; ++trial) {
    auto q = TableCritic::random(3, 3, rng);
    const auto a = random_action(3, 3, rng);
    for (double lambda : {1.0, 10.0}) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          if (i == j) continue;
          auto cond = conditional_policy_dist(q, i, a, o, lambda);
          auto marg = marginal_policy_dist(q, i, j, a, o, lambda);
          auto bc = testing::brute_force_conditional(q, i, a, lambda);
          auto bm = testing::brute_force_marginal(q, i, j, a, lambda);
          for (int k = 0; k < 3; ++k) {
            CHECK(std::abs(cond[k] - bc[k]) < 1e-10);
            CHECK(std::abs(marg[k] - bm[k]) < 1e-10);
          }
          CHECK(nn::is_valid(marg));
          const double got = causal_effect(q, i, j, a, o, lambda);
          CHECK(std::abs(got - testing::brute_force_effect(q, i, j, a, lambda)) < 1e-10);
          CHECK(got >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("batched effects equal one-at-a-time effects with one critic call") {
  Rng rng(3);
  auto q = TableCritic::random(4, 3, rng);
  auto o = testing::blank_observation(4, 1);
  const auto a = random_action(4, 3, rng);
  const std::vector<int> targets{0, 2, 3};
  q.calls = 0;
  const auto batch = causal_effects(q, 1, targets, a, o, 10.0);
  CHECK(q.calls == 1);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    CHECK(batch[k] == doctest::Approx(causal_effect(q, 1, targets[k], a, o, 10.0)).epsilon(1e-12));
  }
}

TEST_CASE("separable critics have zero effect and are directional") {
  Rng rng(4);
  auto o = testing::blank_observation(3, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const int j = static_cast<int>(rng() % 3);
    auto q = TableCritic::separable(3, 3, j, rng);
    const auto a = random_action(3, 3, rng);
    for (int i = 0; i < 3; ++i) {
      if (i == j) continue;
      CHECK(causal_effect(q, i, j, a, o, 10.0) < 1e-8);
      auto marg = marginal_policy_dist(q, i, j, a, o, 10.0);
      auto cond = conditional_policy_dist(q, i, a, o, 10.0);
      for (int k = 0; k < 3; ++k) CHECK(std::abs(marg[k] - cond[k]) < 1e-10);
    }
  }
  // Agent 1's value depends on agent 0 but agent 0's value ignores agent 1
  // only through a separable term; effects need not agree in both directions.
  testing::FunctionCritic asym(2, 2, [](const JointAction& a) {
    return (a[0] == a[1] ? 1.0 : 0.0) + 0.7 * a[0];
  });
  auto o2 = testing::blank_observation(2, 1);
  const double e01 = causal_effect(asym, 0, 1, {0, 1}, o2, 5.0);
  const double e10 = causal_effect(asym, 1, 0, {0, 1}, o2, 5.0);
  CHECK(e01 > 0.0);
  CHECK(e10 > 0.0);
  CHECK(e01 != doctest::Approx(e10));
}

TEST_CASE("invalid causal queries") {
  Rng rng(5);
  auto q = TableCritic::random(3, 3, rng);
  auto o = testing::blank_observation(3, 1);
  CHECK_THROWS_AS(marginal_policy_dist(q, 1, 1, {0, 0, 0}, o, 10.0), InputError);
  CHECK_THROWS_AS(causal_effect(q, 0, 1, {0, 0}, o, 10.0), ConfigError);
  CHECK_THROWS_AS(causal_effect(q, 0, 1, {0, 0, 0}, testing::blank_observation(2, 1), 10.0),
                  ConfigError);
}

TEST_CASE("message causal effect") {
  auto o = testing::blank_observation(2, 3);
  const std::vector<comms::MessageBundle> two{{{1, {1, 2, 3}}, {1, {4, 5, 6}}}, {}};
  const std::vector<comms::MessageBundle> none{{}, {}};

  CountingMessageCritic blind(0.0);
  CHECK(message_causal_effect(blind, 0, {1, 0}, two, o, 10.0) < 1e-12);

  CountingMessageCritic informed(0.3);
  CHECK(message_causal_effect(informed, 0, {1, 0}, none, o, 10.0) == 0.0);

  const double got = message_causal_effect(informed, 0, {1, 0}, two, o, 10.0);
  std::vector<double> with{0.0, 0.1, 0.2 + 0.6}, without{0.0, 0.1, 0.2};
  auto p = nn::softmax_temperature(with, 10.0);
  auto m = nn::softmax_temperature(without, 10.0);
  double kl = 0.0;
  for (int k = 0; k < 3; ++k) kl += p[k] * std::log(p[k] / m[k]);
  CHECK(std::abs(got - kl) < 1e-12);
  CHECK(got > 0.0);

  CHECK_THROWS_AS(message_causal_effect(informed, 0, {1, 0}, std::vector<comms::MessageBundle>{{}},
                                        o, 10.0),
                  ConfigError);
}

TEST_CASE("collect_dataset produces one sample per observed pair") {
  auto env = envs::make_environment(envs::EnvConfig::cooperative_navigation());
  testing::FunctionCritic q(7, 5, [](const JointAction& a) {
    return 0.1 * a[0] * a[1] - 0.05 * a[2] + 0.01 * a[3] * a[6];
  });
  UniformPolicy pi(7, 5);
  CollectOptions opt;
  opt.episodes = 1;
  opt.seed = 9;
  opt.source = "unit";
  const auto d = collect_dataset(pi, q, *env, opt);
  CHECK(d.size() == 40 * 7 * 3);
  CHECK(d.env == "coop-nav");
  CHECK(d.source == "unit");
  for (const auto& s : d.samples) {
    CHECK(s.effect >= 0.0);
    CHECK(s.target != s.observer);
    CHECK(s.observation.size() == static_cast<std::size_t>(env->obs_dim()));
  }
  const auto again = collect_dataset(pi, q, *env, opt);
  REQUIRE(again.size() == d.size());
  for (std::size_t k = 0; k < d.size(); ++k) {
    CHECK(again.samples[k].effect == d.samples[k].effect);
    CHECK(again.samples[k].observation == d.samples[k].observation);
  }
  double lo = 1e9, hi = -1e9;
  for (const auto& s : d.samples) {
    lo = std::min(lo, s.effect);
    hi = std::max(hi, s.effect);
  }
  CHECK(hi > lo);
}

TEST_CASE("nearest-rank percentile") {
  std::vector<double> v;
  for (int k = 1; k <= 100; ++k) v.push_back(0.1 * k);
  CHECK(percentile(v, 70.0) == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(percentile(v, 90.0) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(percentile({5.0}, 50.0) == 5.0);
  CHECK(percentile({3.0, 1.0, 2.0}, 50.0) == 2.0);
  CHECK(percentile({1.0, 2.0, 3.0, 4.0}, 50.0) == 2.0);
  CHECK_THROWS_AS(percentile({}, 50.0), InputError);
  CHECK_THROWS_AS(percentile({1.0}, 0.0), InputError);
  CHECK_THROWS_AS(percentile({1.0}, 100.0), InputError);
}

TEST_CASE("delta selection and labelling") {
  auto d = tenths();
  const std::vector<double> grid{90.0, 80.0, 70.0};
  auto deltas = percentile_deltas(d, grid);
  CHECK(deltas.at(70.0) < deltas.at(80.0));
  CHECK(deltas.at(80.0) < deltas.at(90.0));

  auto first = select_delta(d, grid);
  CHECK(first.percentile == 90.0);
  auto best = select_delta(d, grid, [](double delta) { return -std::abs(delta - 8.0); });
  CHECK(best.percentile == 80.0);
  CHECK(best.scores.size() == 3);
  auto tie = select_delta(d, grid, [](double) { return 1.0; });
  CHECK(tie.percentile == 90.0);

  auto same = d;
  for (auto& s : same.samples) s.effect = 0.25;
  for (auto& [p, delta] : percentile_deltas(same, grid)) CHECK(delta == 0.25);

  CHECK(positive_fraction(label(d, 0.0)) == 1.0);
  CHECK(positive_fraction(label(d, 1e9)) == 0.0);
  CHECK(positive_fraction(label(d, deltas.at(70.0))) == doctest::Approx(0.31));
  auto lo = label(d, 3.0), hi = label(d, 6.0);
  for (std::size_t k = 0; k < d.size(); ++k) CHECK(hi.samples[k].label <= lo.samples[k].label);
  CHECK(label(d, 3.0).delta == 3.0);
  CHECK_THROWS_AS(label(d, -1.0), InputError);
  CHECK_THROWS_AS(label(d, std::nan("")), InputError);
  CHECK_THROWS_AS(select_delta(CausalDataset{}, grid), InputError);
}

TEST_CASE("dataset save and load round trip with sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "i2c_test_causal";
  std::filesystem::create_directories(dir);
  auto d = label(tenths(), 5.0);
  d.source = "ckpt-x";
  d.lambda = 10.0;
  save_dataset(dir / "d.csv", d);
  CHECK(std::filesystem::exists(sidecar_path(dir / "d.csv")));
  const auto back = load_dataset(dir / "d.csv");
  CHECK(back.size() == d.size());
  CHECK(back.source == "ckpt-x");
  CHECK(back.delta == 5.0);
  CHECK(back.lambda == 10.0);
  CHECK(back.num_agents == 3);
  for (std::size_t k = 0; k < d.size(); ++k) {
    CHECK(back.samples[k].effect == d.samples[k].effect);
    CHECK(back.samples[k].label == d.samples[k].label);
    CHECK(back.samples[k].observation == d.samples[k].observation);
  }
  std::filesystem::remove(sidecar_path(dir / "d.csv"));
  CHECK_THROWS_AS(load_dataset(dir / "d.csv"), InputError);
  std::filesystem::remove_all(dir);
}
