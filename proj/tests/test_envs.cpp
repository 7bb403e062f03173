#include "i2c/envs/environment.hpp"
#include "i2c/envs/particle.hpp"
#include "i2c/envs/traffic.hpp"
#include "i2c/envs/trajectory.hpp"
#include "i2c/errors.hpp"
#include "i2c/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

using namespace i2c;
using namespace i2c::envs;

namespace {

double dist(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Brute-force -sum_t min_i |p_i - t| + pairs * penalty.
double reward_oracle(const ParticleState& s, double size, double penalty) {
  double total = 0.0;
  for (const Vec2& t : s.target_pos) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec2& p : s.agent_pos) best = std::min(best, dist(p, t));
    total -= best;
  }
  int pairs = 0;
  for (std::size_t a = 0; a < s.agent_pos.size(); ++a) {
    for (std::size_t b = a + 1; b < s.agent_pos.size(); ++b) {
      if (dist(s.agent_pos[a], s.agent_pos[b]) < 2 * size) ++pairs;
    }
  }
  return total + pairs * penalty;
}

ParticleState random_state(const EnvConfig& c, Rng& rng, double half) {
  std::uniform_real_distribution<double> u(-half, half);
  ParticleState s;
  for (int i = 0; i < c.agents; ++i) {
    s.agent_pos.push_back({u(rng), u(rng)});
    s.agent_vel.push_back({u(rng) * 0.1, u(rng) * 0.1});
  }
  for (int t = 0; t < c.targets; ++t) {
    s.target_pos.push_back({u(rng), u(rng)});
    s.target_vel.push_back({});
  }
  return s;
}

std::vector<int> sorted_neighbours(const ParticleState& s, int agent, int k) {
  std::vector<int> ids;
  for (int j = 0; j < static_cast<int>(s.agent_pos.size()); ++j) {
    if (j != agent) ids.push_back(j);
  }
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    return dist(s.agent_pos[a], s.agent_pos[agent]) < dist(s.agent_pos[b], s.agent_pos[agent]);
  });
  ids.resize(std::min<std::size_t>(ids.size(), k));
  return ids;
}

int route_with(const RoadMap& map, Cell first, Cell last) {
  for (std::size_t r = 0; r < map.routes.size(); ++r) {
    if (map.routes[r].cells.front() == first && map.routes[r].cells.back() == last) {
      return static_cast<int>(r);
    }
  }
  return -1;
}

EnvConfig quiet_traffic() {
  EnvConfig c = EnvConfig::traffic_medium();
  c.p_arrive = 0.0;
  return c;
}

}  // namespace

TEST_CASE("presets carry the published defaults") {
  const auto cn = EnvConfig::cooperative_navigation();
  CHECK(cn.agents == 7);
  CHECK(cn.targets == 7);
  CHECK(cn.agent_size == 0.05);
  CHECK(cn.agent_accel == 0.7);
  CHECK(cn.collision_penalty == -1.0);
  CHECK(cn.episode_length == 40);
  const auto pp = EnvConfig::predator_prey();
  CHECK(pp.agents == 7);
  CHECK(pp.targets == 3);
  CHECK(pp.agent_size == 0.04);
  CHECK(pp.agent_accel == 0.5);
  CHECK(pp.target_size == 0.05);
  CHECK(pp.target_accel == 0.7);
  const auto tm = EnvConfig::traffic_medium();
  CHECK(tm.grid_size == 14);
  CHECK(tm.agents == 10);
  CHECK(tm.p_arrive == 0.05);
  CHECK(tm.collision_penalty == -10.0);
  CHECK(tm.time_penalty == -0.01);
  const auto th = EnvConfig::traffic_hard();
  CHECK(th.grid_size == 18);
  CHECK(th.agents == 20);
  CHECK(th.p_arrive == 0.03);
  CHECK(th.episode_length == 80);
}

TEST_CASE("invalid configs are rejected by field") {
  EnvConfig c = EnvConfig::cooperative_navigation();
  c.agents = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = EnvConfig::traffic_medium();
  c.p_arrive = 1.5;
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("p_arrive") != std::string::npos);
  }
  c = EnvConfig::cooperative_navigation();
  c.agents = 400;
  c.spawn_half_width = 0.1;
  CHECK_THROWS_AS(make_environment(c)->reset(0), ConfigError);
}

TEST_CASE("reset is deterministic and observation sizes follow the layout") {
  auto env = make_environment(EnvConfig::cooperative_navigation());
  const auto a = env->reset(42);
  const auto b = env->reset(42);
  CHECK(a == b);
  CHECK(a.num_agents == 7);
  CHECK(a.obs_dim == 4 + 2 * 3 + 2 * 3);
  CHECK(env->reset(43).features != a.features);
}

TEST_CASE("particle positions stay in bounds and stay-with-zero-velocity is static") {
  EnvConfig c = EnvConfig::cooperative_navigation();
  ParticleWorld w(c);
  w.reset(3);
  const auto before = w.state().agent_pos;
  std::vector<int> stay(7, kStay);
  w.step(stay);
  CHECK(w.state().agent_pos == before);

  Rng rng(4);
  std::uniform_int_distribution<int> act(0, kParticleActions - 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<int> a(7);
    for (int& x : a) x = act(rng);
    w.step(a);
    for (const auto& p : w.state().agent_pos) {
      CHECK(std::abs(p.x) <= c.arena_half_width);
      CHECK(std::abs(p.y) <= c.arena_half_width);
    }
  }
  CHECK_THROWS_AS(w.step(std::vector<int>(7, 5)), InputError);
}

TEST_CASE("particle dynamics follow damping and integration") {
  EnvConfig c = EnvConfig::cooperative_navigation();
  c.agents = 1;
  c.targets = 1;
  ParticleWorld w(c);
  ParticleState s;
  s.agent_pos = {{0.2, -0.1}};
  s.agent_vel = {{0.3, 0.0}};
  s.target_pos = {{1.0, 1.0}};
  s.target_vel = {{}};
  w.set_state(s);
  w.step(std::vector<int>{kUp});
  const double vx = 0.3 * 0.5, vy = 0.7 * 0.1;
  CHECK(w.state().agent_vel[0].x == doctest::Approx(vx).epsilon(1e-15));
  CHECK(w.state().agent_vel[0].y == doctest::Approx(vy).epsilon(1e-15));
  CHECK(w.state().agent_pos[0].x == doctest::Approx(0.2 + vx * 0.1).epsilon(1e-15));
  CHECK(w.state().agent_pos[0].y == doctest::Approx(-0.1 + vy * 0.1).epsilon(1e-15));
}

TEST_CASE("team reward matches the distance-sum oracle and is nonpositive") {
  Rng rng(5);
  for (EnvConfig c : {EnvConfig::cooperative_navigation(), EnvConfig::predator_prey()}) {
    for (int trial = 0; trial < 300; ++trial) {
      auto s = random_state(c, rng, trial % 3 == 0 ? 0.2 : 2.0);
      const double got = team_reward(s, c);
      CHECK(std::abs(got - reward_oracle(s, c.agent_size, c.collision_penalty)) < 1e-12);
      CHECK(got <= 0.0);
    }
  }
}

TEST_CASE("covered landmarks give zero reward") {
  EnvConfig c = EnvConfig::cooperative_navigation();
  c.agents = 3;
  c.targets = 3;
  ParticleState s;
  s.agent_pos = {{-1, 0}, {0, 0}, {1, 0}};
  s.target_pos = s.agent_pos;
  s.agent_vel.assign(3, {});
  s.target_vel.assign(3, {});
  CHECK(team_reward(s, c) == 0.0);
  CHECK(occupied_landmarks(s, c) == 3);
  s.agent_pos[2] = {0.05, 0};
  CHECK(count_collisions(s, c) == 1);
  CHECK(occupied_landmarks(s, c) == 2);
}

TEST_CASE("field of view is the nearest three, ties by id") {
  EnvConfig c = EnvConfig::cooperative_navigation();
  c.agents = 4;
  c.targets = 4;
  ParticleWorld four(c);
  four.reset(6);
  for (int i = 0; i < 4; ++i) CHECK(four.field_of_view(i).size() == 3);

  ParticleWorld seven(EnvConfig::cooperative_navigation());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    seven.reset(seed);
    for (int i = 0; i < 7; ++i) {
      CHECK(seven.field_of_view(i) == sorted_neighbours(seven.state(), i, 3));
    }
  }

  ParticleState s;
  s.agent_pos = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}, {3, 3}, {-3, -3}};
  s.agent_vel.assign(7, {});
  s.target_pos.assign(7, {2, 2});
  s.target_vel.assign(7, {});
  seven.set_state(s);
  CHECK(seven.field_of_view(0) == std::vector<int>{1, 2, 3});
}

TEST_CASE("observation locality") {
  ParticleWorld w(EnvConfig::cooperative_navigation());
  w.reset(7);
  const auto before = w.observe();
  auto s = w.state();
  const auto fov = w.field_of_view(0);
  const auto targets = nearest_targets(s, 0, 3);
  int outsider = -1;
  for (int j = 1; j < 7; ++j) {
    if (std::find(fov.begin(), fov.end(), j) == fov.end()) outsider = j;
  }
  REQUIRE(outsider >= 0);
  const Vec2 me = s.agent_pos[0];
  const Vec2 dir = s.agent_pos[outsider] - me;
  s.agent_pos[outsider] = me + dir * 1.2;
  s.agent_pos[outsider].x = std::clamp(s.agent_pos[outsider].x, -2.0, 2.0);
  s.agent_pos[outsider].y = std::clamp(s.agent_pos[outsider].y, -2.0, 2.0);
  w.set_state(s);
  REQUIRE(w.field_of_view(0) == fov);
  REQUIRE(nearest_targets(w.state(), 0, 3) == targets);
  const auto after = w.observe();
  CHECK(std::equal(before.obs(0).begin(), before.obs(0).end(), after.obs(0).begin()));
}

TEST_CASE("prey escapes the nearest predator") {
  EnvConfig c = EnvConfig::predator_prey();
  ParticleState s;
  s.agent_pos = {{-0.5, 0}, {2, 2}, {-2, 2}, {2, -2}, {-2, -2}, {1.9, 0}, {0, 1.9}};
  s.agent_vel.assign(7, {});
  s.target_pos = {{0, 0}, {-1.5, 1.5}, {1.5, -1.5}};
  s.target_vel.assign(3, {});
  CHECK(prey_policy(s, c, 0) == kRight);

  s.target_pos[0] = {1.0, 0.0};
  s.agent_pos[0] = {0.5, -0.25};
  CHECK(prey_policy(s, c, 0) == kUp);

  Rng rng(8);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    for (auto& p : s.agent_pos) p = {u(rng) * 2.5, u(rng) * 2.5};
    s.target_pos[0] = {u(rng), u(rng)};
    const int got = prey_policy(s, c, 0);
    int nearest = 0;
    for (int i = 1; i < 7; ++i) {
      if (dist(s.agent_pos[i], s.target_pos[0]) < dist(s.agent_pos[nearest], s.target_pos[0])) {
        nearest = i;
      }
    }
    const double step = c.target_accel * c.dt * c.dt;
    int best = kStay;
    double best_d = dist(s.target_pos[0], s.agent_pos[nearest]);
    for (int a = 1; a < kParticleActions; ++a) {
      const double d = dist(s.target_pos[0] + action_direction(a) * step, s.agent_pos[nearest]);
      if (d > best_d + 1e-12) {
        best = a;
        best_d = d;
      }
    }
    CHECK(got == best);
    ++checked;
  }
  CHECK(checked == 500);
}

TEST_CASE("traffic road maps") {
  const auto medium = build_road_map(TrafficMode::Medium, 14);
  CHECK(medium.entries == 4);
  CHECK(medium.routes.size() == 12);
  const auto hard = build_road_map(TrafficMode::Hard, 18);
  CHECK(hard.entries == 8);
  CHECK(hard.routes.size() == 56);
  for (const auto& map : {medium, hard}) {
    for (const auto& r : map.routes) {
      for (std::size_t k = 1; k < r.cells.size(); ++k) {
        const int step = std::abs(r.cells[k].row - r.cells[k - 1].row) +
                         std::abs(r.cells[k].col - r.cells[k - 1].col);
        CHECK(step == 1);
      }
    }
  }
}

TEST_CASE("traffic reset places at most one car per entry") {
  EnvConfig c = EnvConfig::traffic_medium();
  c.p_arrive = 1.0;
  TrafficJunction tj(c);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto o = tj.reset(seed);
    CHECK(o.alive_count() == 4);
  }
  c.p_arrive = 0.05;
  TrafficJunction sparse(c);
  for (std::uint64_t seed = 0; seed < 200; ++seed) CHECK(sparse.reset(seed).alive_count() <= 4);
}

TEST_CASE("traffic per-car reward arithmetic") {
  const EnvConfig c = EnvConfig::traffic_medium();
  CHECK(traffic_car_reward(1, 5, c) == -10.0 + 5 * -0.01);
  CHECK(traffic_car_reward(0, 0, c) == 0.0);
  CHECK(traffic_car_reward(2, 3, c) == -20.0 + 3 * -0.01);
}

TEST_CASE("scripted head-to-head crossing collides with hand-computed rewards") {
  TrafficJunction tj(quiet_traffic());
  tj.reset(0);
  const auto& map = tj.road_map();
  const int east = route_with(map, {7, 0}, {7, 13});
  const int south = route_with(map, {0, 6}, {13, 6});
  REQUIRE(east >= 0);
  REQUIRE(south >= 0);
  // Cell (7, 6) is index 6 of the eastbound route and index 7 of the southbound one.
  TrafficState s;
  s.cars.assign(10, Car{});
  s.cars[0] = Car{true, east, 5, 4, kGas};
  s.cars[1] = Car{true, south, 6, 2, kGas};
  tj.set_state(s);
  std::vector<int> gas(10, kBrake);
  gas[0] = kGas;
  gas[1] = kGas;
  auto r = tj.step(gas);
  CHECK(tj.cell_of(0) == Cell{7, 6});
  CHECK(tj.cell_of(1) == Cell{7, 6});
  CHECK(r.info.collisions == 1);
  CHECK(r.info.agent_rewards[0] == -10.0 + 5 * -0.01);
  CHECK(r.info.agent_rewards[1] == -10.0 + 3 * -0.01);
  CHECK(r.reward == r.info.agent_rewards[0] + r.info.agent_rewards[1]);
  CHECK_FALSE(tj.episode_success());

  // Car 0 brakes, car 1 moves on: no new collision.
  gas[0] = kBrake;
  r = tj.step(gas);
  CHECK(r.info.collisions == 0);
  CHECK(r.reward == -0.01 * 6 + -0.01 * 4);
  CHECK_FALSE(tj.episode_success());
}

TEST_CASE("traffic cars leave after their route and the count stays bounded") {
  TrafficJunction tj(quiet_traffic());
  tj.reset(0);
  const int east = route_with(tj.road_map(), {7, 0}, {7, 13});
  TrafficState s;
  s.cars.assign(10, Car{});
  s.cars[3] = Car{true, east, 13, 9, kGas};
  tj.set_state(s);
  std::vector<int> gas(10, kGas);
  auto r = tj.step(gas);
  CHECK(r.info.completions == 1);
  CHECK_FALSE(tj.alive(3));
  CHECK(tj.episode_success());

  EnvConfig busy = EnvConfig::traffic_medium();
  busy.p_arrive = 1.0;
  busy.agents = 6;
  TrafficJunction full(busy);
  full.reset(1);
  Rng rng(2);
  for (int t = 0; t < 40; ++t) {
    std::vector<int> a(6);
    for (int& x : a) x = static_cast<int>(rng() % 2);
    auto out = full.step(a);
    CHECK(out.observation.alive_count() <= 6);
  }
}

TEST_CASE("traffic observation layout and all-others field of view") {
  EnvConfig c = EnvConfig::traffic_hard();
  c.p_arrive = 0.0;
  TrafficJunction tj(c);
  tj.reset(0);
  TrafficState s;
  s.cars.assign(20, Car{});
  for (int k = 0; k < 5; ++k) s.cars[k] = Car{true, k, 0, 0, -1};
  tj.set_state(s);
  for (int k = 0; k < 5; ++k) CHECK(tj.field_of_view(k).size() == 4);
  const int routes = static_cast<int>(tj.road_map().routes.size());
  CHECK(tj.obs_dim() == 2 + routes + 18 + 18 + 20);
  auto o = tj.observe();
  const auto row = o.obs(0);
  CHECK(std::accumulate(row.begin(), row.begin() + 2, 0.0) == 0.0);
  CHECK(std::accumulate(row.begin() + 2, row.begin() + 2 + routes, 0.0) == 1.0);
  CHECK(std::accumulate(row.end() - 20, row.end(), 0.0) >= 1.0);
}

TEST_CASE("episodes are reproducible bit for bit") {
  for (EnvConfig c : {EnvConfig::cooperative_navigation(), EnvConfig::predator_prey(),
                      EnvConfig::traffic_medium()}) {
    auto run = [&] {
      auto env = make_environment(c);
      env->reset(11);
      Rng rng(12);
      std::vector<double> trace;
      for (int t = 0; t < env->episode_length(); ++t) {
        std::vector<int> a(env->num_agents());
        for (int& x : a) x = static_cast<int>(rng() % env->num_actions());
        auto r = env->step(a);
        trace.push_back(r.reward);
        trace.insert(trace.end(), r.observation.features.begin(), r.observation.features.end());
      }
      return trace;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("trajectory and communication logs round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "i2c_test_envs";
  std::filesystem::create_directories(dir);
  {
    TrajectoryWriter w(dir / "t.csv", "ckpt-a", "coop-nav");
    w.write({1, 2, 3, false, 0.5, -0.25, 4, -1.5, 2, 3, 1});
    CommLogWriter c(dir / "c.csv", "ckpt-a");
    c.write({1, 2, 0, 1, 0.75, true});
  }
  const auto t = read_trajectories(dir / "t.csv");
  REQUIRE(t.size() == 1);
  CHECK(t[0].agent == 3);
  CHECK_FALSE(t[0].alive);
  CHECK(t[0].y == -0.25);
  CHECK(t[0].requested == 1);
  const auto c = read_comm_log(dir / "c.csv");
  REQUIRE(c.size() == 1);
  CHECK(c[0].belief == 0.75);
  CHECK(c[0].requested);
  std::filesystem::remove_all(dir);
}
