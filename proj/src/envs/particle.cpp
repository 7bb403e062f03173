#include "i2c/envs/particle.hpp"

#include "i2c/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace i2c::envs {
namespace {

constexpr int kPlacementAttempts = 10000;

std::vector<int> k_nearest(const std::vector<Vec2>& points, Vec2 from, int k, int skip) {
  std::vector<int> ids;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    if (i != skip) ids.push_back(i);
  }
  std::vector<double> dist(points.size(), 0.0);
  for (int i : ids) dist[static_cast<std::size_t>(i)] = (points[static_cast<std::size_t>(i)] - from).norm();
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    const double da = dist[static_cast<std::size_t>(a)];
    const double db = dist[static_cast<std::size_t>(b)];
    return da < db || (da == db && a < b);
  });
  if (static_cast<int>(ids.size()) > k) ids.resize(static_cast<std::size_t>(k));
  return ids;
}

std::vector<Vec2> place(int count, double size, double half_width, Rng& rng) {
  std::uniform_real_distribution<double> coord(-half_width, half_width);
  std::vector<Vec2> out;
  for (int n = 0; n < count; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      Vec2 p{coord(rng), coord(rng)};
      placed = std::all_of(out.begin(), out.end(),
                           [&](Vec2 q) { return (p - q).norm() >= 2.0 * size; });
      if (placed) out.push_back(p);
    }
    if (!placed) {
      throw ConfigError("spawn area too small to place " + std::to_string(count) +
                        " non-overlapping entities of size " + std::to_string(size));
    }
  }
  return out;
}

void integrate(Vec2& pos, Vec2& vel, int action, double accel, const EnvConfig& c, double bound) {
  vel = vel * (1.0 - c.damping) + action_direction(action) * (accel * c.dt);
  pos = pos + vel * c.dt;
  if (pos.x > bound) { pos.x = bound; vel.x = 0.0; }
  if (pos.x < -bound) { pos.x = -bound; vel.x = 0.0; }
  if (pos.y > bound) { pos.y = bound; vel.y = 0.0; }
  if (pos.y < -bound) { pos.y = -bound; vel.y = 0.0; }
}

}  // namespace

double Vec2::norm() const { return std::sqrt(x * x + y * y); }

Vec2 action_direction(int action) {
  switch (action) {
    case kUp: return {0.0, 1.0};
    case kDown: return {0.0, -1.0};
    case kLeft: return {-1.0, 0.0};
    case kRight: return {1.0, 0.0};
    default: return {0.0, 0.0};
  }
}

int count_collisions(const ParticleState& state, const EnvConfig& config) {
  int c = 0;
  const double contact = 2.0 * config.agent_size;
  for (std::size_t a = 0; a < state.agent_pos.size(); ++a) {
    for (std::size_t b = a + 1; b < state.agent_pos.size(); ++b) {
      if ((state.agent_pos[a] - state.agent_pos[b]).norm() < contact) ++c;
    }
  }
  return c;
}

double nearest_agent_distance(const ParticleState& state, int t) {
  double best = INFINITY;
  const Vec2 p = state.target_pos.at(static_cast<std::size_t>(t));
  for (Vec2 a : state.agent_pos) best = std::min(best, (a - p).norm());
  return best;
}

double team_reward(const ParticleState& state, const EnvConfig& config) {
  double total = 0.0;
  for (int t = 0; t < static_cast<int>(state.target_pos.size()); ++t) {
    total -= nearest_agent_distance(state, t);
  }
  return total + count_collisions(state, config) * config.collision_penalty;
}

int occupied_landmarks(const ParticleState& state, const EnvConfig& config) {
  int n = 0;
  for (int t = 0; t < static_cast<int>(state.target_pos.size()); ++t) {
    if (nearest_agent_distance(state, t) < config.agent_size + config.target_size) ++n;
  }
  return n;
}

std::vector<int> nearest_agents(const ParticleState& state, int agent, int k) {
  return k_nearest(state.agent_pos, state.agent_pos.at(static_cast<std::size_t>(agent)), k, agent);
}

std::vector<int> nearest_targets(const ParticleState& state, int agent, int k) {
  return k_nearest(state.target_pos, state.agent_pos.at(static_cast<std::size_t>(agent)), k, -1);
}

int prey_policy(const ParticleState& state, const EnvConfig& config, int prey) {
  if (config.kind != EnvKind::PredatorPrey) throw InputError("prey_policy needs predator prey");
  const Vec2 p = state.target_pos.at(static_cast<std::size_t>(prey));
  const auto nearest = k_nearest(state.agent_pos, p, 1, -1);
  Vec2 away = p - state.agent_pos[static_cast<std::size_t>(nearest.front())];
  const double area = config.prey_area_half_width;
  if ((p.x >= area && away.x > 0.0) || (p.x <= -area && away.x < 0.0)) away.x = 0.0;
  if ((p.y >= area && away.y > 0.0) || (p.y <= -area && away.y < 0.0)) away.y = 0.0;
  int best = kStay;
  double best_score = 0.0;
  for (int a = 1; a < kParticleActions; ++a) {
    const double score = action_direction(a).dot(away);
    if (score > best_score) {
      best = a;
      best_score = score;
    }
  }
  return best;
}

ParticleWorld::ParticleWorld(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.kind == EnvKind::TrafficJunction) throw ConfigError("particle world given traffic config");
  reset(0);
}

int ParticleWorld::visible_agents() const { return std::min(config_.neighbors, config_.agents - 1); }
int ParticleWorld::visible_targets() const { return std::min(config_.neighbors, config_.targets); }
int ParticleWorld::obs_dim() const { return 4 + 2 * visible_targets() + 2 * visible_agents(); }

JointObservation ParticleWorld::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = ParticleState{};
  state_.agent_pos = place(config_.agents, config_.agent_size, config_.spawn_half_width, rng_);
  const double target_spawn = config_.kind == EnvKind::PredatorPrey
                                  ? std::min(config_.spawn_half_width, config_.prey_area_half_width)
                                  : config_.spawn_half_width;
  state_.target_pos = place(config_.targets, config_.target_size, target_spawn, rng_);
  state_.agent_vel.assign(state_.agent_pos.size(), Vec2{});
  state_.target_vel.assign(state_.target_pos.size(), Vec2{});
  return observe();
}

void ParticleWorld::set_state(ParticleState state) {
  if (static_cast<int>(state.agent_pos.size()) != config_.agents ||
      static_cast<int>(state.target_pos.size()) != config_.targets ||
      state.agent_vel.size() != state.agent_pos.size() ||
      state.target_vel.size() != state.target_pos.size()) {
    throw ConfigError("particle state does not match the configuration");
  }
  state_ = std::move(state);
}

StepResult ParticleWorld::step(std::span<const int> actions) {
  if (static_cast<int>(actions.size()) != config_.agents) {
    throw InputError("expected " + std::to_string(config_.agents) + " actions, got " +
                     std::to_string(actions.size()));
  }
  for (int a : actions) {
    if (a < 0 || a >= kParticleActions) throw InputError("action index " + std::to_string(a) + " out of range");
  }
  std::vector<int> prey_actions;
  if (config_.kind == EnvKind::PredatorPrey) {
    for (int t = 0; t < config_.targets; ++t) prey_actions.push_back(prey_policy(state_, config_, t));
  }
  for (std::size_t i = 0; i < state_.agent_pos.size(); ++i) {
    integrate(state_.agent_pos[i], state_.agent_vel[i], actions[i], config_.agent_accel, config_,
              config_.arena_half_width);
  }
  for (std::size_t t = 0; t < prey_actions.size(); ++t) {
    integrate(state_.target_pos[t], state_.target_vel[t], prey_actions[t], config_.target_accel,
              config_, config_.prey_area_half_width);
  }
  ++state_.step;
  StepResult r;
  r.reward = team_reward(state_, config_);
  r.info.collisions = count_collisions(state_, config_);
  if (config_.kind == EnvKind::CooperativeNavigation) r.info.occupied = occupied_landmarks(state_, config_);
  r.done = state_.step >= config_.episode_length;
  r.observation = observe();
  return r;
}

JointObservation ParticleWorld::observe() const {
  const int ka = visible_agents();
  const int kt = visible_targets();
  JointObservation o(config_.agents, obs_dim(), ka);
  for (int i = 0; i < config_.agents; ++i) {
    auto row = o.obs(i);
    const Vec2 self = state_.agent_pos[static_cast<std::size_t>(i)];
    const Vec2 vel = state_.agent_vel[static_cast<std::size_t>(i)];
    std::size_t k = 0;
    row[k++] = vel.x;
    row[k++] = vel.y;
    row[k++] = self.x;
    row[k++] = self.y;
    for (int t : nearest_targets(state_, i, kt)) {
      const Vec2 rel = state_.target_pos[static_cast<std::size_t>(t)] - self;
      row[k++] = rel.x;
      row[k++] = rel.y;
    }
    const auto others = nearest_agents(state_, i, ka);
    for (std::size_t s = 0; s < others.size(); ++s) {
      const Vec2 rel = state_.agent_pos[static_cast<std::size_t>(others[s])] - self;
      row[k++] = rel.x;
      row[k++] = rel.y;
      o.visible[static_cast<std::size_t>(i * ka) + s] = others[s];
    }
  }
  return o;
}

std::vector<int> ParticleWorld::field_of_view(int agent) const {
  return nearest_agents(state_, agent, visible_agents());
}

std::array<double, 2> ParticleWorld::position(int agent) const {
  const Vec2 p = state_.agent_pos.at(static_cast<std::size_t>(agent));
  return {p.x, p.y};
}

std::unique_ptr<Environment> ParticleWorld::clone() const {
  return std::make_unique<ParticleWorld>(*this);
}

}  // namespace i2c::envs
