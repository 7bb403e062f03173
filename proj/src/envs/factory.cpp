#include "i2c/envs/environment.hpp"
#include "i2c/envs/particle.hpp"
#include "i2c/envs/traffic.hpp"
#include "i2c/errors.hpp"

namespace i2c::envs {

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::CooperativeNavigation: return "coop-nav";
    case EnvKind::PredatorPrey: return "predator-prey";
    case EnvKind::TrafficJunction: return "traffic-junction";
  }
  return "unknown";
}

EnvKind env_kind_from_string(std::string_view name) {
  if (name == "coop-nav") return EnvKind::CooperativeNavigation;
  if (name == "predator-prey") return EnvKind::PredatorPrey;
  if (name == "traffic-junction") return EnvKind::TrafficJunction;
  throw ConfigError("unknown environment '" + std::string(name) + "'");
}

std::string to_string(TrafficMode mode) { return mode == TrafficMode::Medium ? "medium" : "hard"; }

TrafficMode traffic_mode_from_string(std::string_view name) {
  if (name == "medium") return TrafficMode::Medium;
  if (name == "hard") return TrafficMode::Hard;
  throw ConfigError("unknown traffic mode '" + std::string(name) + "'");
}

EnvConfig EnvConfig::cooperative_navigation() { return EnvConfig{}; }

EnvConfig EnvConfig::predator_prey() {
  EnvConfig c;
  c.kind = EnvKind::PredatorPrey;
  c.agents = 7;
  c.targets = 3;
  c.agent_size = 0.04;
  c.target_size = 0.05;
  c.agent_accel = 0.5;
  c.target_accel = 0.7;
  return c;
}

EnvConfig EnvConfig::traffic_medium() {
  EnvConfig c;
  c.kind = EnvKind::TrafficJunction;
  c.traffic_mode = TrafficMode::Medium;
  c.grid_size = 14;
  c.agents = 10;
  c.targets = 0;
  c.p_arrive = 0.05;
  c.episode_length = 40;
  c.collision_penalty = -10.0;
  c.time_penalty = -0.01;
  return c;
}

EnvConfig EnvConfig::traffic_hard() {
  EnvConfig c = traffic_medium();
  c.traffic_mode = TrafficMode::Hard;
  c.grid_size = 18;
  c.agents = 20;
  c.p_arrive = 0.03;
  c.episode_length = 80;
  return c;
}

void EnvConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("env." + field + ": " + why);
  };
  if (agents < 1) fail("agents", "must be at least 1");
  if (episode_length < 1) fail("episode_length", "must be positive");
  if (kind == EnvKind::TrafficJunction) {
    if (!(p_arrive >= 0.0 && p_arrive <= 1.0)) fail("p_arrive", "must lie in [0, 1]");
    const int expected = traffic_mode == TrafficMode::Medium ? 14 : 18;
    if (grid_size != expected) {
      fail("grid_size", "must be " + std::to_string(expected) + " for " + to_string(traffic_mode));
    }
    return;
  }
  if (kind == EnvKind::PredatorPrey && agents < 2) fail("agents", "predator prey needs 2+ predators");
  if (targets < 1) fail("targets", "must be at least 1");
  if (neighbors < 1) fail("neighbors", "must be at least 1");
  if (!(agent_size > 0.0)) fail("agent_size", "must be positive");
  if (!(target_size > 0.0)) fail("target_size", "must be positive");
  if (!(agent_accel >= 0.0)) fail("agent_accel", "must be nonnegative");
  if (!(target_accel >= 0.0)) fail("target_accel", "must be nonnegative");
  if (collision_penalty > 0.0) fail("collision_penalty", "must be nonpositive");
  if (!(damping >= 0.0 && damping <= 1.0)) fail("damping", "must lie in [0, 1]");
  if (!(dt > 0.0)) fail("dt", "must be positive");
  if (!(spawn_half_width > 0.0)) fail("spawn_half_width", "must be positive");
  if (arena_half_width < spawn_half_width) fail("arena_half_width", "must contain the spawn area");
  if (kind == EnvKind::PredatorPrey &&
      (prey_area_half_width <= 0.0 || prey_area_half_width > arena_half_width)) {
    fail("prey_area_half_width", "must lie inside the arena");
  }
}

std::unique_ptr<Environment> make_environment(const EnvConfig& config) {
  config.validate();
  if (config.kind == EnvKind::TrafficJunction) return std::make_unique<TrafficJunction>(config);
  return std::make_unique<ParticleWorld>(config);
}

}  // namespace i2c::envs
