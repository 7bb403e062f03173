#pragma once

#include "i2c/envs/environment.hpp"
#include "i2c/rng.hpp"

#include <vector>

namespace i2c::envs {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm() const;
  bool operator==(const Vec2&) const = default;
};

/// Unit direction of a particle action (zero for stay).
Vec2 action_direction(int action);

/// Continuous state shared by cooperative navigation and predator prey.
/// Targets are landmarks (static) or preys.
struct ParticleState {
  std::vector<Vec2> agent_pos;
  std::vector<Vec2> agent_vel;
  std::vector<Vec2> target_pos;
  std::vector<Vec2> target_vel;
  int step = 0;

  bool operator==(const ParticleState&) const = default;
};

/// Unordered agent pairs closer than the sum of their sizes.
int count_collisions(const ParticleState& state, const EnvConfig& config);
/// Distance from target `t` to its nearest agent.
double nearest_agent_distance(const ParticleState& state, int t);
/// -sum_t d_t + C * collision_penalty.
double team_reward(const ParticleState& state, const EnvConfig& config);
/// Landmarks whose nearest agent lies within agent_size + target_size.
int occupied_landmarks(const ParticleState& state, const EnvConfig& config);
/// The k nearest other agents of `agent`, ascending distance, ties by id.
std::vector<int> nearest_agents(const ParticleState& state, int agent, int k);
/// The k nearest targets of `agent`, ascending distance, ties by id.
std::vector<int> nearest_targets(const ParticleState& state, int agent, int k);
/// Escape action for prey `prey`: the action best aligned with the
/// direction away from its nearest predator, with components that would
/// leave the activity area zeroed. Ties go to the lower action index.
int prey_policy(const ParticleState& state, const EnvConfig& config, int prey);

/// Cooperative navigation and predator prey.
///
/// Observation layout per agent: own velocity (2), own position (2),
/// relative positions of the K nearest targets (2K_t), relative positions
/// of the K nearest other agents (2K_a), where K_t = min(K, targets) and
/// K_a = min(K, agents - 1). Relative positions are (other - self).
///
/// Dynamics per step: v <- (1 - damping) v + accel * dir * dt, then
/// p <- p + v dt; agents are clamped to the arena, preys to their
/// activity area, and the clamped velocity component is zeroed.
class ParticleWorld final : public Environment {
 public:
  explicit ParticleWorld(EnvConfig config);

  const EnvConfig& config() const override { return config_; }
  int num_agents() const override { return config_.agents; }
  int num_actions() const override { return kParticleActions; }
  int obs_dim() const override;
  int max_visible() const override { return visible_agents(); }

  JointObservation reset(std::uint64_t seed) override;
  StepResult step(std::span<const int> actions) override;
  JointObservation observe() const override;
  std::vector<int> field_of_view(int agent) const override;
  bool alive(int) const override { return true; }
  std::array<double, 2> position(int agent) const override;
  int step_count() const override { return state_.step; }
  std::unique_ptr<Environment> clone() const override;

  const ParticleState& state() const { return state_; }
  /// Replaces the state wholesale (fixtures and tests).
  void set_state(ParticleState state);

  int visible_agents() const;
  int visible_targets() const;

 private:
  EnvConfig config_;
  ParticleState state_;
  Rng rng_;
};

}  // namespace i2c::envs
