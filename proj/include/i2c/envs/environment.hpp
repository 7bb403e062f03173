#pragma once

#include "i2c/envs/observation.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace i2c::envs {

enum class EnvKind { CooperativeNavigation, PredatorPrey, TrafficJunction };
enum class TrafficMode { Medium, Hard };

std::string to_string(EnvKind kind);
EnvKind env_kind_from_string(std::string_view name);
std::string to_string(TrafficMode mode);
TrafficMode traffic_mode_from_string(std::string_view name);

/// Particle actions. Traffic uses kBrake / kGas.
enum ParticleAction : int { kStay = 0, kUp = 1, kDown = 2, kLeft = 3, kRight = 4 };
enum TrafficAction : int { kBrake = 0, kGas = 1 };
inline constexpr int kParticleActions = 5;
inline constexpr int kTrafficActions = 2;

struct EnvConfig {
  EnvKind kind = EnvKind::CooperativeNavigation;
  /// Agents (predators); for traffic, the number of car slots N_max.
  int agents = 7;
  /// Landmarks or preys. Unused by traffic.
  int targets = 7;
  double agent_size = 0.05;
  double target_size = 0.05;
  double agent_accel = 0.7;
  /// Prey acceleration. Landmarks never move.
  double target_accel = 0.7;
  double collision_penalty = -1.0;
  /// K for the K-nearest observation sets and particle field of view.
  int neighbors = 3;
  int episode_length = 40;
  double arena_half_width = 2.0;
  double spawn_half_width = 1.0;
  double prey_area_half_width = 1.0;
  double damping = 0.5;
  double dt = 0.1;

  TrafficMode traffic_mode = TrafficMode::Medium;
  int grid_size = 14;
  double p_arrive = 0.05;
  double time_penalty = -0.01;

  static EnvConfig cooperative_navigation();
  static EnvConfig predator_prey();
  static EnvConfig traffic_medium();
  static EnvConfig traffic_hard();

  /// Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const EnvConfig&) const = default;
};

/// Per-step accounting returned alongside the observation.
struct StepInfo {
  /// Unordered colliding pairs this step.
  int collisions = 0;
  /// Landmarks whose nearest agent is in contact (cooperative navigation).
  int occupied = 0;
  /// Traffic: individual rewards and collision counts C_i per slot.
  std::vector<double> agent_rewards;
  std::vector<int> agent_collisions;
  int arrivals = 0;
  int completions = 0;
};

struct StepResult {
  JointObservation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Episodic multi-agent environment with partial observability.
/// Instances are single-threaded and own their RNG.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvConfig& config() const = 0;
  virtual int num_agents() const = 0;
  virtual int num_actions() const = 0;
  virtual int obs_dim() const = 0;
  virtual int max_visible() const = 0;
  int episode_length() const { return config().episode_length; }

  virtual JointObservation reset(std::uint64_t seed) = 0;
  /// One action per agent slot. Throws InputError on an out-of-range action.
  virtual StepResult step(std::span<const int> actions) = 0;
  virtual JointObservation observe() const = 0;
  virtual std::vector<int> field_of_view(int agent) const = 0;
  virtual bool alive(int agent) const = 0;
  /// (x, y) for particles; (column, row) for traffic cells.
  virtual std::array<double, 2> position(int agent) const = 0;
  virtual int step_count() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

std::unique_ptr<Environment> make_environment(const EnvConfig& config);

}  // namespace i2c::envs
