#pragma once

#include "i2c/envs/environment.hpp"
#include "i2c/rng.hpp"

#include <utility>
#include <vector>

namespace i2c::envs {

struct Cell {
  int row = 0;
  int col = 0;
  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

struct Route {
  int entry = 0;
  std::vector<Cell> cells;
};

/// Road layout for a traffic mode. Two-way roads with right-hand traffic:
/// a horizontal road on rows (r, r+1) carries westbound traffic on r and
/// eastbound on r+1; a vertical road on columns (c, c+1) carries
/// southbound traffic on c and northbound on c+1. Each entry point keeps
/// its first `routes_per_entry` routes ordered by turn count, then by
/// straight < right < left at successive crossings.
struct RoadMap {
  int grid = 0;
  int entries = 0;
  int routes_per_entry = 0;
  std::vector<Route> routes;  // entry-major: route id = entry * routes_per_entry + k
};

RoadMap build_road_map(TrafficMode mode, int grid);

struct Car {
  bool alive = false;
  int route = -1;
  int progress = 0;
  /// Steps since the car arrived.
  int tau = 0;
  /// -1 before the first action.
  int prev_action = -1;
  bool operator==(const Car&) const = default;
};

struct TrafficState {
  std::vector<Car> cars;  // one per slot, N_max slots
  int step = 0;
  int total_collisions = 0;
  bool operator==(const TrafficState&) const = default;
};

/// C_i * collision_penalty + tau_i * time_penalty.
double traffic_car_reward(int collisions, int tau, const EnvConfig& config);
/// C_i per slot: other live cars sharing the slot's cell.
std::vector<int> traffic_collisions(const TrafficState& state, const RoadMap& map);
/// Sum of individual rewards over live cars.
double team_reward(const TrafficState& state, const RoadMap& map, const EnvConfig& config);
/// An episode succeeds iff it saw no collision.
inline bool success(int total_collisions) { return total_collisions == 0; }

/// Traffic junction (medium: one junction on 14x14, hard: four junctions
/// on 18x18). Cars see only their own cell.
///
/// Observation layout per slot: previous action one-hot (2), route one-hot
/// (all routes), row one-hot (grid), column one-hot (grid), presence
/// vector (N_max) summing the slot one-hots of cars in the same cell.
///
/// Step order: move (gas advances one cell, brake holds) and remove cars
/// past their exit; age surviving cars; arrivals (each entry point in turn
/// spawns with p_arrive into the lowest free slot while fewer than N_max
/// cars are live); count collisions; reward.
class TrafficJunction final : public Environment {
 public:
  explicit TrafficJunction(EnvConfig config);

  const EnvConfig& config() const override { return config_; }
  int num_agents() const override { return config_.agents; }
  int num_actions() const override { return kTrafficActions; }
  int obs_dim() const override;
  int max_visible() const override { return config_.agents - 1; }

  JointObservation reset(std::uint64_t seed) override;
  StepResult step(std::span<const int> actions) override;
  JointObservation observe() const override;
  std::vector<int> field_of_view(int agent) const override;
  bool alive(int agent) const override;
  std::array<double, 2> position(int agent) const override;
  int step_count() const override { return state_.step; }
  std::unique_ptr<Environment> clone() const override;

  const TrafficState& state() const { return state_; }
  void set_state(TrafficState state);
  const RoadMap& road_map() const { return map_; }
  Cell cell_of(int agent) const;
  bool episode_success() const { return success(state_.total_collisions); }

 private:
  int arrive();

  EnvConfig config_;
  RoadMap map_;
  TrafficState state_;
  Rng rng_;
};

}  // namespace i2c::envs
