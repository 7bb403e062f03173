#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace i2c::envs {

/// Every agent's local view at one step, stored flat.
///
/// `visible` lists each agent's field of view in message order: ascending
/// distance, ties by lower id, padded with -1 up to `max_visible`. Dead
/// slots (traffic junction) have zero features and no visible agents.
struct JointObservation {
  int num_agents = 0;
  int obs_dim = 0;
  int max_visible = 0;
  std::vector<double> features;
  std::vector<int> visible;
  std::vector<std::uint8_t> alive;

  JointObservation() = default;
  JointObservation(int agents, int dim, int visible_slots);

  std::span<const double> obs(int agent) const;
  std::span<double> obs(int agent);
  std::span<const int> visible_row(int agent) const;
  std::vector<int> field_of_view(int agent) const;
  bool is_alive(int agent) const { return alive[static_cast<std::size_t>(agent)] != 0; }
  int alive_count() const;
  /// Slot of `target` in `agent`'s field of view, or -1.
  int visible_slot(int agent, int target) const;

  bool operator==(const JointObservation&) const = default;
};

}  // namespace i2c::envs
