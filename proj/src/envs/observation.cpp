#include "i2c/envs/observation.hpp"

namespace i2c::envs {

JointObservation::JointObservation(int agents, int dim, int visible_slots)
    : num_agents(agents),
      obs_dim(dim),
      max_visible(visible_slots),
      features(static_cast<std::size_t>(agents) * static_cast<std::size_t>(dim), 0.0),
      visible(static_cast<std::size_t>(agents) * static_cast<std::size_t>(visible_slots), -1),
      alive(static_cast<std::size_t>(agents), 1) {}

std::span<const double> JointObservation::obs(int agent) const {
  return {features.data() + static_cast<std::size_t>(agent) * static_cast<std::size_t>(obs_dim),
          static_cast<std::size_t>(obs_dim)};
}

std::span<double> JointObservation::obs(int agent) {
  return {features.data() + static_cast<std::size_t>(agent) * static_cast<std::size_t>(obs_dim),
          static_cast<std::size_t>(obs_dim)};
}

std::span<const int> JointObservation::visible_row(int agent) const {
  return {visible.data() + static_cast<std::size_t>(agent) * static_cast<std::size_t>(max_visible),
          static_cast<std::size_t>(max_visible)};
}

std::vector<int> JointObservation::field_of_view(int agent) const {
  std::vector<int> out;
  for (int id : visible_row(agent)) {
    if (id >= 0) out.push_back(id);
  }
  return out;
}

int JointObservation::alive_count() const {
  int n = 0;
  for (auto a : alive) n += a != 0;
  return n;
}

int JointObservation::visible_slot(int agent, int target) const {
  auto row = visible_row(agent);
  for (std::size_t k = 0; k < row.size(); ++k) {
    if (row[k] == target) return static_cast<int>(k);
  }
  return -1;
}

}  // namespace i2c::envs
