#include "i2c/envs/traffic.hpp"

#include "i2c/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>

namespace i2c::envs {
namespace {

struct Heading {
  int dr = 0;
  int dc = 0;
  bool operator==(const Heading&) const = default;
};

constexpr Heading kEast{0, 1};
constexpr Heading kWest{0, -1};
constexpr Heading kSouth{1, 0};
constexpr Heading kNorth{-1, 0};

Heading right_of(Heading h) { return {h.dc, -h.dr}; }
Heading left_of(Heading h) { return {-h.dc, h.dr}; }
bool horizontal(Heading h) { return h.dr == 0; }

struct Lane {
  Heading heading;
  int road = -1;  // horizontal roads 0.., vertical roads 100..
};

struct Layout {
  int grid = 0;
  std::vector<int> road_rows;  // first row of each horizontal road
  std::vector<int> road_cols;  // first column of each vertical road

  std::optional<Lane> row_lane(int r) const {
    for (std::size_t k = 0; k < road_rows.size(); ++k) {
      if (r == road_rows[k]) return Lane{kWest, static_cast<int>(k)};
      if (r == road_rows[k] + 1) return Lane{kEast, static_cast<int>(k)};
    }
    return std::nullopt;
  }
  std::optional<Lane> col_lane(int c) const {
    for (std::size_t k = 0; k < road_cols.size(); ++k) {
      if (c == road_cols[k]) return Lane{kSouth, 100 + static_cast<int>(k)};
      if (c == road_cols[k] + 1) return Lane{kNorth, 100 + static_cast<int>(k)};
    }
    return std::nullopt;
  }
  bool inside(int r, int c) const { return r >= 0 && c >= 0 && r < grid && c < grid; }
};

struct Candidate {
  int turns = 0;
  std::vector<Cell> cells;
};

constexpr int kMaxTurns = 2;

void explore(const Layout& layout, Cell at, Heading heading, int road, int forbidden, int turns,
             std::vector<Cell>& path, std::vector<Candidate>& out) {
  path.push_back(at);
  // Options in order: straight, right, left.
  struct Option {
    Heading heading;
    int road;
    bool turn;
  };
  std::vector<Option> options{{heading, road, false}};
  if (turns < kMaxTurns) {
    const auto lane = horizontal(heading) ? layout.col_lane(at.col) : layout.row_lane(at.row);
    if (lane && lane->road != forbidden && lane->road != road) {
      if (lane->heading == right_of(heading)) options.push_back({lane->heading, lane->road, true});
      if (lane->heading == left_of(heading)) options.push_back({lane->heading, lane->road, true});
    }
  }
  for (const auto& opt : options) {
    const Cell next{at.row + opt.heading.dr, at.col + opt.heading.dc};
    const int next_turns = turns + (opt.turn ? 1 : 0);
    if (!layout.inside(next.row, next.col)) {
      out.push_back({next_turns, path});
      continue;
    }
    explore(layout, next, opt.heading, opt.road, opt.turn ? road : forbidden, next_turns, path, out);
  }
  path.pop_back();
}

}  // namespace

RoadMap build_road_map(TrafficMode mode, int grid) {
  Layout layout;
  layout.grid = grid;
  RoadMap map;
  map.grid = grid;
  if (mode == TrafficMode::Medium) {
    layout.road_rows = {grid / 2 - 1};
    layout.road_cols = {grid / 2 - 1};
    map.routes_per_entry = 3;
  } else {
    layout.road_rows = {grid / 4, grid - grid / 4 - 2};
    layout.road_cols = {grid / 4, grid - grid / 4 - 2};
    map.routes_per_entry = 7;
  }
  struct Entry {
    Cell cell;
    Heading heading;
    int road;
  };
  std::vector<Entry> entries;
  for (std::size_t k = 0; k < layout.road_rows.size(); ++k) {
    const int r = layout.road_rows[k];
    entries.push_back({{r + 1, 0}, kEast, static_cast<int>(k)});
    entries.push_back({{r, grid - 1}, kWest, static_cast<int>(k)});
  }
  for (std::size_t k = 0; k < layout.road_cols.size(); ++k) {
    const int c = layout.road_cols[k];
    entries.push_back({{0, c}, kSouth, 100 + static_cast<int>(k)});
    entries.push_back({{grid - 1, c + 1}, kNorth, 100 + static_cast<int>(k)});
  }
  map.entries = static_cast<int>(entries.size());
  for (int e = 0; e < map.entries; ++e) {
    std::vector<Candidate> found;
    std::vector<Cell> path;
    const auto& entry = entries[static_cast<std::size_t>(e)];
    explore(layout, entry.cell, entry.heading, entry.road, -1, 0, path, found);
    std::stable_sort(found.begin(), found.end(),
                     [](const Candidate& a, const Candidate& b) { return a.turns < b.turns; });
    if (static_cast<int>(found.size()) < map.routes_per_entry) {
      throw ConfigError("road layout yields too few routes per entry");
    }
    for (int k = 0; k < map.routes_per_entry; ++k) {
      map.routes.push_back(Route{e, found[static_cast<std::size_t>(k)].cells});
    }
  }
  return map;
}

double traffic_car_reward(int collisions, int tau, const EnvConfig& config) {
  return collisions * config.collision_penalty + tau * config.time_penalty;
}

std::vector<int> traffic_collisions(const TrafficState& state, const RoadMap& map) {
  std::map<Cell, int> occupancy;
  for (const auto& car : state.cars) {
    if (car.alive) ++occupancy[map.routes[static_cast<std::size_t>(car.route)].cells[static_cast<std::size_t>(car.progress)]];
  }
  std::vector<int> out(state.cars.size(), 0);
  for (std::size_t i = 0; i < state.cars.size(); ++i) {
    const auto& car = state.cars[i];
    if (car.alive) {
      out[i] = occupancy[map.routes[static_cast<std::size_t>(car.route)].cells[static_cast<std::size_t>(car.progress)]] - 1;
    }
  }
  return out;
}

double team_reward(const TrafficState& state, const RoadMap& map, const EnvConfig& config) {
  const auto collisions = traffic_collisions(state, map);
  double total = 0.0;
  for (std::size_t i = 0; i < state.cars.size(); ++i) {
    if (state.cars[i].alive) total += traffic_car_reward(collisions[i], state.cars[i].tau, config);
  }
  return total;
}

TrafficJunction::TrafficJunction(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.kind != EnvKind::TrafficJunction) throw ConfigError("traffic junction given particle config");
  map_ = build_road_map(config_.traffic_mode, config_.grid_size);
  reset(0);
}

int TrafficJunction::obs_dim() const {
  return kTrafficActions + static_cast<int>(map_.routes.size()) + 2 * map_.grid + config_.agents;
}

int TrafficJunction::arrive() {
  int arrivals = 0;
  std::uniform_int_distribution<int> pick(0, map_.routes_per_entry - 1);
  for (int e = 0; e < map_.entries; ++e) {
    const auto live = std::count_if(state_.cars.begin(), state_.cars.end(),
                                    [](const Car& c) { return c.alive; });
    if (live >= config_.agents) break;
    if (uniform01(rng_) >= config_.p_arrive) continue;
    auto slot = std::find_if(state_.cars.begin(), state_.cars.end(), [](const Car& c) { return !c.alive; });
    Car car;
    car.alive = true;
    car.route = e * map_.routes_per_entry + pick(rng_);
    *slot = car;
    ++arrivals;
  }
  return arrivals;
}

JointObservation TrafficJunction::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = TrafficState{};
  state_.cars.assign(static_cast<std::size_t>(config_.agents), Car{});
  arrive();
  return observe();
}

void TrafficJunction::set_state(TrafficState state) {
  if (static_cast<int>(state.cars.size()) != config_.agents) {
    throw ConfigError("traffic state has the wrong number of slots");
  }
  for (const auto& car : state.cars) {
    if (!car.alive) continue;
    if (car.route < 0 || car.route >= static_cast<int>(map_.routes.size()) || car.progress < 0 ||
        car.progress >= static_cast<int>(map_.routes[static_cast<std::size_t>(car.route)].cells.size())) {
      throw ConfigError("traffic state has a car off its route");
    }
  }
  state_ = std::move(state);
}

StepResult TrafficJunction::step(std::span<const int> actions) {
  if (static_cast<int>(actions.size()) != config_.agents) {
    throw InputError("expected " + std::to_string(config_.agents) + " actions, got " +
                     std::to_string(actions.size()));
  }
  for (int a : actions) {
    if (a < 0 || a >= kTrafficActions) throw InputError("action index " + std::to_string(a) + " out of range");
  }
  StepResult r;
  for (std::size_t i = 0; i < state_.cars.size(); ++i) {
    Car& car = state_.cars[i];
    if (!car.alive) continue;
    car.prev_action = actions[i];
    if (actions[i] == kGas) ++car.progress;
    if (car.progress >= static_cast<int>(map_.routes[static_cast<std::size_t>(car.route)].cells.size())) {
      car = Car{};
      ++r.info.completions;
      continue;
    }
    ++car.tau;
  }
  r.info.arrivals = arrive();
  r.info.agent_collisions = traffic_collisions(state_, map_);
  r.info.agent_rewards.assign(state_.cars.size(), 0.0);
  int pair_twice = 0;
  for (std::size_t i = 0; i < state_.cars.size(); ++i) {
    if (!state_.cars[i].alive) continue;
    r.info.agent_rewards[i] = traffic_car_reward(r.info.agent_collisions[i], state_.cars[i].tau, config_);
    r.reward += r.info.agent_rewards[i];
    pair_twice += r.info.agent_collisions[i];
  }
  r.info.collisions = pair_twice / 2;
  state_.total_collisions += r.info.collisions;
  ++state_.step;
  r.done = state_.step >= config_.episode_length;
  r.observation = observe();
  return r;
}

Cell TrafficJunction::cell_of(int agent) const {
  const Car& car = state_.cars.at(static_cast<std::size_t>(agent));
  if (!car.alive) throw InputError("car slot " + std::to_string(agent) + " is empty");
  return map_.routes[static_cast<std::size_t>(car.route)].cells[static_cast<std::size_t>(car.progress)];
}

bool TrafficJunction::alive(int agent) const { return state_.cars.at(static_cast<std::size_t>(agent)).alive; }

JointObservation TrafficJunction::observe() const {
  const int n = config_.agents;
  JointObservation o(n, obs_dim(), max_visible());
  const int routes = static_cast<int>(map_.routes.size());
  const int grid = map_.grid;
  for (int i = 0; i < n; ++i) {
    const Car& car = state_.cars[static_cast<std::size_t>(i)];
    o.alive[static_cast<std::size_t>(i)] = car.alive ? 1 : 0;
    if (!car.alive) continue;
    auto row = o.obs(i);
    const Cell cell = cell_of(i);
    if (car.prev_action >= 0) row[static_cast<std::size_t>(car.prev_action)] = 1.0;
    row[static_cast<std::size_t>(kTrafficActions + car.route)] = 1.0;
    row[static_cast<std::size_t>(kTrafficActions + routes + cell.row)] = 1.0;
    row[static_cast<std::size_t>(kTrafficActions + routes + grid + cell.col)] = 1.0;
    for (int k = 0; k < n; ++k) {
      if (alive(k) && cell_of(k) == cell) {
        row[static_cast<std::size_t>(kTrafficActions + routes + 2 * grid + k)] += 1.0;
      }
    }
    const auto fov = field_of_view(i);
    for (std::size_t s = 0; s < fov.size(); ++s) {
      o.visible[static_cast<std::size_t>(i * o.max_visible) + s] = fov[s];
    }
  }
  return o;
}

std::vector<int> TrafficJunction::field_of_view(int agent) const {
  if (!alive(agent)) return {};
  const Cell self = cell_of(agent);
  std::vector<std::pair<double, int>> others;
  for (int k = 0; k < config_.agents; ++k) {
    if (k == agent || !alive(k)) continue;
    const Cell c = cell_of(k);
    others.emplace_back(std::hypot(c.row - self.row, c.col - self.col), k);
  }
  std::sort(others.begin(), others.end());
  std::vector<int> out;
  for (const auto& [d, k] : others) out.push_back(k);
  return out;
}

std::array<double, 2> TrafficJunction::position(int agent) const {
  if (!alive(agent)) return {-1.0, -1.0};
  const Cell c = cell_of(agent);
  return {static_cast<double>(c.col), static_cast<double>(c.row)};
}

std::unique_ptr<Environment> TrafficJunction::clone() const {
  return std::make_unique<TrafficJunction>(*this);
}

}  // namespace i2c::envs
