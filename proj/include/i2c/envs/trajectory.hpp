#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace i2c::envs {

/// One agent slot at one step of an evaluation episode. `reward` and
/// `collisions` are team-level and repeat across the step's rows;
/// `observed` / `requested` count the agent's field of view and the
/// requests it sent this step.
struct TrajectoryRecord {
  int episode = 0;
  int step = 0;
  int agent = 0;
  bool alive = true;
  double x = 0.0;
  double y = 0.0;
  int action = 0;
  double reward = 0.0;
  int collisions = 0;
  int observed = 0;
  int requested = 0;
};

/// One (observer, target) gating decision.
struct CommLogRecord {
  int episode = 0;
  int step = 0;
  int observer = 0;
  int target = 0;
  double belief = 0.0;
  bool requested = false;
};

inline constexpr const char* kTrajectoryHeader =
    "episode,step,agent,alive,x,y,action,reward,collisions,observed,requested";
inline constexpr const char* kCommLogHeader = "episode,step,observer,target,belief,requested";

/// Streams trajectory rows. The file starts with `# producer=<id>` and
/// `# env=<name>` comment lines followed by kTrajectoryHeader.
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::filesystem::path& path, const std::string& producer,
                   const std::string& env_name);
  void write(const TrajectoryRecord& r);

 private:
  std::ofstream out_;
};

class CommLogWriter {
 public:
  CommLogWriter(const std::filesystem::path& path, const std::string& producer);
  void write(const CommLogRecord& r);

 private:
  std::ofstream out_;
};

std::vector<TrajectoryRecord> read_trajectories(const std::filesystem::path& path);
std::vector<CommLogRecord> read_comm_log(const std::filesystem::path& path);

}  // namespace i2c::envs
