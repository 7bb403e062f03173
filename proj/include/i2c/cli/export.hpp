#pragma once

#include "i2c/envs/trajectory.hpp"
#include "i2c/text_io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace i2c::cli {

struct CurvePoint {
  int step = 0;
  long long requested = 0;
  long long observed = 0;
  std::optional<double> ratio;
};

/// Per-timestep requested / observed pooled over episodes and agents.
std::vector<CurvePoint> overhead_curve(const std::vector<envs::CommLogRecord>& log);

/// Per-cell communicating-car visits / car visits as a dense grid_size x
/// grid_size matrix (rows indexed by y); undefined cells are empty.
std::vector<std::vector<std::optional<double>>> overhead_grid(
    const std::vector<envs::TrajectoryRecord>& trajectories, int grid_size);

struct LearningCurveRow {
  int episode = 0;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

/// Min / mean / max of reward_mean across seeds at each shared episode.
std::vector<LearningCurveRow> learning_curve(const std::vector<CsvTable>& per_seed);

/// A run directory holds either one seed's files or seed-<n>/ subdirectories.
std::vector<std::filesystem::path> seed_dirs(const std::filesystem::path& run_dir);

/// Writes `artifact` for `run_dir` to `out` and returns the path written.
/// Throws InputError when the needed logs are missing.
std::filesystem::path export_artifact(const std::filesystem::path& run_dir,
                                      const std::string& artifact,
                                      const std::filesystem::path& out);

}  // namespace i2c::cli
