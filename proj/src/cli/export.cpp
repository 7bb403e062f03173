#include "i2c/cli/export.hpp"

#include "i2c/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <map>

namespace i2c::cli {

namespace fs = std::filesystem;

std::vector<CurvePoint> overhead_curve(const std::vector<envs::CommLogRecord>& log) {
  std::map<int, CurvePoint> by_step;
  for (const auto& r : log) {
    auto& p = by_step[r.step];
    p.step = r.step;
    p.observed += 1;
    p.requested += r.requested ? 1 : 0;
  }
  std::vector<CurvePoint> out;
  for (auto& [_, p] : by_step) {
    if (p.observed > 0) p.ratio = static_cast<double>(p.requested) / static_cast<double>(p.observed);
    out.push_back(p);
  }
  return out;
}

std::vector<std::vector<std::optional<double>>> overhead_grid(
    const std::vector<envs::TrajectoryRecord>& trajectories, int grid_size) {
  if (grid_size < 1) throw InputError("grid size must be positive");
  const auto g = static_cast<std::size_t>(grid_size);
  std::vector<std::vector<long long>> visits(g, std::vector<long long>(g, 0));
  auto talking = visits;
  for (const auto& r : trajectories) {
    if (!r.alive) continue;
    const auto col = static_cast<long long>(r.x);
    const auto row = static_cast<long long>(r.y);
    if (col < 0 || row < 0 || col >= grid_size || row >= grid_size) {
      throw InputError("trajectory position lies outside the grid");
    }
    visits[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] += 1;
    if (r.requested > 0) talking[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] += 1;
  }
  std::vector<std::vector<std::optional<double>>> out(g, std::vector<std::optional<double>>(g));
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t c = 0; c < g; ++c) {
      if (visits[r][c] > 0) out[r][c] = static_cast<double>(talking[r][c]) / static_cast<double>(visits[r][c]);
    }
  }
  return out;
}

std::vector<LearningCurveRow> learning_curve(const std::vector<CsvTable>& per_seed) {
  if (per_seed.empty()) throw InputError("learning curve needs at least one metrics file");
  std::map<int, std::vector<double>> by_episode;
  for (const auto& t : per_seed) {
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      by_episode[static_cast<int>(t.integer(r, "episode"))].push_back(t.number(r, "reward_mean"));
    }
  }
  std::vector<LearningCurveRow> out;
  for (const auto& [ep, values] : by_episode) {
    if (values.size() != per_seed.size()) continue;
    LearningCurveRow row;
    row.episode = ep;
    row.min = *std::min_element(values.begin(), values.end());
    row.max = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    row.mean = std::clamp(sum / static_cast<double>(values.size()), row.min, row.max);
    out.push_back(row);
  }
  return out;
}

std::vector<fs::path> seed_dirs(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw InputError("run directory " + run_dir.string() + " does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("seed-", 0) == 0) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) out.push_back(run_dir);
  return out;
}

namespace {

fs::path need(const fs::path& p) {
  if (!fs::exists(p)) throw InputError("missing log " + p.string());
  return p;
}

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string producers(const std::vector<fs::path>& files) {
  std::string out;
  for (const auto& f : files) {
    std::string id;
    if (fs::exists(f)) id = read_csv(f).comment_value("producer");
    if (!out.empty()) out += ";";
    out += id.empty() ? f.parent_path().filename().string() : id;
  }
  return out;
}

int grid_size_for(const fs::path& run_dir, const std::vector<envs::TrajectoryRecord>& traj) {
  for (const auto& dir : {run_dir, run_dir.parent_path()}) {
    const fs::path cfg = dir / "config.resolved.json";
    if (!fs::exists(cfg)) continue;
    std::ifstream in(cfg);
    const auto j = nlohmann::json::parse(in);
    return j.at("env").at("grid_size").get<int>();
  }
  int g = 0;
  for (const auto& r : traj) g = std::max({g, static_cast<int>(r.x) + 1, static_cast<int>(r.y) + 1});
  return g;
}

}  // namespace

fs::path export_artifact(const fs::path& run_dir, const std::string& artifact, const fs::path& out) {
  const auto dirs = seed_dirs(run_dir);
  CsvTable t;
  if (artifact == "overhead-curve") {
    std::vector<envs::CommLogRecord> log;
    std::vector<fs::path> files;
    for (const auto& d : dirs) {
      files.push_back(need(d / "comm_log.csv"));
      const auto part = envs::read_comm_log(files.back());
      log.insert(log.end(), part.begin(), part.end());
    }
    t.comments = {"producer=" + producers(files)};
    t.header = {"step", "requested", "observed", "overhead"};
    for (const auto& p : overhead_curve(log)) {
      t.rows.push_back({std::to_string(p.step), std::to_string(p.requested),
                        std::to_string(p.observed), opt_text(p.ratio)});
    }
  } else if (artifact == "overhead-grid") {
    std::vector<envs::TrajectoryRecord> traj;
    std::vector<fs::path> files;
    for (const auto& d : dirs) {
      files.push_back(need(d / "trajectories.csv"));
      const auto part = envs::read_trajectories(files.back());
      traj.insert(traj.end(), part.begin(), part.end());
    }
    const int g = grid_size_for(run_dir, traj);
    t.comments = {"producer=" + producers(files), "rows=y", "columns=x"};
    t.header = {"y"};
    for (int c = 0; c < g; ++c) t.header.push_back("x" + std::to_string(c));
    const auto grid = overhead_grid(traj, g);
    for (int r = 0; r < g; ++r) {
      std::vector<std::string> row{std::to_string(r)};
      for (int c = 0; c < g; ++c) row.push_back(opt_text(grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
      t.rows.push_back(std::move(row));
    }
  } else if (artifact == "learning-curve") {
    std::vector<CsvTable> tables;
    std::vector<fs::path> files;
    for (const auto& d : dirs) {
      fs::path f = d / "metrics-phase2.csv";
      if (!fs::exists(f)) f = d / "metrics-phase1.csv";
      files.push_back(need(f));
      tables.push_back(read_csv(f));
    }
    t.comments = {"producer=" + producers(files), "seeds=" + std::to_string(tables.size())};
    t.header = {"episode", "min", "mean", "max"};
    for (const auto& r : learning_curve(tables)) {
      t.rows.push_back({std::to_string(r.episode), format_double(r.min), format_double(r.mean),
                        format_double(r.max)});
    }
  } else if (artifact == "trajectories") {
    std::vector<fs::path> files;
    t.header = {"seed_dir"};
    for (const auto& h : split(envs::kTrajectoryHeader, ',')) t.header.push_back(h);
    for (const auto& d : dirs) {
      files.push_back(need(d / "trajectories.csv"));
      const auto src = read_csv(files.back());
      for (const auto& row : src.rows) {
        std::vector<std::string> r{d.filename().string()};
        r.insert(r.end(), row.begin(), row.end());
        t.rows.push_back(std::move(r));
      }
    }
    t.comments = {"producer=" + producers(files)};
  } else {
    throw InputError("unknown artifact '" + artifact +
                     "' (expected overhead-curve, overhead-grid, learning-curve or trajectories)");
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_csv(out, t);
  return out;
}

}  // namespace i2c::cli
