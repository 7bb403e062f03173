#include "i2c/envs/trajectory.hpp"

#include "i2c/errors.hpp"
#include "i2c/text_io.hpp"

namespace i2c::envs {
namespace {

std::ofstream open_with_header(const std::filesystem::path& path,
                               const std::vector<std::string>& comments, const char* header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& c : comments) out << "# " << c << '\n';
  out << header << '\n';
  return out;
}

}  // namespace

TrajectoryWriter::TrajectoryWriter(const std::filesystem::path& path, const std::string& producer,
                                   const std::string& env_name)
    : out_(open_with_header(path, {"producer=" + producer, "env=" + env_name}, kTrajectoryHeader)) {}

void TrajectoryWriter::write(const TrajectoryRecord& r) {
  out_ << r.episode << ',' << r.step << ',' << r.agent << ',' << (r.alive ? 1 : 0) << ','
       << format_double(r.x) << ',' << format_double(r.y) << ',' << r.action << ','
       << format_double(r.reward) << ',' << r.collisions << ',' << r.observed << ','
       << r.requested << '\n';
}

CommLogWriter::CommLogWriter(const std::filesystem::path& path, const std::string& producer)
    : out_(open_with_header(path, {"producer=" + producer}, kCommLogHeader)) {}

void CommLogWriter::write(const CommLogRecord& r) {
  out_ << r.episode << ',' << r.step << ',' << r.observer << ',' << r.target << ','
       << format_double(r.belief) << ',' << (r.requested ? 1 : 0) << '\n';
}

std::vector<TrajectoryRecord> read_trajectories(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  std::vector<TrajectoryRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    TrajectoryRecord rec;
    rec.episode = static_cast<int>(t.integer(r, "episode"));
    rec.step = static_cast<int>(t.integer(r, "step"));
    rec.agent = static_cast<int>(t.integer(r, "agent"));
    rec.alive = t.integer(r, "alive") != 0;
    rec.x = t.number(r, "x");
    rec.y = t.number(r, "y");
    rec.action = static_cast<int>(t.integer(r, "action"));
    rec.reward = t.number(r, "reward");
    rec.collisions = static_cast<int>(t.integer(r, "collisions"));
    rec.observed = static_cast<int>(t.integer(r, "observed"));
    rec.requested = static_cast<int>(t.integer(r, "requested"));
    out.push_back(rec);
  }
  return out;
}

std::vector<CommLogRecord> read_comm_log(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  std::vector<CommLogRecord> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    CommLogRecord rec;
    rec.episode = static_cast<int>(t.integer(r, "episode"));
    rec.step = static_cast<int>(t.integer(r, "step"));
    rec.observer = static_cast<int>(t.integer(r, "observer"));
    rec.target = static_cast<int>(t.integer(r, "target"));
    rec.belief = t.number(r, "belief");
    rec.requested = t.integer(r, "requested") != 0;
    out.push_back(rec);
  }
  return out;
}

}  // namespace i2c::envs
