#pragma once

#include "i2c/cli/experiment_config.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace i2c::cli {

struct TrainCommand {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool audit = false;
  bool quiet = false;
};

struct EvalCommand {
  std::filesystem::path checkpoint;
  std::filesystem::path config;
  int runs = 100;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
};

struct DeltaSweepCommand {
  std::filesystem::path config;
  std::vector<double> percentiles{90.0, 80.0, 70.0, 50.0};
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  bool quiet = false;
};

/// Output directory after applying I2C_OUT_DIR and then the flag.
std::string resolve_out_dir(const ExperimentConfig& c, const std::optional<std::string>& flag);
/// Thread count after applying I2C_THREADS and then the flag.
int resolve_threads(const std::optional<int>& flag);

/// Each returns the process exit status and throws on invalid input.
int cmd_train(const TrainCommand& cmd, std::ostream& out, std::ostream& log);
int cmd_eval(const EvalCommand& cmd, std::ostream& out);
int cmd_export(const std::filesystem::path& run_dir, const std::string& artifact,
               const std::optional<std::filesystem::path>& out_file, std::ostream& out);
int cmd_dataset(const std::string& action, const std::filesystem::path& file,
                const std::optional<std::filesystem::path>& out_file, std::ostream& out);
int cmd_delta_sweep(const DeltaSweepCommand& cmd, std::ostream& out, std::ostream& log);

/// Parses argv and dispatches. Usage errors return 2; failures while
/// running print "error: ..." and return 1.
int run_cli(int argc, char** argv);

}  // namespace i2c::cli
