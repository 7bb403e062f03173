#include "i2c/causal/dataset.hpp"
#include "i2c/cli/commands.hpp"
#include "i2c/cli/export.hpp"
#include "i2c/errors.hpp"
#include "i2c/nn/checkpoint.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace i2c;
using namespace i2c::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("i2c-cli-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json tiny(const std::string& mode, const fs::path& out) {
  return {{"experiment", "tiny-" + mode},
          {"mode", mode},
          {"seeds", {0, 1}},
          {"out_dir", out.string()},
          {"env", {{"kind", "coop-nav"}, {"agents", 3}, {"targets", 3}, {"episode_length", 10}}},
          {"train",
           {{"preset", "desk"},
            {"hidden", 8},
            {"encoder_hidden", 4},
            {"prior_hidden", 8},
            {"batch_size", 16},
            {"warmup_transitions", 50},
            {"phase1_episodes", 20},
            {"phase2_episodes", 20},
            {"eval_interval", 10},
            {"eval_episodes", 2},
            {"final_eval_episodes", 4},
            {"dataset_episodes", 3},
            {"prior_epochs", 2},
            {"delta_percentile", 70.0}}}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string config_error(const json& j) {
  try {
    parse_experiment(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

struct ScopedEnv {
  std::string name;
  ScopedEnv(std::string n, const std::string& value) : name(std::move(n)) { setenv(name.c_str(), value.c_str(), 1); }
  ~ScopedEnv() { unsetenv(name.c_str()); }
};

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "i2c");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config errors name the offending field") {
  const json base = tiny("i2c", "out");
  auto with = [&](const json::json_pointer& ptr, const json& v) {
    json j = base;
    j[ptr] = v;
    return config_error(j);
  };
  CHECK(config_error(base).empty());
  CHECK(with("/train/lambda"_json_pointer, "ten").rfind("train.lambda", 0) == 0);
  CHECK(with("/train/batch_size"_json_pointer, 0).rfind("train.batch_size", 0) == 0);
  CHECK(with("/env/agents"_json_pointer, -1).rfind("env.agents", 0) == 0);
  CHECK(with("/env/colour"_json_pointer, 1).rfind("env.colour", 0) == 0);
  CHECK(with("/mode"_json_pointer, "telepathy").rfind("mode", 0) == 0);
  CHECK(with("/train/nonlinearity"_json_pointer, "relu6").rfind("train.nonlinearity", 0) == 0);
  json no_kind = base;
  no_kind["env"].erase("kind");
  CHECK(config_error(no_kind).rfind("env.kind", 0) == 0);
}

TEST_CASE("resolved configs round-trip and fingerprint phase one") {
  const auto dir = scratch("roundtrip");
  const auto c = parse_experiment(tiny("i2c", dir));
  save_resolved(dir / "resolved.json", c);
  CHECK(load_experiment(dir / "resolved.json") == c);
  CHECK(c.train.hidden == 8);
  CHECK(c.train.lr_critic == trainer::desk_particle_config().lr_critic);

  auto r = c;
  r.mode = trainer::Mode::I2cR;
  r.train.eta = 0.0;
  CHECK(phase1_fingerprint(c, 0) == phase1_fingerprint(r, 0));
  CHECK(phase1_fingerprint(c, 0) != phase1_fingerprint(c, 1));
  r.train.hidden = 9;
  CHECK(phase1_fingerprint(c, 0) != phase1_fingerprint(r, 0));
}

TEST_CASE("environment overrides") {
  const auto c = parse_experiment(tiny("fc", "from-config"));
  CHECK(resolve_out_dir(c, std::nullopt) == "from-config");
  CHECK(resolve_out_dir(c, std::string("flag")) == "flag");
  {
    ScopedEnv env("I2C_OUT_DIR", "/tmp/root");
    CHECK(resolve_out_dir(c, std::nullopt) == (fs::path("/tmp/root") / "tiny-fc").string());
    CHECK(resolve_out_dir(c, std::string("flag")) == "flag");
  }
  CHECK(resolve_threads(std::nullopt) == 1);
  ScopedEnv threads("I2C_THREADS", "3");
  CHECK(resolve_threads(std::nullopt) == 3);
  CHECK(resolve_threads(2) == 2);
}

TEST_CASE("train, eval and export") {
  const auto dir = scratch("pipeline");
  const auto nc_out = dir / "no-comm";
  const auto fc_out = dir / "fc";
  std::ostringstream out, log;
  REQUIRE(cmd_train({write_config(dir, tiny("no-comm", nc_out))}, out, log) == 0);
  fs::create_directories(dir / "fc-config");
  REQUIRE(cmd_train({write_config(dir / "fc-config", tiny("fc", fc_out))}, out, log) == 0);

  for (const auto& root : {nc_out, fc_out}) {
    CHECK(fs::exists(root / "config.resolved.json"));
    CHECK(fs::exists(root / "summary.csv"));
    CHECK(read_csv(root / "summary.csv").rows.size() == 2);
    CHECK(fs::exists(root / "seed-0" / "eval.csv"));
    CHECK(fs::exists(root / "seed-1" / "eval.csv"));
  }

  SUBCASE("eval of a no-comm checkpoint never communicates") {
    const fs::path ckpt = nc_out / "seed-0" / "tiny-no-comm-phase1-20.ckpt";
    REQUIRE(fs::exists(ckpt));
    EvalCommand e{ckpt, nc_out / "config.resolved.json", 7, 3, std::nullopt};
    std::ostringstream s;
    CHECK(cmd_eval(e, s) == 0);
    const auto t = read_csv(fs::path(ckpt).replace_extension(".eval.csv"));
    CHECK(t.integer(0, "episodes") == 7);
    CHECK(t.number(0, "overhead") == 0.0);
    e.runs = 0;
    CHECK_THROWS_AS(cmd_eval(e, s), InputError);
  }

  SUBCASE("full communication has a flat overhead curve at one") {
    const auto curve = export_artifact(fc_out, "overhead-curve", dir / "curve.csv");
    const auto t = read_csv(curve);
    CHECK(t.rows.size() == 10);
    for (std::size_t r = 0; r < t.rows.size(); ++r) CHECK(t.number(r, "overhead") == 1.0);
  }

  SUBCASE("learning curve brackets the mean") {
    const auto t = read_csv(export_artifact(fc_out, "learning-curve", dir / "learning.csv"));
    CHECK(t.comment_value("seeds") == "2");
    CHECK(t.rows.size() == 2);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      CHECK(t.number(r, "min") <= t.number(r, "mean"));
      CHECK(t.number(r, "mean") <= t.number(r, "max"));
    }
  }

  SUBCASE("unknown artifacts and missing logs are input errors") {
    CHECK_THROWS_AS(export_artifact(fc_out, "heatmap", dir / "x.csv"), InputError);
    CHECK_THROWS_AS(export_artifact(dir / "nowhere", "overhead-curve", dir / "x.csv"), InputError);
  }
}

TEST_CASE("overhead grid matches a hand count") {
  const auto dir = scratch("grid");
  {
    envs::TrajectoryWriter w(dir / "trajectories.csv", "hand", "traffic-junction");
    // Cell (x=1, y=2): three visits, two with requests. Cell (x=0, y=0): one silent visit.
    w.write({0, 0, 0, true, 1, 2, 0, 0.0, 0, 2, 2});
    w.write({0, 1, 0, true, 1, 2, 0, 0.0, 0, 2, 0});
    w.write({0, 1, 1, true, 1, 2, 0, 0.0, 0, 1, 1});
    w.write({0, 1, 2, true, 0, 0, 0, 0.0, 0, 0, 0});
    w.write({0, 1, 3, false, 2, 2, 0, 0.0, 0, 0, 0});
  }
  const auto t = read_csv(export_artifact(dir, "overhead-grid", dir / "grid.csv"));
  REQUIRE(t.rows.size() == 3);
  CHECK(t.number(2, "x1") == doctest::Approx(2.0 / 3.0));
  CHECK(t.number(0, "x0") == 0.0);
  CHECK(t.rows[1][t.column("x1")].empty());
  CHECK(t.rows[2][t.column("x2")].empty());

  std::vector<envs::CommLogRecord> log{{0, 0, 0, 1, 0.9, true}, {0, 0, 1, 0, 0.1, false},
                                       {1, 0, 0, 1, 0.8, true}, {0, 1, 0, 1, 0.2, false}};
  const auto curve = overhead_curve(log);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].requested == 2);
  CHECK(curve[0].observed == 3);
  CHECK(*curve[1].ratio == 0.0);
}

TEST_CASE("dataset inspection") {
  const auto dir = scratch("dataset");
  causal::CausalDataset d;
  d.num_agents = 2;
  d.max_visible = 1;
  d.samples = {{0, 1, 0, {0.5, 1.0}, 0.2, 0}, {1, 0, 0, {0.1, -1.0}, 0.9, 0}};
  d = causal::label(d, 0.5);
  causal::save_dataset(dir / "d.csv", d);
  std::ostringstream s;
  CHECK(cmd_dataset("inspect", dir / "d.csv", std::nullopt, s) == 0);
  CHECK(s.str().find("samples") != std::string::npos);
  CHECK_THROWS(cmd_dataset("shred", dir / "d.csv", std::nullopt, s));
}

TEST_CASE("command-line exit status") {
  const auto dir = scratch("exit");
  CHECK(run({"train", "--config", (dir / "absent.json").string()}) == 1);
  std::ofstream(dir / "bad.json") << "{\"mode\": \"i2c\", \"env\": {\"kind\": \"coop-nav\"}, \"oops\": 1}";
  CHECK(run({"train", "--config", (dir / "bad.json").string()}) == 1);
  CHECK(run({"export", dir.string(), "heatmap"}) == 2);
  CHECK(run({"export", dir.string(), "trajectories"}) == 1);
  CHECK(run({"frobnicate"}) == 2);
  CHECK(run({"train", "--help"}) == 0);

  auto j = tiny("no-comm", dir / "ok");
  j["seeds"] = {5};
  const auto cfg = write_config(dir, j);
  CHECK(run({"train", "--config", cfg.string(), "--quiet"}) == 0);
  CHECK(fs::exists(dir / "ok" / "seed-5" / "eval.csv"));
  CHECK(run({"train", "--config", cfg.string(), "--seed", "9", "--out", (dir / "other").string(), "--quiet"}) == 0);
  CHECK(fs::exists(dir / "other" / "seed-9" / "eval.csv"));
}
