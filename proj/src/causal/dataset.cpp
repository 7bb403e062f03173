#include "i2c/causal/dataset.hpp"

#include "i2c/errors.hpp"
#include "i2c/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace i2c::causal {

std::vector<double> CausalDataset::identifier(std::size_t k) const {
  const auto& s = samples.at(k);
  if (s.target < 0) return {};
  return comms::target_identifier(id_encoding, s.target, s.target_slot, num_agents, max_visible);
}

namespace {

CausalDataset empty_dataset(const envs::Environment& env, const CollectOptions& options,
                            comms::IdEncoding encoding) {
  if (options.episodes < 1) throw InputError("dataset collection needs at least one episode");
  CausalDataset d;
  d.source = options.source;
  d.env = envs::to_string(env.config().kind);
  d.lambda = options.lambda;
  d.id_encoding = encoding;
  d.num_agents = env.num_agents();
  d.max_visible = env.max_visible();
  return d;
}

template <typename PerStep>
void run_episodes(const JointPolicy& policy, envs::Environment& env, const CollectOptions& options,
                  PerStep&& per_step) {
  Rng action_rng = make_rng(options.seed, "dataset.actions");
  for (int ep = 0; ep < options.episodes; ++ep) {
    auto obs = env.reset(derive_seed(options.seed, "dataset.episode." + std::to_string(ep)));
    for (int t = 0; t < env.episode_length(); ++t) {
      const auto actions = policy.sample(obs, action_rng);
      per_step(obs, actions);
      auto result = env.step(actions);
      obs = std::move(result.observation);
      if (result.done) break;
    }
  }
}

}  // namespace

CausalDataset collect_dataset(const JointPolicy& policy, const ActionValue& critic,
                              envs::Environment& env, const CollectOptions& options) {
  auto data = empty_dataset(env, options, options.id_encoding);
  run_episodes(policy, env, options, [&](const envs::JointObservation& o, const JointAction& a) {
    for (int i = 0; i < o.num_agents; ++i) {
      if (!o.is_alive(i)) continue;
      const auto fov = o.field_of_view(i);
      if (fov.empty()) continue;
      const auto effects = causal_effects(critic, i, fov, a, o, options.lambda);
      const auto oi = o.obs(i);
      for (std::size_t s = 0; s < fov.size(); ++s) {
        data.samples.push_back({i, fov[s], static_cast<int>(s), {oi.begin(), oi.end()}, effects[s], 0});
      }
    }
  });
  return data;
}

CausalDataset collect_message_dataset(const JointPolicy& policy, const MessageActionValue& critic,
                                      envs::Environment& env, const CollectOptions& options) {
  auto data = empty_dataset(env, options, comms::IdEncoding::None);
  const comms::Gate full{comms::GateMode::Full};
  Rng unused(0);
  run_episodes(policy, env, options, [&](const envs::JointObservation& o, const JointAction& a) {
    const auto beliefs = comms::gate_beliefs(full, nullptr, nullptr, o, comms::IdEncoding::None, unused);
    const auto bundles = comms::request_round(beliefs, o);
    for (int i = 0; i < o.num_agents; ++i) {
      if (!o.is_alive(i) || bundles[static_cast<std::size_t>(i)].empty()) continue;
      const double effect = message_causal_effect(critic, i, a, bundles, o, options.lambda);
      const auto oi = o.obs(i);
      data.samples.push_back({i, -1, -1, {oi.begin(), oi.end()}, effect, 0});
    }
  });
  return data;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw InputError("percentile of an empty set");
  if (!(p > 0.0 && p < 100.0)) throw InputError("percentile must lie in (0, 100)");
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

std::map<double, double> percentile_deltas(const CausalDataset& dataset,
                                           std::span<const double> percentiles) {
  if (dataset.empty()) throw InputError("cannot choose delta from an empty dataset");
  std::vector<double> effects;
  effects.reserve(dataset.size());
  for (const auto& s : dataset.samples) effects.push_back(s.effect);
  std::sort(effects.begin(), effects.end());
  std::map<double, double> out;
  for (double p : percentiles) out[p] = percentile(effects, p);
  return out;
}

DeltaSelection select_delta(const CausalDataset& dataset, std::span<const double> percentiles,
                            const std::function<double(double)>& validate) {
  if (percentiles.empty()) throw InputError("select_delta needs at least one percentile");
  DeltaSelection sel;
  sel.candidates = percentile_deltas(dataset, percentiles);
  sel.percentile = percentiles.front();
  sel.delta = sel.candidates.at(sel.percentile);
  if (!validate) return sel;
  bool first = true;
  double best = 0.0;
  for (double p : percentiles) {
    const double delta = sel.candidates.at(p);
    const double score = validate(delta);
    sel.scores[p] = score;
    if (first || score > best || (score == best && p > sel.percentile)) {
      first = false;
      best = score;
      sel.percentile = p;
      sel.delta = delta;
    }
  }
  return sel;
}

CausalDataset label(CausalDataset dataset, double delta) {
  if (!(delta >= 0.0)) throw InputError("delta must be a nonnegative number");
  for (auto& s : dataset.samples) s.label = s.effect >= delta ? 1 : 0;
  dataset.delta = delta;
  return dataset;
}

double positive_fraction(const CausalDataset& dataset) {
  if (dataset.empty()) return 0.0;
  std::size_t pos = 0;
  for (const auto& s : dataset.samples) pos += static_cast<std::size_t>(s.label);
  return static_cast<double>(pos) / static_cast<double>(dataset.size());
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".meta.json");
}

void save_dataset(const std::filesystem::path& path, const CausalDataset& dataset) {
  const std::size_t dim = dataset.empty() ? 0 : dataset.samples.front().observation.size();
  CsvTable t;
  t.comments.push_back("producer=" + dataset.source);
  t.header = {"observer", "target", "target_slot"};
  for (std::size_t k = 0; k < dim; ++k) t.header.push_back("o_" + std::to_string(k));
  t.header.push_back("effect");
  t.header.push_back("label");
  t.rows.reserve(dataset.size());
  for (const auto& s : dataset.samples) {
    if (s.observation.size() != dim) throw InputError("dataset rows have different widths");
    std::vector<std::string> row{std::to_string(s.observer), std::to_string(s.target),
                                 std::to_string(s.target_slot)};
    for (double v : s.observation) row.push_back(format_double(v));
    row.push_back(format_double(s.effect));
    row.push_back(std::to_string(s.label));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);

  nlohmann::json meta{{"lambda", dataset.lambda},
                      {"delta", dataset.delta ? nlohmann::json(*dataset.delta) : nlohmann::json()},
                      {"source", dataset.source},
                      {"env", dataset.env},
                      {"id_encoding", comms::to_string(dataset.id_encoding)},
                      {"num_agents", dataset.num_agents},
                      {"max_visible", dataset.max_visible},
                      {"obs_dim", dim},
                      {"samples", dataset.size()}};
  std::ofstream out(sidecar_path(path));
  if (!out) throw InputError("cannot write " + sidecar_path(path).string());
  out << meta.dump(2) << '\n';
}

CausalDataset load_dataset(const std::filesystem::path& path) {
  const auto t = read_csv(path);
  CausalDataset d;
  std::ifstream in(sidecar_path(path));
  if (!in) throw InputError("missing dataset metadata " + sidecar_path(path).string());
  nlohmann::json meta;
  try {
    in >> meta;
    d.lambda = meta.at("lambda").get<double>();
    if (!meta.at("delta").is_null()) d.delta = meta.at("delta").get<double>();
    d.source = meta.at("source").get<std::string>();
    d.env = meta.at("env").get<std::string>();
    d.id_encoding = comms::id_encoding_from_string(meta.at("id_encoding").get<std::string>());
    d.num_agents = meta.at("num_agents").get<int>();
    d.max_visible = meta.at("max_visible").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("bad dataset metadata: " + std::string(e.what()));
  }
  const std::size_t dim = t.header.size() >= 5 ? t.header.size() - 5 : 0;
  const auto c_obs = t.column("observer");
  const auto c_tgt = t.column("target");
  const auto c_slot = t.column("target_slot");
  const auto c_eff = t.column("effect");
  const auto c_lab = t.column("label");
  d.samples.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) throw InputError("dataset row " + std::to_string(r) + " has wrong width");
    CausalSample s;
    s.observer = std::stoi(row[c_obs]);
    s.target = std::stoi(row[c_tgt]);
    s.target_slot = std::stoi(row[c_slot]);
    s.observation.reserve(dim);
    for (std::size_t k = 0; k < dim; ++k) s.observation.push_back(std::stod(row[3 + k]));
    s.effect = std::stod(row[c_eff]);
    s.label = std::stoi(row[c_lab]);
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace i2c::causal
