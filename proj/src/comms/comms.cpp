#include "i2c/comms/comms.hpp"

#include "i2c/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace i2c::comms {

std::string to_string(IdEncoding e) {
  switch (e) {
    case IdEncoding::FovSlot: return "fov-slot";
    case IdEncoding::AgentId: return "agent-id";
    case IdEncoding::None: return "none";
  }
  return "unknown";
}

IdEncoding id_encoding_from_string(std::string_view name) {
  if (name == "fov-slot") return IdEncoding::FovSlot;
  if (name == "agent-id") return IdEncoding::AgentId;
  if (name == "none") return IdEncoding::None;
  throw ConfigError("unknown id encoding '" + std::string(name) + "'");
}

int id_dimension(IdEncoding encoding, int num_agents, int max_visible) {
  switch (encoding) {
    case IdEncoding::FovSlot: return max_visible;
    case IdEncoding::AgentId: return num_agents;
    case IdEncoding::None: return 0;
  }
  return 0;
}

std::vector<double> target_identifier(IdEncoding encoding, int target, int slot, int num_agents,
                                      int max_visible) {
  std::vector<double> id(static_cast<std::size_t>(id_dimension(encoding, num_agents, max_visible)),
                         0.0);
  int hot = -1;
  if (encoding == IdEncoding::FovSlot) hot = slot;
  if (encoding == IdEncoding::AgentId) hot = target;
  if (encoding != IdEncoding::None) {
    if (hot < 0 || hot >= static_cast<int>(id.size())) {
      throw InputError("target identifier index " + std::to_string(hot) + " out of range");
    }
    id[static_cast<std::size_t>(hot)] = 1.0;
  }
  return id;
}

PriorNetwork PriorNetwork::declare(nn::ParameterStore& store, const std::string& prefix,
                                   int obs_dim, int id_dim, int hidden, nn::Nonlinearity nl,
                                   Rng& rng) {
  PriorNetwork p;
  p.obs_dim_ = obs_dim;
  p.id_dim_ = id_dim;
  p.net_ = nn::Mlp::declare({{obs_dim + id_dim, hidden, 1}, nl, false}, store, prefix, rng);
  return p;
}

PriorNetwork PriorNetwork::bind(const nn::ParameterStore& store, const std::string& prefix,
                                int obs_dim, int id_dim, int hidden, nn::Nonlinearity nl) {
  PriorNetwork p;
  p.obs_dim_ = obs_dim;
  p.id_dim_ = id_dim;
  p.net_ = nn::Mlp::bind({{obs_dim + id_dim, hidden, 1}, nl, false}, store, prefix);
  return p;
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double PriorNetwork::belief(const nn::ParameterStore& store, std::span<const double> obs,
                            std::span<const double> id) const {
  if (static_cast<int>(obs.size()) != obs_dim_) {
    throw ConfigError("prior: observation has " + std::to_string(obs.size()) + " entries, expected " +
                      std::to_string(obs_dim_));
  }
  if (static_cast<int>(id.size()) != id_dim_) {
    throw ConfigError("prior: identifier has " + std::to_string(id.size()) + " entries, expected " +
                      std::to_string(id_dim_));
  }
  nn::Matrix x(obs_dim_ + id_dim_, 1);
  for (int k = 0; k < obs_dim_; ++k) x(k, 0) = obs[static_cast<std::size_t>(k)];
  for (int k = 0; k < id_dim_; ++k) x(obs_dim_ + k, 0) = id[static_cast<std::size_t>(k)];
  return sigmoid(net_.forward(store, x)(0, 0));
}

nn::Matrix PriorNetwork::logits(const nn::ParameterStore& store, const nn::Matrix& inputs,
                                nn::MlpTape* tape) const {
  return net_.forward(store, inputs, tape);
}

std::vector<PriorBelief> prior_beliefs(const PriorNetwork& prior, const nn::ParameterStore& store,
                                       const envs::JointObservation& obs, IdEncoding encoding) {
  struct Pending {
    int observer, target, column;
  };
  std::vector<Pending> pending;
  std::vector<std::pair<int, int>> columns;  // (observer, slot)
  for (int i = 0; i < obs.num_agents; ++i) {
    if (!obs.is_alive(i)) continue;
    const auto fov = obs.field_of_view(i);
    if (fov.empty()) continue;
    if (encoding == IdEncoding::None) {
      const int col = static_cast<int>(columns.size());
      columns.emplace_back(i, -1);
      for (int j : fov) pending.push_back({i, j, col});
    } else {
      for (std::size_t s = 0; s < fov.size(); ++s) {
        pending.push_back({i, fov[s], static_cast<int>(columns.size())});
        columns.emplace_back(i, static_cast<int>(s));
      }
    }
  }
  std::vector<PriorBelief> out;
  if (columns.empty()) return out;

  const int d = prior.obs_dim();
  nn::Matrix x = nn::Matrix::Zero(d + prior.id_dim(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const auto [i, slot] = columns[c];
    const auto o = obs.obs(i);
    if (static_cast<int>(o.size()) != d) throw ConfigError("prior: observation size mismatch");
    for (int k = 0; k < d; ++k) x(k, static_cast<Eigen::Index>(c)) = o[static_cast<std::size_t>(k)];
    if (encoding != IdEncoding::None) {
      const int target = obs.visible_row(i)[static_cast<std::size_t>(slot)];
      const auto id = target_identifier(encoding, target, slot, obs.num_agents, obs.max_visible);
      if (static_cast<int>(id.size()) != prior.id_dim()) {
        throw ConfigError("prior: identifier size mismatch");
      }
      for (std::size_t k = 0; k < id.size(); ++k) {
        x(d + static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) = id[k];
      }
    }
  }
  const nn::Matrix z = prior.logits(store, x);
  out.reserve(pending.size());
  for (const auto& p : pending) out.push_back({p.observer, p.target, sigmoid(z(0, p.column))});
  return out;
}

std::vector<MessageBundle> request_round(std::span<const PriorBelief> beliefs,
                                         const envs::JointObservation& obs, double threshold) {
  const int n = obs.num_agents;
  std::vector<std::vector<std::uint8_t>> wanted(static_cast<std::size_t>(n),
                                                std::vector<std::uint8_t>(static_cast<std::size_t>(n), 0));
  for (const auto& b : beliefs) {
    if (b.observer < 0 || b.observer >= n || b.target < 0 || b.target >= n) {
      throw InputError("belief refers to an unknown agent");
    }
    if (obs.visible_slot(b.observer, b.target) < 0) {
      throw InputError("agent " + std::to_string(b.observer) + " cannot request from agent " +
                       std::to_string(b.target) + " outside its field of view");
    }
    if (b.probability >= threshold) {
      wanted[static_cast<std::size_t>(b.observer)][static_cast<std::size_t>(b.target)] = 1;
    }
  }
  std::vector<MessageBundle> bundles(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (!obs.is_alive(i)) continue;
    for (int j : obs.field_of_view(i)) {
      if (!wanted[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
      const auto payload = obs.obs(j);
      bundles[static_cast<std::size_t>(i)].push_back({j, {payload.begin(), payload.end()}});
    }
  }
  return bundles;
}

std::string to_string(GateMode m) {
  switch (m) {
    case GateMode::Prior: return "prior";
    case GateMode::Full: return "full";
    case GateMode::None: return "none";
    case GateMode::Random: return "random";
    case GateMode::BroadcastPrior: return "broadcast-prior";
  }
  return "unknown";
}

std::vector<PriorBelief> gate_beliefs(const Gate& gate, const PriorNetwork* prior,
                                      const nn::ParameterStore* prior_store,
                                      const envs::JointObservation& obs, IdEncoding encoding,
                                      Rng& rng) {
  if (gate.mode == GateMode::Prior || gate.mode == GateMode::BroadcastPrior) {
    if (prior == nullptr || prior_store == nullptr) {
      throw StateError("gate '" + to_string(gate.mode) + "' needs a trained prior");
    }
    return prior_beliefs(*prior, *prior_store,
                         obs, gate.mode == GateMode::BroadcastPrior ? IdEncoding::None : encoding);
  }
  if (gate.mode == GateMode::Random && !(gate.p_comm >= 0.0 && gate.p_comm <= 1.0)) {
    throw ConfigError("p_comm must lie in [0, 1]");
  }
  std::vector<PriorBelief> out;
  for (int i = 0; i < obs.num_agents; ++i) {
    if (!obs.is_alive(i)) continue;
    for (int j : obs.field_of_view(i)) {
      double p = 0.0;
      if (gate.mode == GateMode::Full) p = 1.0;
      if (gate.mode == GateMode::Random) p = uniform01(rng) < gate.p_comm ? 1.0 : 0.0;
      out.push_back({i, j, p});
    }
  }
  return out;
}

MessageEncoder MessageEncoder::declare(nn::ParameterStore& store, const std::string& prefix,
                                       int payload_size, int hidden, int layers, Rng& rng) {
  MessageEncoder e;
  e.lstm_ = nn::Lstm::declare(store, prefix, payload_size, hidden, layers, rng);
  return e;
}

MessageEncoder MessageEncoder::bind(const nn::ParameterStore& store, const std::string& prefix,
                                    int payload_size, int hidden, int layers) {
  MessageEncoder e;
  e.lstm_ = nn::Lstm::bind(store, prefix, payload_size, hidden, layers);
  return e;
}

MessageEncoder::Batch MessageEncoder::make_batch(
    const std::vector<const MessageBundle*>& bundles) const {
  Batch batch;
  batch.columns = static_cast<int>(bundles.size());
  std::size_t longest = 0;
  for (const auto* b : bundles) longest = std::max(longest, b->size());
  const int p = payload_size();
  for (std::size_t t = 0; t < longest; ++t) {
    nn::Matrix x = nn::Matrix::Zero(p, batch.columns);
    Eigen::RowVectorXd mask = Eigen::RowVectorXd::Zero(batch.columns);
    for (int c = 0; c < batch.columns; ++c) {
      const auto& bundle = *bundles[static_cast<std::size_t>(c)];
      if (t >= bundle.size()) continue;
      const auto& payload = bundle[t].payload;
      if (static_cast<int>(payload.size()) != p) {
        throw ConfigError("message payload has " + std::to_string(payload.size()) +
                          " entries, encoder expects " + std::to_string(p));
      }
      for (int k = 0; k < p; ++k) x(k, c) = payload[static_cast<std::size_t>(k)];
      mask(c) = 1.0;
    }
    batch.steps.push_back(std::move(x));
    batch.masks.push_back(std::move(mask));
  }
  return batch;
}

nn::Matrix MessageEncoder::forward(const nn::ParameterStore& store, const Batch& batch,
                                   nn::LstmTape* tape) const {
  return lstm_.forward(store, batch.steps, batch.masks, batch.columns, tape);
}

std::vector<double> MessageEncoder::encode(const nn::ParameterStore& store,
                                           const MessageBundle& bundle) const {
  const nn::Matrix h = forward(store, make_batch({&bundle}));
  return {h.data(), h.data() + h.size()};
}

CommRecord make_comm_record(int step, const envs::JointObservation& obs,
                            std::span<const MessageBundle> bundles) {
  if (static_cast<int>(bundles.size()) != obs.num_agents) {
    throw ConfigError("one message bundle per agent is required");
  }
  CommRecord r;
  r.step = step;
  r.alive = obs.alive;
  r.observed.resize(static_cast<std::size_t>(obs.num_agents));
  r.requested.resize(static_cast<std::size_t>(obs.num_agents));
  for (int i = 0; i < obs.num_agents; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!obs.is_alive(i)) continue;
    r.observed[k] = static_cast<int>(obs.field_of_view(i).size());
    r.requested[k] = static_cast<int>(bundles[k].size());
  }
  return r;
}

std::vector<OverheadBucket> overhead(std::span<const CommRecord> records, Granularity granularity) {
  std::vector<OverheadBucket> out;
  if (granularity == Granularity::PerStep) {
    std::map<int, OverheadBucket> by_step;
    for (const auto& r : records) {
      auto& b = by_step[r.step];
      b.step = r.step;
      for (std::size_t i = 0; i < r.observed.size(); ++i) {
        if (!r.alive[i]) continue;
        b.numerator += r.requested[i];
        b.denominator += r.observed[i];
      }
    }
    for (auto& [_, b] : by_step) out.push_back(b);
  } else {
    std::map<envs::Cell, OverheadBucket> by_cell;
    for (const auto& r : records) {
      if (r.cells.size() != r.alive.size()) {
        throw InputError("per-location overhead needs a cell for every agent slot");
      }
      for (std::size_t i = 0; i < r.alive.size(); ++i) {
        if (!r.alive[i]) continue;
        auto& b = by_cell[r.cells[i]];
        b.cell = r.cells[i];
        b.denominator += 1;
        if (r.requested[i] > 0) b.numerator += 1;
      }
    }
    for (auto& [_, b] : by_cell) out.push_back(b);
  }
  for (auto& b : out) {
    if (b.denominator > 0) b.ratio = static_cast<double>(b.numerator) / static_cast<double>(b.denominator);
  }
  return out;
}

std::optional<double> overall_overhead(std::span<const CommRecord> records) {
  long long num = 0;
  long long den = 0;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.observed.size(); ++i) {
      if (!r.alive[i]) continue;
      num += r.requested[i];
      den += r.observed[i];
    }
  }
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace i2c::comms
