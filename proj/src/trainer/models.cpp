#include "i2c/trainer/models.hpp"

#include "i2c/errors.hpp"

#include <string>

namespace i2c::trainer {

ModelShape ModelShape::make(const envs::Environment& env, const TrainConfig& config, Mode mode) {
  ModelShape s;
  s.num_agents = env.num_agents();
  s.num_actions = env.num_actions();
  s.obs_dim = env.obs_dim();
  s.max_visible = env.max_visible();
  s.hidden = config.hidden;
  s.encoder_hidden = config.encoder_hidden;
  s.encoder_layers = config.encoder_layers;
  s.prior_hidden = config.prior_hidden;
  s.nonlinearity = config.nonlinearity;
  s.message_critic = mode == Mode::CommReduction;
  s.id_encoding = s.message_critic ? comms::IdEncoding::None : config.id_encoding;
  s.id_dim = comms::id_dimension(s.id_encoding, s.num_agents, s.max_visible);
  return s;
}

int ModelShape::critic_input_size() const {
  return num_agents * (obs_dim + num_actions + (message_critic ? encoder_hidden : 0));
}

PolicyModel PolicyModel::declare(nn::ParameterStore& store, const ModelShape& shape, Rng& rng) {
  PolicyModel p;
  p.encoder_ = comms::MessageEncoder::declare(store, "encoder", shape.obs_dim, shape.encoder_hidden,
                                              shape.encoder_layers, rng);
  p.net_ = nn::Mlp::declare({{shape.obs_dim + shape.encoder_hidden, shape.hidden, shape.hidden,
                              shape.num_actions},
                             shape.nonlinearity},
                            store, "policy", rng);
  return p;
}

PolicyModel PolicyModel::bind(const nn::ParameterStore& store, const ModelShape& shape) {
  PolicyModel p;
  p.encoder_ = comms::MessageEncoder::bind(store, "encoder", shape.obs_dim, shape.encoder_hidden,
                                           shape.encoder_layers);
  p.net_ = nn::Mlp::bind({{shape.obs_dim + shape.encoder_hidden, shape.hidden, shape.hidden,
                           shape.num_actions},
                          shape.nonlinearity},
                         store, "policy");
  return p;
}

nn::Matrix PolicyModel::logits(const nn::ParameterStore& store, const nn::Matrix& obs,
                               const std::vector<const comms::MessageBundle*>& bundles,
                               Tape* tape) const {
  if (static_cast<std::size_t>(obs.cols()) != bundles.size()) {
    throw ConfigError("policy: one message bundle per observation column is required");
  }
  auto batch = encoder_.make_batch(bundles);
  const nn::Matrix c = encoder_.forward(store, batch, tape ? &tape->lstm : nullptr);
  nn::Matrix x(obs.rows() + c.rows(), obs.cols());
  x.topRows(obs.rows()) = obs;
  x.bottomRows(c.rows()) = c;
  if (tape) tape->batch = std::move(batch);
  return net_.forward(store, x, tape ? &tape->mlp : nullptr);
}

void PolicyModel::backward(nn::ParameterStore& store, const Tape& tape,
                           const nn::Matrix& dlogits) const {
  const nn::Matrix dx = net_.backward(store, tape.mlp, dlogits);
  if (tape.batch.steps.empty()) return;
  const int h = encoder_.encoding_size();
  const nn::Matrix dc = dx.bottomRows(h);
  encoder_.lstm().backward(store, &store, tape.lstm, dc);
}

CriticModel CriticModel::declare(nn::ParameterStore& store, const ModelShape& shape, Rng& rng) {
  CriticModel c;
  c.net_ = nn::Mlp::declare({{shape.critic_input_size(), shape.hidden, shape.hidden, 1},
                             shape.nonlinearity},
                            store, "critic", rng);
  if (shape.message_critic) {
    std::vector<double> init(static_cast<std::size_t>(shape.obs_dim));
    for (auto& v : init) v = 0.1 * (2.0 * uniform01(rng) - 1.0);
    c.absent_ = store.add("critic.absent_payload", {static_cast<std::size_t>(shape.obs_dim)},
                          std::move(init));
  }
  return c;
}

CriticModel CriticModel::bind(const nn::ParameterStore& store, const ModelShape& shape) {
  CriticModel c;
  c.net_ = nn::Mlp::bind({{shape.critic_input_size(), shape.hidden, shape.hidden, 1},
                          shape.nonlinearity},
                         store, "critic");
  if (shape.message_critic) c.absent_ = store.index("critic.absent_payload");
  return c;
}

void CriticModel::fill_column(const ModelShape& shape, const envs::JointObservation& obs,
                              std::span<const int> actions, const nn::Matrix* encodings,
                              nn::Matrix& x, Eigen::Index column) const {
  const int n = shape.num_agents;
  const int d = shape.obs_dim;
  const int a = shape.num_actions;
  if (obs.num_agents != n || obs.obs_dim != d || static_cast<int>(actions.size()) != n) {
    throw ConfigError("critic input does not match the model shape");
  }
  auto col = x.col(column);
  col.setZero();
  for (int i = 0; i < n; ++i) {
    const auto o = obs.obs(i);
    for (int k = 0; k < d; ++k) col(i * d + k) = o[static_cast<std::size_t>(k)];
  }
  const int action_base = n * d;
  for (int i = 0; i < n; ++i) {
    if (!obs.is_alive(i)) continue;
    const int ai = actions[static_cast<std::size_t>(i)];
    if (ai < 0 || ai >= a) throw InputError("critic: action out of range");
    col(action_base + i * a + ai) = 1.0;
  }
  if (shape.message_critic) {
    if (encodings == nullptr || encodings->rows() != shape.encoder_hidden ||
        encodings->cols() != n) {
      throw ConfigError("message critic needs one encoding per agent");
    }
    const int base = n * (d + a);
    for (int i = 0; i < n; ++i) {
      col.segment(base + i * shape.encoder_hidden, shape.encoder_hidden) = encodings->col(i);
    }
  }
}

nn::Matrix CriticModel::forward(const nn::ParameterStore& store, const nn::Matrix& x,
                                nn::MlpTape* tape) const {
  return net_.forward(store, x, tape);
}

Model Model::create(const ModelShape& shape, std::uint64_t seed) {
  Model m;
  m.shape = shape;
  Rng policy_rng = make_rng(seed, "init.policy");
  Rng critic_rng = make_rng(seed, "init.critic");
  Rng prior_rng = make_rng(seed, "init.prior");
  m.policy = PolicyModel::declare(m.policy_store, shape, policy_rng);
  m.critic = CriticModel::declare(m.critic_store, shape, critic_rng);
  m.target_store = m.critic_store;
  m.prior = comms::PriorNetwork::declare(m.prior_store, "prior", shape.obs_dim, shape.id_dim,
                                         shape.prior_hidden, shape.nonlinearity, prior_rng);
  return m;
}

nn::Matrix Model::absent_encoding(nn::LstmTape* tape, comms::MessageEncoder::Batch* batch) const {
  if (!critic.absent_payload()) throw StateError("model has no absent-message placeholder");
  const auto payload = critic_store.values(*critic.absent_payload());
  comms::MessageEncoder::Batch b;
  b.columns = 1;
  b.steps.push_back(payload);
  b.masks.push_back(Eigen::RowVectorXd::Ones(1));
  nn::Matrix out = policy.encoder().forward(policy_store, b, tape);
  if (batch) *batch = std::move(b);
  return out;
}

nn::Matrix Model::critic_encodings(std::span<const comms::MessageBundle> bundles) const {
  if (static_cast<int>(bundles.size()) != shape.num_agents) {
    throw ConfigError("one message bundle per agent is required");
  }
  const nn::Matrix absent = absent_encoding();
  std::vector<const comms::MessageBundle*> ptrs;
  for (const auto& b : bundles) ptrs.push_back(&b);
  nn::Matrix enc = policy.encoder().forward(policy_store, policy.encoder().make_batch(ptrs));
  for (int i = 0; i < shape.num_agents; ++i) {
    if (bundles[static_cast<std::size_t>(i)].empty()) enc.col(i) = absent.col(0);
  }
  return enc;
}

namespace {

const char* nonlinearity_name(nn::Nonlinearity nl) {
  return nl == nn::Nonlinearity::Tanh ? "tanh" : "leaky-relu";
}

int meta_int(const nn::Checkpoint& c, const std::string& key) {
  const auto it = c.metadata.find(key);
  if (it == c.metadata.end()) throw ConfigError("checkpoint metadata lacks '" + key + "'");
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ConfigError("checkpoint metadata '" + key + "' is not an integer");
  }
}

}  // namespace

nn::Checkpoint Model::to_checkpoint(const std::map<std::string, std::string>& metadata) const {
  nn::Checkpoint c;
  c.metadata = metadata;
  c.metadata["shape.num_agents"] = std::to_string(shape.num_agents);
  c.metadata["shape.num_actions"] = std::to_string(shape.num_actions);
  c.metadata["shape.obs_dim"] = std::to_string(shape.obs_dim);
  c.metadata["shape.max_visible"] = std::to_string(shape.max_visible);
  c.metadata["shape.hidden"] = std::to_string(shape.hidden);
  c.metadata["shape.encoder_hidden"] = std::to_string(shape.encoder_hidden);
  c.metadata["shape.encoder_layers"] = std::to_string(shape.encoder_layers);
  c.metadata["shape.prior_hidden"] = std::to_string(shape.prior_hidden);
  c.metadata["shape.id_dim"] = std::to_string(shape.id_dim);
  c.metadata["shape.nonlinearity"] = nonlinearity_name(shape.nonlinearity);
  c.metadata["shape.id_encoding"] = comms::to_string(shape.id_encoding);
  c.metadata["shape.message_critic"] = shape.message_critic ? "1" : "0";
  c.metadata["prior_trained"] = prior_trained ? "1" : "0";
  c.stores["policy"] = policy_store;
  c.stores["critic"] = critic_store;
  c.stores["target_critic"] = target_store;
  c.stores["prior"] = prior_store;
  return c;
}

ModelShape Model::shape_of(const nn::Checkpoint& c) {
  ModelShape s;
  s.num_agents = meta_int(c, "shape.num_agents");
  s.num_actions = meta_int(c, "shape.num_actions");
  s.obs_dim = meta_int(c, "shape.obs_dim");
  s.max_visible = meta_int(c, "shape.max_visible");
  s.hidden = meta_int(c, "shape.hidden");
  s.encoder_hidden = meta_int(c, "shape.encoder_hidden");
  s.encoder_layers = meta_int(c, "shape.encoder_layers");
  s.prior_hidden = meta_int(c, "shape.prior_hidden");
  s.id_dim = meta_int(c, "shape.id_dim");
  const auto nl = c.metadata.at("shape.nonlinearity");
  s.nonlinearity = nl == "tanh" ? nn::Nonlinearity::Tanh : nn::Nonlinearity::LeakyRelu;
  s.id_encoding = comms::id_encoding_from_string(c.metadata.at("shape.id_encoding"));
  s.message_critic = meta_int(c, "shape.message_critic") != 0;
  return s;
}

Model Model::from_checkpoint(const nn::Checkpoint& c, const ModelShape& expected) {
  const ModelShape found = shape_of(c);
  auto mismatch = [](const std::string& what, int want, int got) {
    return ConfigError("checkpoint does not fit this environment/config: " + what + " is " +
                       std::to_string(got) + ", expected " + std::to_string(want));
  };
  if (found.num_agents != expected.num_agents) throw mismatch("agent count", expected.num_agents, found.num_agents);
  if (found.num_actions != expected.num_actions) throw mismatch("action count", expected.num_actions, found.num_actions);
  if (found.obs_dim != expected.obs_dim) throw mismatch("observation size", expected.obs_dim, found.obs_dim);
  if (found.max_visible != expected.max_visible) throw mismatch("field-of-view size", expected.max_visible, found.max_visible);
  if (found != expected) {
    throw ConfigError("checkpoint network shape differs from the configured one (hidden sizes, "
                      "encoder, id encoding or critic kind)");
  }
  Model m;
  m.shape = found;
  for (const char* name : {"policy", "critic", "target_critic", "prior"}) {
    if (!c.stores.contains(name)) throw ConfigError(std::string("checkpoint lacks store '") + name + "'");
  }
  m.policy_store = c.stores.at("policy");
  m.critic_store = c.stores.at("critic");
  m.target_store = c.stores.at("target_critic");
  m.prior_store = c.stores.at("prior");
  m.policy = PolicyModel::bind(m.policy_store, found);
  m.critic = CriticModel::bind(m.critic_store, found);
  m.prior = comms::PriorNetwork::bind(m.prior_store, "prior", found.obs_dim, found.id_dim,
                                      found.prior_hidden, found.nonlinearity);
  m.prior_trained = c.metadata.contains("prior_trained") && c.metadata.at("prior_trained") == "1";
  return m;
}

int sample_index(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < probs.size(); ++k) {
    acc += probs(k);
    if (u < acc) return static_cast<int>(k);
  }
  for (Eigen::Index k = probs.size() - 1; k > 0; --k) {
    if (probs(k) > 0.0) return static_cast<int>(k);
  }
  return 0;
}

int greedy_index(const Eigen::Ref<const Eigen::VectorXd>& values) {
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < values.size(); ++k) {
    if (values(k) > values(best)) best = k;
  }
  return static_cast<int>(best);
}

nn::Matrix softmax_columns(const nn::Matrix& logits) {
  nn::Matrix p = logits;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    const double m = p.col(c).maxCoeff();
    p.col(c) = (p.col(c).array() - m).exp().matrix();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

std::vector<double> CriticActionValue::evaluate(const envs::JointObservation& o,
                                                std::span<const causal::JointAction> actions) const {
  if (model_.shape.message_critic) {
    throw ConfigError("this critic needs message encodings; use MessageCriticActionValue");
  }
  nn::Matrix x(model_.shape.critic_input_size(), static_cast<Eigen::Index>(actions.size()));
  for (std::size_t k = 0; k < actions.size(); ++k) {
    model_.critic.fill_column(model_.shape, o, actions[k], nullptr, x, static_cast<Eigen::Index>(k));
  }
  const nn::Matrix q = model_.critic.forward(model_.critic_store, x);
  return {q.data(), q.data() + q.size()};
}

MessageCriticActionValue::MessageCriticActionValue(const Model& model) : model_(model) {
  if (!model.shape.message_critic) throw ConfigError("model has no message-aware critic");
}

std::vector<double> MessageCriticActionValue::encode(const comms::MessageBundle& bundle) const {
  if (bundle.empty()) return absent_encoding();
  return model_.policy.encoder().encode(model_.policy_store, bundle);
}

std::vector<double> MessageCriticActionValue::absent_encoding() const {
  const nn::Matrix a = model_.absent_encoding();
  return {a.data(), a.data() + a.size()};
}

std::vector<double> MessageCriticActionValue::evaluate(
    const envs::JointObservation& o, std::span<const std::vector<double>> encodings,
    std::span<const causal::JointAction> actions) const {
  const int n = model_.shape.num_agents;
  const int h = model_.shape.encoder_hidden;
  if (static_cast<int>(encodings.size()) != n) throw ConfigError("one encoding per agent is required");
  nn::Matrix enc(h, n);
  for (int i = 0; i < n; ++i) {
    const auto& e = encodings[static_cast<std::size_t>(i)];
    if (static_cast<int>(e.size()) != h) throw ConfigError("encoding width mismatch");
    for (int k = 0; k < h; ++k) enc(k, i) = e[static_cast<std::size_t>(k)];
  }
  nn::Matrix x(model_.shape.critic_input_size(), static_cast<Eigen::Index>(actions.size()));
  for (std::size_t k = 0; k < actions.size(); ++k) {
    model_.critic.fill_column(model_.shape, o, actions[k], &enc, x, static_cast<Eigen::Index>(k));
  }
  const nn::Matrix q = model_.critic.forward(model_.critic_store, x);
  return {q.data(), q.data() + q.size()};
}

}  // namespace i2c::trainer
