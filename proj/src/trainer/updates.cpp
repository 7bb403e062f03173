#include "i2c/trainer/updates.hpp"

#include "i2c/errors.hpp"
#include "i2c/nn/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace i2c::trainer {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Eigen::VectorXd log_softmax(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  const double lse = m + std::log((v.array() - m).exp().sum());
  return (v.array() - lse).matrix();
}

// Encoded bundles for every (item, agent), (h x B*N) with column b*N + j.
nn::Matrix encode_all(const Model& model, const std::vector<std::vector<comms::MessageBundle>>& bundles) {
  std::vector<const comms::MessageBundle*> ptrs;
  for (const auto& per_item : bundles) {
    for (const auto& b : per_item) ptrs.push_back(&b);
  }
  const auto& enc = model.policy.encoder();
  return enc.forward(model.policy_store, enc.make_batch(ptrs));
}

// Critic encodings for one item: encoded bundle, or the absent placeholder
// for empty (or dropped) slots.
nn::Matrix item_encodings(const Model& model, const nn::Matrix& all, const nn::Matrix& absent,
                          const std::vector<comms::MessageBundle>& bundles, std::size_t item,
                          const std::vector<std::uint8_t>* dropped) {
  const int n = model.shape.num_agents;
  nn::Matrix enc(model.shape.encoder_hidden, n);
  for (int j = 0; j < n; ++j) {
    const bool use_absent = bundles[static_cast<std::size_t>(j)].empty() ||
                            (dropped != nullptr && (*dropped)[static_cast<std::size_t>(j)] != 0);
    enc.col(j) = use_absent ? absent.col(0) : all.col(static_cast<Eigen::Index>(item) * n + j);
  }
  return enc;
}

void check_finite(double loss, const char* what, const PreparedBatch& batch) {
  if (std::isfinite(loss)) return;
  double mean_r = 0.0;
  for (const auto* t : batch.items) mean_r += t->reward;
  if (!batch.items.empty()) mean_r /= static_cast<double>(batch.items.size());
  std::ostringstream msg;
  msg << what << " loss became " << loss << " (batch of " << batch.items.size()
      << " transitions, mean reward " << mean_r << ")";
  throw DivergenceError(msg.str());
}

}  // namespace

PreparedBatch prepare_batch(const Model& model, std::vector<const JointTransition*> items,
                            const comms::Gate& gate, double message_dropout, Rng& rng) {
  PreparedBatch b;
  b.items = std::move(items);
  b.bundles.reserve(b.items.size());
  b.next_bundles.reserve(b.items.size());
  for (const auto* t : b.items) {
    const auto now = comms::gate_beliefs(gate, &model.prior, &model.prior_store, t->obs,
                                         model.shape.id_encoding, rng);
    b.bundles.push_back(comms::request_round(now, t->obs, gate.threshold));
    const auto next = comms::gate_beliefs(gate, &model.prior, &model.prior_store, t->next_obs,
                                          model.shape.id_encoding, rng);
    b.next_bundles.push_back(comms::request_round(next, t->next_obs, gate.threshold));
    if (model.shape.message_critic) {
      std::vector<std::uint8_t> drop(static_cast<std::size_t>(model.shape.num_agents), 0);
      for (auto& d : drop) d = uniform01(rng) < message_dropout ? 1 : 0;
      b.dropped.push_back(std::move(drop));
    }
  }
  return b;
}

std::vector<double> critic_targets(const Model& model, const PreparedBatch& batch, double gamma,
                                   bool use_target, Rng& rng) {
  const auto& s = model.shape;
  const std::size_t n_items = batch.items.size();
  std::vector<std::pair<std::size_t, int>> owners;
  std::vector<const comms::MessageBundle*> ptrs;
  for (std::size_t b = 0; b < n_items; ++b) {
    const auto& o = batch.items[b]->next_obs;
    for (int i = 0; i < s.num_agents; ++i) {
      if (!o.is_alive(i)) continue;
      owners.emplace_back(b, i);
      ptrs.push_back(&batch.next_bundles[b][static_cast<std::size_t>(i)]);
    }
  }
  nn::Matrix obs(s.obs_dim, static_cast<Eigen::Index>(owners.size()));
  for (std::size_t c = 0; c < owners.size(); ++c) {
    const auto o = batch.items[owners[c].first]->next_obs.obs(owners[c].second);
    for (int k = 0; k < s.obs_dim; ++k) obs(k, static_cast<Eigen::Index>(c)) = o[static_cast<std::size_t>(k)];
  }
  std::vector<std::vector<int>> next_actions(n_items, std::vector<int>(static_cast<std::size_t>(s.num_agents), 0));
  if (!owners.empty()) {
    const nn::Matrix probs = softmax_columns(model.policy.logits(model.policy_store, obs, ptrs));
    for (std::size_t c = 0; c < owners.size(); ++c) {
      next_actions[owners[c].first][static_cast<std::size_t>(owners[c].second)] =
          sample_index(probs.col(static_cast<Eigen::Index>(c)), rng);
    }
  }

  nn::Matrix x(s.critic_input_size(), static_cast<Eigen::Index>(n_items));
  nn::Matrix all;
  nn::Matrix absent;
  if (s.message_critic) {
    all = encode_all(model, batch.next_bundles);
    absent = model.absent_encoding();
  }
  for (std::size_t b = 0; b < n_items; ++b) {
    nn::Matrix enc;
    if (s.message_critic) enc = item_encodings(model, all, absent, batch.next_bundles[b], b, nullptr);
    model.critic.fill_column(s, batch.items[b]->next_obs, next_actions[b],
                             s.message_critic ? &enc : nullptr, x, static_cast<Eigen::Index>(b));
  }
  const nn::Matrix q = model.critic.forward(use_target ? model.target_store : model.critic_store, x);
  std::vector<double> y(n_items);
  for (std::size_t b = 0; b < n_items; ++b) y[b] = batch.items[b]->reward + gamma * q(0, static_cast<Eigen::Index>(b));
  return y;
}

CriticInputs critic_inputs(const Model& model, const PreparedBatch& batch, std::vector<double> y) {
  const auto& s = model.shape;
  const std::size_t n_items = batch.items.size();
  if (y.size() != n_items) throw ConfigError("one regression target per transition is required");
  CriticInputs in;
  in.y = std::move(y);
  in.x.resize(s.critic_input_size(), static_cast<Eigen::Index>(n_items));
  nn::Matrix all;
  nn::Matrix absent;
  if (s.message_critic) {
    all = encode_all(model, batch.bundles);
    absent = nn::Matrix::Zero(s.encoder_hidden, 1);
  }
  for (std::size_t b = 0; b < n_items; ++b) {
    nn::Matrix enc;
    if (s.message_critic) {
      const auto* dropped = batch.dropped.empty() ? nullptr : &batch.dropped[b];
      enc = item_encodings(model, all, absent, batch.bundles[b], b, dropped);
      for (int j = 0; j < s.num_agents; ++j) {
        const auto k = static_cast<std::size_t>(j);
        if (batch.bundles[b][k].empty() || (dropped && (*dropped)[k])) {
          in.absent_slots.emplace_back(static_cast<int>(b), j);
        }
      }
    }
    model.critic.fill_column(s, batch.items[b]->obs, batch.items[b]->actions,
                             s.message_critic ? &enc : nullptr, in.x, static_cast<Eigen::Index>(b));
  }
  return in;
}

double critic_loss(Model& model, const CriticInputs& in, bool accumulate) {
  const auto& s = model.shape;
  const Eigen::Index h = s.encoder_hidden;
  const Eigen::Index base = static_cast<Eigen::Index>(s.num_agents) * (s.obs_dim + s.num_actions);
  nn::Matrix x = in.x;
  nn::LstmTape absent_tape;
  if (!in.absent_slots.empty()) {
    const nn::Matrix absent = model.absent_encoding(accumulate ? &absent_tape : nullptr);
    for (const auto& [col, agent] : in.absent_slots) x.block(base + agent * h, col, h, 1) = absent;
  }
  nn::MlpTape tape;
  const nn::Matrix q = model.critic.forward(model.critic_store, x, accumulate ? &tape : nullptr);
  const auto m = static_cast<double>(in.y.size());
  const Eigen::Map<const Eigen::RowVectorXd> y(in.y.data(), static_cast<Eigen::Index>(in.y.size()));
  const Eigen::RowVectorXd err = q.row(0) - y;
  const double loss = err.squaredNorm() / m;
  if (!accumulate) return loss;

  const nn::Matrix dq = 2.0 * err / m;
  const nn::Matrix dx = model.critic.net().backward(model.critic_store, tape, dq);
  if (!in.absent_slots.empty()) {
    nn::Matrix dabsent = nn::Matrix::Zero(h, 1);
    for (const auto& [col, agent] : in.absent_slots) dabsent += dx.block(base + agent * h, col, h, 1);
    const auto dpayload = model.policy.encoder().lstm().backward(model.policy_store, nullptr,
                                                                 absent_tape, dabsent);
    model.critic_store.grads(*model.critic.absent_payload()) += dpayload.front();
  }
  return loss;
}

PolicyInputs policy_inputs(const Model& model, const PreparedBatch& batch) {
  const auto& s = model.shape;
  const int a = s.num_actions;
  std::vector<std::pair<std::size_t, int>> owners;
  PolicyInputs in;
  for (std::size_t b = 0; b < batch.items.size(); ++b) {
    const auto& o = batch.items[b]->obs;
    for (int i = 0; i < s.num_agents; ++i) {
      if (!o.is_alive(i)) continue;
      owners.emplace_back(b, i);
      in.bundles.push_back(&batch.bundles[b][static_cast<std::size_t>(i)]);
    }
  }
  const auto m = static_cast<Eigen::Index>(owners.size());
  in.obs.resize(s.obs_dim, m);
  nn::Matrix x(s.critic_input_size(), m * a);
  nn::Matrix all;
  nn::Matrix absent;
  std::vector<nn::Matrix> enc_cache;
  if (s.message_critic) {
    all = encode_all(model, batch.bundles);
    absent = model.absent_encoding();
    for (std::size_t b = 0; b < batch.items.size(); ++b) {
      enc_cache.push_back(item_encodings(model, all, absent, batch.bundles[b], b, nullptr));
    }
  }
  for (Eigen::Index c = 0; c < m; ++c) {
    const auto [b, i] = owners[static_cast<std::size_t>(c)];
    const auto* t = batch.items[b];
    const auto o = t->obs.obs(i);
    for (int k = 0; k < s.obs_dim; ++k) in.obs(k, c) = o[static_cast<std::size_t>(k)];
    std::vector<int> joint = t->actions;
    for (int k = 0; k < a; ++k) {
      joint[static_cast<std::size_t>(i)] = k;
      model.critic.fill_column(s, t->obs, joint, s.message_critic ? &enc_cache[b] : nullptr, x,
                               c * a + k);
    }
  }
  const nn::Matrix q = model.critic.forward(model.critic_store, x);
  in.q = Eigen::Map<const nn::Matrix>(q.data(), a, m);
  return in;
}

double policy_loss(Model& model, const PolicyInputs& in, double lambda, double eta, bool accumulate) {
  const Eigen::Index m = in.obs.cols();
  if (m == 0) return 0.0;
  PolicyModel::Tape tape;
  const nn::Matrix z = model.policy.logits(model.policy_store, in.obs, in.bundles,
                                           accumulate ? &tape : nullptr);
  nn::Matrix dz(z.rows(), m);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < m; ++c) {
    const Eigen::VectorXd log_pi = log_softmax(z.col(c));
    const Eigen::VectorXd pi = log_pi.array().exp().matrix();
    const Eigen::VectorXd q = in.q.col(c);
    const Eigen::VectorXd log_p = log_softmax(lambda * q);
    const Eigen::VectorXd gap = log_pi - log_p;
    loss += -pi.dot(q) + eta * pi.dot(gap);
    const Eigen::VectorXd g = -q + eta * (gap.array() + 1.0).matrix();
    dz.col(c) = (pi.array() * (g.array() - pi.dot(g))).matrix();
  }
  loss /= static_cast<double>(m);
  if (accumulate) model.policy.backward(model.policy_store, tape, dz / static_cast<double>(m));
  return loss;
}

PriorInputs prior_inputs(const Model& model, const causal::CausalDataset& dataset,
                         std::span<const std::size_t> rows) {
  const int d = model.prior.obs_dim();
  const int id = model.prior.id_dim();
  PriorInputs in;
  in.x.resize(d + id, static_cast<Eigen::Index>(rows.size()));
  in.y.reserve(rows.size());
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto& sample = dataset.samples.at(rows[c]);
    if (static_cast<int>(sample.observation.size()) != d) {
      throw ConfigError("dataset observations do not match the prior input size");
    }
    const auto ident = dataset.identifier(rows[c]);
    if (static_cast<int>(ident.size()) != id) {
      throw ConfigError("dataset identifiers do not match the prior id size");
    }
    for (int k = 0; k < d; ++k) in.x(k, static_cast<Eigen::Index>(c)) = sample.observation[static_cast<std::size_t>(k)];
    for (int k = 0; k < id; ++k) in.x(d + k, static_cast<Eigen::Index>(c)) = ident[static_cast<std::size_t>(k)];
    in.y.push_back(static_cast<double>(sample.label));
  }
  return in;
}

double prior_loss(Model& model, const PriorInputs& in, bool accumulate) {
  const Eigen::Index m = in.x.cols();
  if (m == 0) return 0.0;
  nn::MlpTape tape;
  const nn::Matrix z = model.prior.logits(model.prior_store, in.x, accumulate ? &tape : nullptr);
  double loss = 0.0;
  nn::Matrix dz(1, m);
  for (Eigen::Index c = 0; c < m; ++c) {
    const double zc = z(0, c);
    const double y = in.y[static_cast<std::size_t>(c)];
    loss += softplus(zc) - y * zc;
    dz(0, c) = (sigmoid(zc) - y) / static_cast<double>(m);
  }
  if (accumulate) model.prior.net().backward(model.prior_store, tape, dz);
  return loss / static_cast<double>(m);
}

double prior_accuracy(const Model& model, const PriorInputs& in) {
  const Eigen::Index m = in.x.cols();
  if (m == 0) return 0.0;
  const nn::Matrix z = model.prior.logits(model.prior_store, in.x);
  int hits = 0;
  for (Eigen::Index c = 0; c < m; ++c) {
    const bool request = sigmoid(z(0, c)) >= comms::kRequestThreshold;
    hits += request == (in.y[static_cast<std::size_t>(c)] >= 0.5) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(m);
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

AuditResult audit_gradient(nn::ParameterStore& store, const std::function<double(bool)>& loss,
                           int coordinates, double step, Rng& rng) {
  store.zero_grad();
  loss(true);
  AuditResult result;
  const std::size_t total = store.parameter_count();
  if (total == 0) return result;
  for (int k = 0; k < coordinates; ++k) {
    std::size_t flat = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
    std::size_t e = 0;
    while (flat >= store.entry(e).size()) flat -= store.entry(e++).size();
    auto& entry = store.entry(e);
    const double saved = entry.values[flat];
    entry.values[flat] = saved + step;
    const double up = loss(false);
    entry.values[flat] = saved - step;
    const double down = loss(false);
    entry.values[flat] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(entry.grads[flat], numeric);
    ++result.checked;
    if (err > result.max_relative_error) {
      result.max_relative_error = err;
      result.worst_parameter = entry.name + "[" + std::to_string(flat) + "]";
    }
  }
  return result;
}

namespace {

double audited(nn::ParameterStore& store, const std::function<double(bool)>& loss,
               const UpdateOptions& opt, const char* what) {
  if (!opt.audit) return loss(true);
  Rng audit_rng = make_rng(store.version(), what);
  const auto r = audit_gradient(store, loss, opt.audit_coordinates, 1e-6, audit_rng);
  if (r.max_relative_error > opt.audit_tolerance) {
    std::ostringstream msg;
    msg << what << " gradient audit failed at " << r.worst_parameter << ": relative error "
        << r.max_relative_error << " > " << opt.audit_tolerance;
    throw AuditError(msg.str());
  }
  return loss(false);
}

}  // namespace

UpdateStats update(Model& model, const PreparedBatch& batch, const UpdateOptions& opt, Rng& rng) {
  UpdateStats stats;
  auto y = critic_targets(model, batch, opt.gamma, opt.target_network, rng);
  const CriticInputs cin = critic_inputs(model, batch, std::move(y));
  model.critic_store.zero_grad();
  stats.critic_loss = audited(model.critic_store,
                              [&](bool acc) { return critic_loss(model, cin, acc); }, opt, "critic");
  check_finite(stats.critic_loss, "critic", batch);
  if (opt.grad_clip > 0.0) nn::clip_grad_norm(model.critic_store, opt.grad_clip);
  nn::optimizer_step(model.critic_store, opt.lr_critic, opt.optimizer);

  const PolicyInputs pin = policy_inputs(model, batch);
  model.policy_store.zero_grad();
  stats.policy_loss = audited(
      model.policy_store, [&](bool acc) { return policy_loss(model, pin, opt.lambda, opt.eta, acc); },
      opt, "policy");
  check_finite(stats.policy_loss, "policy", batch);
  if (opt.grad_clip > 0.0) nn::clip_grad_norm(model.policy_store, opt.grad_clip);
  nn::optimizer_step(model.policy_store, opt.lr_policy, opt.optimizer);

  if (opt.target_network) {
    model.target_store.blend_towards(model.critic_store, opt.tau);
  } else {
    model.target_store.copy_values_from(model.critic_store);
  }
  return stats;
}

PriorReport train_prior(Model& model, const causal::CausalDataset& labeled, int epochs,
                        int batch_size, double learning_rate, std::uint64_t seed) {
  if (labeled.empty()) throw InputError("cannot train the prior on an empty dataset");
  if (!labeled.delta) throw StateError("the dataset must be labelled before prior training");
  PriorReport report;
  const std::size_t n = labeled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = make_rng(seed, "prior.split");
  std::shuffle(order.begin(), order.end(), split_rng);
  const std::size_t heldout = n >= 10 ? n / 10 : 0;
  const std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(heldout));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(heldout), order.end());
  report.train_size = train.size();
  report.heldout_size = held.size();
  report.positive_fraction = causal::positive_fraction(labeled);
  report.single_class = report.positive_fraction == 0.0 || report.positive_fraction == 1.0;

  const PriorInputs held_in = prior_inputs(model, labeled, held);
  report.initial_heldout_loss = prior_loss(model, held_in, false);
  Rng batch_rng = make_rng(seed, "prior.batches");
  const auto bs = static_cast<std::size_t>(batch_size);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), batch_rng);
    for (std::size_t start = 0; start < train.size(); start += bs) {
      const std::size_t end = std::min(train.size(), start + bs);
      const PriorInputs in = prior_inputs(model, labeled, std::span(train).subspan(start, end - start));
      model.prior_store.zero_grad();
      const double loss = prior_loss(model, in, true);
      if (!std::isfinite(loss)) throw DivergenceError("prior loss became non-finite");
      nn::optimizer_step(model.prior_store, learning_rate);
    }
  }
  report.final_heldout_loss = prior_loss(model, held_in, false);
  report.heldout_accuracy = prior_accuracy(model, held_in);
  model.prior_trained = true;
  return report;
}

}  // namespace i2c::trainer
