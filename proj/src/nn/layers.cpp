#include "i2c/nn/layers.hpp"

#include "i2c/errors.hpp"

#include <cmath>

namespace i2c::nn {
namespace {

std::vector<double> uniform_values(std::size_t n, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

void check_shape(const ParameterStore& store, std::size_t idx, std::size_t rows,
                 std::size_t cols) {
  const auto& e = store.entry(idx);
  if (e.rows() != rows || e.cols() != cols) {
    throw ConfigError("parameter '" + e.name + "' has unexpected shape");
  }
}

Matrix sigmoid(const Matrix& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

Matrix activate(const Matrix& z, Nonlinearity nl) {
  if (nl == Nonlinearity::Tanh) return z.array().tanh().matrix();
  return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
}

Matrix activation_grad(const Matrix& z, const Matrix& dy, Nonlinearity nl) {
  if (nl == Nonlinearity::Tanh) {
    return (dy.array() * (1.0 - z.array().tanh().square())).matrix();
  }
  return dy.binaryExpr(z, [](double d, double v) { return v > 0.0 ? d : kLeakySlope * d; });
}

}  // namespace

Dense Dense::declare(ParameterStore& store, const std::string& prefix, int in, int out,
                     Rng& rng) {
  if (in <= 0 || out <= 0) throw ConfigError("dense layer '" + prefix + "' needs positive sizes");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  Dense d;
  d.in_ = in;
  d.out_ = out;
  const auto n = static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
  d.w_ = store.add(prefix + ".weight", {static_cast<std::size_t>(out), static_cast<std::size_t>(in)},
                   uniform_values(n, bound, rng));
  d.b_ = store.add(prefix + ".bias", {static_cast<std::size_t>(out)},
                   uniform_values(static_cast<std::size_t>(out), bound, rng));
  return d;
}

Dense Dense::bind(const ParameterStore& store, const std::string& prefix, int in, int out) {
  Dense d;
  d.in_ = in;
  d.out_ = out;
  d.w_ = store.index(prefix + ".weight");
  d.b_ = store.index(prefix + ".bias");
  check_shape(store, d.w_, static_cast<std::size_t>(out), static_cast<std::size_t>(in));
  check_shape(store, d.b_, static_cast<std::size_t>(out), 1);
  return d;
}

Matrix Dense::forward(const ParameterStore& store, const Matrix& x) const {
  if (x.rows() != in_) {
    throw ConfigError("dense input has " + std::to_string(x.rows()) + " rows, expected " +
                      std::to_string(in_));
  }
  Matrix y = store.values(w_) * x;
  y.colwise() += store.values(b_).col(0);
  return y;
}

Matrix Dense::backward(ParameterStore& store, const Matrix& x, const Matrix& dy) const {
  store.grads(w_).noalias() += dy * x.transpose();
  store.grads(b_).col(0) += dy.rowwise().sum();
  return store.values(w_).transpose() * dy;
}

Mlp Mlp::declare(const NetworkSpec& spec, ParameterStore& store, const std::string& prefix,
                 Rng& rng) {
  if (spec.layer_sizes.size() < 3) {
    throw ConfigError("network '" + prefix + "' needs at least one hidden layer");
  }
  Mlp m;
  m.spec_ = spec;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    m.layers_.push_back(Dense::declare(store, prefix + ".l" + std::to_string(l),
                                       spec.layer_sizes[l], spec.layer_sizes[l + 1], rng));
  }
  return m;
}

Mlp Mlp::bind(const NetworkSpec& spec, const ParameterStore& store, const std::string& prefix) {
  if (spec.layer_sizes.size() < 3) {
    throw ConfigError("network '" + prefix + "' needs at least one hidden layer");
  }
  Mlp m;
  m.spec_ = spec;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    m.layers_.push_back(Dense::bind(store, prefix + ".l" + std::to_string(l),
                                    spec.layer_sizes[l], spec.layer_sizes[l + 1]));
  }
  return m;
}

Matrix Mlp::forward(const ParameterStore& store, const Matrix& x, MlpTape* tape) const {
  if (tape) {
    tape->inputs.clear();
    tape->pre_activations.clear();
    tape->valid = false;
  }
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = layers_[l].forward(store, h);
    if (tape) tape->inputs.push_back(std::move(h));
    if (l + 1 < layers_.size()) {
      h = activate(z, spec_.nonlinearity);
      if (tape) tape->pre_activations.push_back(std::move(z));
    } else {
      h = std::move(z);
    }
  }
  if (tape) tape->valid = true;
  return h;
}

Matrix Mlp::backward(ParameterStore& store, const MlpTape& tape, const Matrix& dy) const {
  if (!tape.valid || tape.inputs.size() != layers_.size()) {
    throw StateError("backward called without a matching forward pass");
  }
  Matrix d = dy;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (l + 1 < layers_.size()) d = activation_grad(tape.pre_activations[l], d, spec_.nonlinearity);
    d = layers_[l].backward(store, tape.inputs[l], d);
  }
  return d;
}

Vector forward(const Mlp& net, const ParameterStore& store, std::span<const double> input) {
  if (static_cast<int>(input.size()) != net.spec().input_size()) {
    throw ConfigError("input length " + std::to_string(input.size()) + " does not match network input " +
                      std::to_string(net.spec().input_size()));
  }
  Matrix x = Eigen::Map<const Matrix>(input.data(), static_cast<Eigen::Index>(input.size()), 1);
  return net.forward(store, x).col(0);
}

Lstm Lstm::declare(ParameterStore& store, const std::string& prefix, int input, int hidden,
                   int layers, Rng& rng) {
  if (input <= 0 || hidden <= 0 || layers <= 0) {
    throw ConfigError("lstm '" + prefix + "' needs positive sizes");
  }
  Lstm lstm;
  lstm.input_ = input;
  lstm.hidden_ = hidden;
  const auto h = static_cast<std::size_t>(hidden);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(l == 0 ? input : hidden);
    const std::string p = prefix + ".l" + std::to_string(l);
    lstm.wx_.push_back(store.add(p + ".wx", {4 * h, in}, uniform_values(4 * h * in, bound, rng)));
    lstm.wh_.push_back(store.add(p + ".wh", {4 * h, h}, uniform_values(4 * h * h, bound, rng)));
    std::vector<double> bias(4 * h, 0.0);
    // Gate order is input, forget, cell, output; forget gates start open.
    for (std::size_t k = h; k < 2 * h; ++k) bias[k] = 1.0;
    lstm.b_.push_back(store.add(p + ".bias", {4 * h}, std::move(bias)));
  }
  return lstm;
}

Lstm Lstm::bind(const ParameterStore& store, const std::string& prefix, int input, int hidden,
                int layers) {
  Lstm lstm;
  lstm.input_ = input;
  lstm.hidden_ = hidden;
  const auto h = static_cast<std::size_t>(hidden);
  for (int l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(l == 0 ? input : hidden);
    const std::string p = prefix + ".l" + std::to_string(l);
    lstm.wx_.push_back(store.index(p + ".wx"));
    lstm.wh_.push_back(store.index(p + ".wh"));
    lstm.b_.push_back(store.index(p + ".bias"));
    check_shape(store, lstm.wx_.back(), 4 * h, in);
    check_shape(store, lstm.wh_.back(), 4 * h, h);
    check_shape(store, lstm.b_.back(), 4 * h, 1);
  }
  return lstm;
}

Matrix Lstm::forward(const ParameterStore& store, const std::vector<Matrix>& steps,
                     const std::vector<Eigen::RowVectorXd>& masks, int batch,
                     LstmTape* tape) const {
  if (steps.size() != masks.size()) throw ConfigError("lstm steps and masks differ in length");
  const Eigen::Index h = hidden_;
  const auto layers = wx_.size();
  if (tape) {
    tape->layers.assign(layers, {});
    tape->masks = masks;
    tape->batch = batch;
    tape->valid = false;
  }
  std::vector<Matrix> hs(layers, Matrix::Zero(h, batch));
  std::vector<Matrix> cs(layers, Matrix::Zero(h, batch));
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (steps[t].rows() != input_ || steps[t].cols() != batch) {
      throw ConfigError("lstm step input has shape " + std::to_string(steps[t].rows()) + "x" +
                        std::to_string(steps[t].cols()) + ", expected " + std::to_string(input_) +
                        "x" + std::to_string(batch));
    }
    const Eigen::RowVectorXd& m = masks[t];
    const Eigen::RowVectorXd keep = (1.0 - m.array()).matrix();
    Matrix x = steps[t];
    for (std::size_t l = 0; l < layers; ++l) {
      Matrix z = store.values(wx_[l]) * x + store.values(wh_[l]) * hs[l];
      z.colwise() += store.values(b_[l]).col(0);
      Matrix ig = sigmoid(z.topRows(h));
      Matrix fg = sigmoid(z.middleRows(h, h));
      Matrix gg = z.middleRows(2 * h, h).array().tanh().matrix();
      Matrix og = sigmoid(z.bottomRows(h));
      Matrix c_new = (fg.array() * cs[l].array() + ig.array() * gg.array()).matrix();
      Matrix c_tanh = c_new.array().tanh().matrix();
      Matrix h_new = (og.array() * c_tanh.array()).matrix();
      Matrix c_next = c_new.array().rowwise() * m.array() + cs[l].array().rowwise() * keep.array();
      Matrix h_next = h_new.array().rowwise() * m.array() + hs[l].array().rowwise() * keep.array();
      if (tape) {
        tape->layers[l].push_back(LstmStepRecord{x, hs[l], cs[l], std::move(ig), std::move(fg),
                                                 std::move(gg), std::move(og), std::move(c_tanh)});
      }
      hs[l] = std::move(h_next);
      cs[l] = std::move(c_next);
      x = hs[l];
    }
  }
  if (tape) tape->valid = true;
  return hs.back();
}

std::vector<Matrix> Lstm::backward(const ParameterStore& store, ParameterStore* grad_sink,
                                   const LstmTape& tape, const Matrix& dh) const {
  if (!tape.valid || tape.layers.size() != wx_.size()) {
    throw StateError("lstm backward called without a matching forward pass");
  }
  const Eigen::Index h = hidden_;
  const auto layers = wx_.size();
  const std::size_t steps = tape.masks.size();
  const int batch = tape.batch;
  std::vector<Matrix> dh_carry(layers, Matrix::Zero(h, batch));
  std::vector<Matrix> dc_carry(layers, Matrix::Zero(h, batch));
  dh_carry.back() = dh;
  std::vector<Matrix> dx_steps(steps);
  for (std::size_t t = steps; t-- > 0;) {
    const Eigen::RowVectorXd& m = tape.masks[t];
    const Eigen::RowVectorXd keep = (1.0 - m.array()).matrix();
    Matrix from_above;
    for (std::size_t l = layers; l-- > 0;) {
      const LstmStepRecord& r = tape.layers[l][t];
      Matrix dh_total = dh_carry[l];
      if (l + 1 < layers) dh_total += from_above;
      const Matrix& dc_total = dc_carry[l];
      Matrix dh_new = dh_total.array().rowwise() * m.array();
      Matrix dc_new = (dc_total.array().rowwise() * m.array()).matrix() +
                      (dh_new.array() * r.o.array() * (1.0 - r.c_tanh.array().square())).matrix();
      Matrix dz(4 * h, batch);
      dz.topRows(h) = (dc_new.array() * r.g.array() * r.i.array() * (1.0 - r.i.array())).matrix();
      dz.middleRows(h, h) =
          (dc_new.array() * r.c_prev.array() * r.f.array() * (1.0 - r.f.array())).matrix();
      dz.middleRows(2 * h, h) = (dc_new.array() * r.i.array() * (1.0 - r.g.array().square())).matrix();
      dz.bottomRows(h) =
          (dh_new.array() * r.c_tanh.array() * r.o.array() * (1.0 - r.o.array())).matrix();
      if (grad_sink) {
        grad_sink->grads(wx_[l]).noalias() += dz * r.x.transpose();
        grad_sink->grads(wh_[l]).noalias() += dz * r.h_prev.transpose();
        grad_sink->grads(b_[l]).col(0) += dz.rowwise().sum();
      }
      Matrix dx = store.values(wx_[l]).transpose() * dz;
      dh_carry[l] = store.values(wh_[l]).transpose() * dz +
                    (dh_total.array().rowwise() * keep.array()).matrix();
      dc_carry[l] = (dc_new.array() * r.f.array()).matrix() +
                    (dc_total.array().rowwise() * keep.array()).matrix();
      if (l == 0) {
        dx_steps[t] = std::move(dx);
      } else {
        from_above = std::move(dx);
      }
    }
  }
  return dx_steps;
}

}  // namespace i2c::nn
