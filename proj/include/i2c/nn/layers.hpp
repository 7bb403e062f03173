#pragma once

#include "i2c/nn/parameter_store.hpp"
#include "i2c/rng.hpp"

#include <span>
#include <string>
#include <vector>

namespace i2c::nn {

enum class Nonlinearity { LeakyRelu, Tanh };

inline constexpr double kLeakySlope = 0.01;

/// Layer sizes include input and output: {in, hidden..., out}.
struct NetworkSpec {
  std::vector<int> layer_sizes;
  Nonlinearity nonlinearity = Nonlinearity::LeakyRelu;
  bool recurrent = false;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
};

/// y = W x + b over a batch of column vectors.
class Dense {
 public:
  Dense() = default;
  static Dense declare(ParameterStore& store, const std::string& prefix, int in, int out,
                       Rng& rng);
  static Dense bind(const ParameterStore& store, const std::string& prefix, int in, int out);

  int in() const { return in_; }
  int out() const { return out_; }
  std::size_t weight_index() const { return w_; }
  std::size_t bias_index() const { return b_; }

  Matrix forward(const ParameterStore& store, const Matrix& x) const;
  /// Accumulates dW, db into `store` and returns dL/dx.
  Matrix backward(ParameterStore& store, const Matrix& x, const Matrix& dy) const;

 private:
  int in_ = 0;
  int out_ = 0;
  std::size_t w_ = 0;
  std::size_t b_ = 0;
};

/// Activations recorded by a forward pass for the matching backward pass.
struct MlpTape {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre_activations;
  bool valid = false;
};

/// Fully connected stack; the nonlinearity follows every layer except the last.
class Mlp {
 public:
  Mlp() = default;
  static Mlp declare(const NetworkSpec& spec, ParameterStore& store, const std::string& prefix,
                     Rng& rng);
  static Mlp bind(const NetworkSpec& spec, const ParameterStore& store,
                  const std::string& prefix);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Dense>& layers() const { return layers_; }

  /// `x` is (input_size x batch). Throws ConfigError on a row mismatch.
  Matrix forward(const ParameterStore& store, const Matrix& x, MlpTape* tape = nullptr) const;
  /// Throws StateError if `tape` holds no forward pass.
  Matrix backward(ParameterStore& store, const MlpTape& tape, const Matrix& dy) const;

 private:
  NetworkSpec spec_;
  std::vector<Dense> layers_;
};

/// Single-input convenience wrapper around Mlp::forward.
Vector forward(const Mlp& net, const ParameterStore& store, std::span<const double> input);

struct LstmStepRecord {
  Matrix x, h_prev, c_prev, i, f, g, o, c_tanh;
};

struct LstmTape {
  std::vector<std::vector<LstmStepRecord>> layers;  // [layer][step]
  std::vector<Eigen::RowVectorXd> masks;            // [step]
  int batch = 0;
  bool valid = false;
};

/// Stacked LSTM over variable-length sequences. Sequences are left-aligned;
/// a column whose mask is 0 at step t carries its state through unchanged,
/// so the returned top-layer hidden state is the state after each column's
/// last real element. An all-empty batch returns the zero initial state.
class Lstm {
 public:
  Lstm() = default;
  static Lstm declare(ParameterStore& store, const std::string& prefix, int input, int hidden,
                      int layers, Rng& rng);
  static Lstm bind(const ParameterStore& store, const std::string& prefix, int input, int hidden,
                   int layers);

  int input_size() const { return input_; }
  int hidden_size() const { return hidden_; }
  int layer_count() const { return static_cast<int>(wx_.size()); }

  /// `steps[t]` is (input x batch); `masks[t]` is (1 x batch) of 0/1.
  Matrix forward(const ParameterStore& store, const std::vector<Matrix>& steps,
                 const std::vector<Eigen::RowVectorXd>& masks, int batch,
                 LstmTape* tape = nullptr) const;
  /// Returns dL/d steps[t]. Parameter gradients go to `grad_sink` (usually
  /// the same store); pass nullptr to produce input gradients only.
  std::vector<Matrix> backward(const ParameterStore& store, ParameterStore* grad_sink,
                               const LstmTape& tape, const Matrix& dh) const;

 private:
  int input_ = 0;
  int hidden_ = 0;
  std::vector<std::size_t> wx_, wh_, b_;
};

}  // namespace i2c::nn
