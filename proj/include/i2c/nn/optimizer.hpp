#pragma once

#include "i2c/nn/parameter_store.hpp"

namespace i2c::nn {

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const OptimizerConfig&) const = default;
};

/// Applies the accumulated gradients, zeroes them and bumps the store
/// version. Throws DivergenceError naming the first parameter with a
/// non-finite gradient; the store is left untouched in that case.
void optimizer_step(ParameterStore& store, double learning_rate,
                    const OptimizerConfig& config = {});

/// Rescales gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before scaling.
double clip_grad_norm(ParameterStore& store, double max_norm);

}  // namespace i2c::nn
