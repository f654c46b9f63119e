#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vad/nn/layers.hpp"

namespace vad::nn {

// Flat views over every trainable tensor of a model, in a fixed order, and the
// matching gradient buffers.
using ParamViews = std::vector<std::span<double>>;
using Gradients = std::vector<Vector>;

Gradients zeros_like(const ParamViews& params);

// Mean over all elements of the squared difference.
double mse(const Matrix& y_pred, const Matrix& y_true);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  Gradients m;
  Gradients v;
  std::int64_t t = 0;

  static AdamState for_params(const ParamViews& params, AdamConfig config = {});
};

// t <- t+1; m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), with bias-corrected
// m_hat = m / (1 - b1^t), v_hat = v / (1 - b2^t).
void adam_step(AdamState& state, const ParamViews& params, const Gradients& grads);

}  // namespace vad::nn
