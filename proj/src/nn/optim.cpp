#include "vad/nn/optim.hpp"

#include <cmath>

#include "vad/errors.hpp"

namespace vad::nn {

Gradients zeros_like(const ParamViews& params) {
  Gradients g;
  g.reserve(params.size());
  for (const auto& p : params) g.push_back(Vector::Zero(static_cast<Index>(p.size())));
  return g;
}

double mse(const Matrix& y_pred, const Matrix& y_true) {
  if (y_pred.rows() != y_true.rows() || y_pred.cols() != y_true.cols()) throw ShapeError("mse: shape mismatch");
  if (y_pred.size() == 0) return 0.0;
  return (y_pred - y_true).squaredNorm() / static_cast<double>(y_pred.size());
}

AdamState AdamState::for_params(const ParamViews& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  return s;
}

void adam_step(AdamState& state, const ParamViews& params, const Gradients& grads) {
  if (params.size() != grads.size() || params.size() != state.m.size()) throw ShapeError("adam: parameter count mismatch");
  state.t += 1;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto& g = grads[k];
    if (g.size() != static_cast<Index>(params[k].size())) throw ShapeError("adam: gradient shape mismatch");
    Eigen::Map<Vector> theta(params[k].data(), static_cast<Index>(params[k].size()));
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    theta.array() -= c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
  }
}

}  // namespace vad::nn
