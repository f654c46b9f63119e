#include "vad/nn/layers.hpp"

#include <string>

#include "vad/errors.hpp"

namespace vad::nn {

namespace {

Matrix sigmoid(const Matrix& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

void check_cols(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(std::string(what) + ": shape mismatch");
}

}  // namespace

Matrix activate(Activation act, const Matrix& z) {
  switch (act) {
    case Activation::ReLU:
      return z.cwiseMax(0.0);
    case Activation::Sigmoid:
      return sigmoid(z);
    case Activation::Identity:
      break;
  }
  return z;
}

Matrix activation_slope(Activation act, const Matrix& y) {
  switch (act) {
    case Activation::ReLU:
      return (y.array() > 0.0).cast<double>().matrix();
    case Activation::Sigmoid:
      return (y.array() * (1.0 - y.array())).matrix();
    case Activation::Identity:
      break;
  }
  return Matrix::Ones(y.rows(), y.cols());
}

Matrix DenseLayer::forward(const Matrix& x) const {
  if (x.rows() != in()) {
    throw ShapeError("dense layer expects width " + std::to_string(in()) + ", got " + std::to_string(x.rows()));
  }
  Matrix z = W * x;
  z.colwise() += b;
  return activate(activation, z);
}

Matrix DenseLayer::backward(const Matrix& x, const Matrix& y, const Matrix& dy, DenseGrads& grads) const {
  if (x.rows() != in() || y.rows() != out()) throw ShapeError("dense backward: shape mismatch");
  check_cols(y, dy, "dense backward upstream");
  const Matrix dz = activation == Activation::Identity ? dy : Matrix(dy.cwiseProduct(activation_slope(activation, y)));
  grads.W.noalias() += dz * x.transpose();
  grads.b += dz.rowwise().sum();
  return W.transpose() * dz;
}

DenseBackward dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& upstream) {
  const Matrix y = layer.forward(x);
  DenseGrads g{Matrix::Zero(layer.out(), layer.in()), Vector::Zero(layer.out())};
  Matrix dx = layer.backward(x, y, upstream, g);
  return {std::move(g.W), std::move(g.b), std::move(dx)};
}

LstmLayer LstmLayer::zeros(Index in, Index hidden, bool return_sequences) {
  LstmLayer l;
  l.W = Matrix::Zero(4 * hidden, in);
  l.U = Matrix::Zero(4 * hidden, hidden);
  l.b = Vector::Zero(4 * hidden);
  l.return_sequences = return_sequences;
  return l;
}

std::vector<Matrix> LstmLayer::forward(const std::vector<Matrix>& xs, LstmCache* cache) const {
  if (xs.empty()) throw ShapeError("lstm forward: sequence length must be >= 1");
  const Index H = hidden();
  const Index B = xs.front().cols();
  const auto T = static_cast<Index>(xs.size());

  Matrix inputs(in(), T * B);
  for (Index t = 0; t < T; ++t) {
    const Matrix& x = xs[static_cast<std::size_t>(t)];
    if (x.rows() != in() || x.cols() != B) throw ShapeError("lstm forward: input shape mismatch at step " + std::to_string(t));
    inputs.middleCols(t * B, B) = x;
  }
  // Input projections for every step in one product.
  Matrix projected = W * inputs;
  projected.colwise() += b;

  Matrix h = Matrix::Zero(H, B);
  Matrix c = Matrix::Zero(H, B);
  std::vector<Matrix> outputs;
  outputs.reserve(return_sequences ? xs.size() : 1);
  if (cache) {
    cache->h.assign(1, h);
    cache->c.assign(1, c);
    cache->gates.clear();
    cache->tanh_c.clear();
    cache->batch = B;
  }

  Matrix z(4 * H, B);
  for (Index t = 0; t < T; ++t) {
    z = projected.middleCols(t * B, B);
    z.noalias() += U * h;
    z.topRows(3 * H) = sigmoid(z.topRows(3 * H));
    z.bottomRows(H) = z.bottomRows(H).array().tanh().matrix();
    const auto i = z.middleRows(0, H).array();
    const auto f = z.middleRows(H, H).array();
    const auto o = z.middleRows(2 * H, H).array();
    const auto g = z.middleRows(3 * H, H).array();
    c = (f * c.array() + i * g).matrix();
    Matrix tc = c.array().tanh().matrix();
    h = (o * tc.array()).matrix();
    if (return_sequences || t == T - 1) outputs.push_back(h);
    if (cache) {
      cache->gates.push_back(z);
      cache->tanh_c.push_back(std::move(tc));
      cache->h.push_back(h);
      cache->c.push_back(c);
    }
  }
  if (cache) cache->inputs = std::move(inputs);
  return outputs;
}

std::vector<Matrix> LstmLayer::backward(const LstmCache& cache, const std::vector<Matrix>& dh, LstmGrads& grads) const {
  if (cache.steps() == 0) throw UsageError("lstm backward called without a forward cache");
  const Index H = hidden();
  const Index B = cache.batch;
  const auto T = static_cast<Index>(cache.steps());
  const std::size_t expected = return_sequences ? cache.steps() : 1;
  if (dh.size() != expected) throw ShapeError("lstm backward: upstream gradient count mismatch");

  Matrix dz_all(4 * H, T * B);
  Matrix dh_next = Matrix::Zero(H, B);
  Matrix dc_next = Matrix::Zero(H, B);
  for (Index t = T - 1; t >= 0; --t) {
    const auto ts = static_cast<std::size_t>(t);
    Matrix dh_t = dh_next;
    if (return_sequences) {
      dh_t += dh[ts];
    } else if (t == T - 1) {
      dh_t += dh[0];
    }
    const Matrix& z = cache.gates[ts];
    const auto i = z.middleRows(0, H).array();
    const auto f = z.middleRows(H, H).array();
    const auto o = z.middleRows(2 * H, H).array();
    const auto g = z.middleRows(3 * H, H).array();
    const auto tc = cache.tanh_c[ts].array();
    const auto c_prev = cache.c[ts].array();

    const Eigen::ArrayXXd dc = dh_t.array() * o * (1.0 - tc.square()) + dc_next.array();
    auto dz = dz_all.middleCols(t * B, B);
    dz.middleRows(0, H) = (dc * g * i * (1.0 - i)).matrix();
    dz.middleRows(H, H) = (dc * c_prev * f * (1.0 - f)).matrix();
    dz.middleRows(2 * H, H) = (dh_t.array() * tc * o * (1.0 - o)).matrix();
    dz.middleRows(3 * H, H) = (dc * i * (1.0 - g.square())).matrix();
    dc_next = (dc * f).matrix();
    dh_next.noalias() = U.transpose() * dz;
    grads.U.noalias() += dz * cache.h[ts].transpose();
  }
  grads.W.noalias() += dz_all * cache.inputs.transpose();
  grads.b += dz_all.rowwise().sum();
  const Matrix dx_all = W.transpose() * dz_all;

  std::vector<Matrix> dxs(static_cast<std::size_t>(T));
  for (Index t = 0; t < T; ++t) dxs[static_cast<std::size_t>(t)] = dx_all.middleCols(t * B, B);
  return dxs;
}

}  // namespace vad::nn
