#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace vad::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Batches are column-major: one sample per column.

enum class Activation { Identity, ReLU, Sigmoid };

Matrix activate(Activation act, const Matrix& z);
// Derivative of the activation expressed through its output y = act(z).
Matrix activation_slope(Activation act, const Matrix& y);

struct DenseGrads {
  Matrix W;
  Vector b;
};

struct DenseLayer {
  Matrix W;  // out x in
  Vector b;  // out
  Activation activation = Activation::Identity;

  Index in() const noexcept { return W.cols(); }
  Index out() const noexcept { return W.rows(); }

  Matrix forward(const Matrix& x) const;

  // Accumulates parameter gradients into grads and returns the gradient with
  // respect to x. y must be forward(x).
  Matrix backward(const Matrix& x, const Matrix& y, const Matrix& dy, DenseGrads& grads) const;
};

struct DenseBackward {
  Matrix grad_W;
  Vector grad_b;
  Matrix grad_x;
};

// Stand-alone gradient of a dense layer at x for the given upstream gradient.
DenseBackward dense_backward(const DenseLayer& layer, const Matrix& x, const Matrix& upstream);

enum class Gate : int { Input = 0, Forget = 1, Output = 2, Cell = 3 };

struct LstmGrads {
  Matrix W;
  Matrix U;
  Vector b;
};

// Forward-pass state retained for backpropagation through time.
struct LstmCache {
  Matrix inputs;                   // in x (T*B), step t occupies columns [t*B, (t+1)*B)
  std::vector<Matrix> h;           // h[0] = 0, h[t+1] = hidden state after step t
  std::vector<Matrix> c;           // same layout as h
  std::vector<Matrix> gates;       // activated (i, f, o, g) stacked, 4H x B per step
  std::vector<Matrix> tanh_c;      // tanh(c_t) per step
  Index batch = 0;

  std::size_t steps() const noexcept { return gates.size(); }
};

// Standard LSTM:
//   i = sigma(W_i x + U_i h + b_i)   f = sigma(W_f x + U_f h + b_f)
//   o = sigma(W_o x + U_o h + b_o)   g = tanh(W_g x + U_g h + b_g)
//   c' = f*c + i*g                   h' = o*tanh(c')
// with h_0 = c_0 = 0. The four gate matrices are stored stacked in the order
// (i, f, o, g).
struct LstmLayer {
  Matrix W;  // 4H x in
  Matrix U;  // 4H x H
  Vector b;  // 4H
  bool return_sequences = true;

  Index hidden() const noexcept { return U.cols(); }
  Index in() const noexcept { return W.cols(); }

  auto W_gate(Gate g) { return W.middleRows(static_cast<Index>(g) * hidden(), hidden()); }
  auto U_gate(Gate g) { return U.middleRows(static_cast<Index>(g) * hidden(), hidden()); }
  auto b_gate(Gate g) { return b.segment(static_cast<Index>(g) * hidden(), hidden()); }

  static LstmLayer zeros(Index in, Index hidden, bool return_sequences);

  // xs: one in x B matrix per step. Returns every h_t when return_sequences,
  // otherwise only h_T.
  std::vector<Matrix> forward(const std::vector<Matrix>& xs, LstmCache* cache = nullptr) const;

  // dh holds the upstream gradient for each returned output (T entries, or
  // one entry for h_T). Accumulates into grads; returns dL/dx_t per step.
  std::vector<Matrix> backward(const LstmCache& cache, const std::vector<Matrix>& dh, LstmGrads& grads) const;
};

}  // namespace vad::nn
