#pragma once

#include <cstdint>
#include <vector>

#include "vad/nn/layers.hpp"
#include "vad/nn/optim.hpp"

namespace vad::nn {

// Dense encoder/decoder with ReLU hidden layers and a sigmoid output layer of
// the input width.
struct VanillaAeSpec {
  int input_width = 8;
  std::vector<int> encoder{32, 16, 8};
  std::vector<int> decoder{16, 32};

  bool operator==(const VanillaAeSpec&) const = default;
};

// LSTM encoder (last layer keeps only h_T), the code repeated over the
// sequence, LSTM decoder returning sequences, and a dense identity layer
// applied at every step.
struct LstmAeSpec {
  int input_width = 8;
  std::vector<int> encoder{64, 32};
  std::vector<int> decoder{32, 64};
  int sequence_length = 13;
  int stride = 1;

  bool operator==(const LstmAeSpec&) const = default;
};

// Glorot-uniform weights (limit sqrt(6 / (fan_in + fan_out))) drawn row-major
// from Rng(seed), layer by layer; biases zero except the LSTM forget gate (1).
class DenseAutoencoder {
 public:
  using Batch = Matrix;  // width x batch

  DenseAutoencoder() = default;
  DenseAutoencoder(const VanillaAeSpec& spec, std::uint64_t seed);
  explicit DenseAutoencoder(std::vector<DenseLayer> layers);

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  Index width() const noexcept { return layers_.empty() ? 0 : layers_.front().in(); }

  Matrix reconstruct(const Matrix& x) const;
  double loss(const Matrix& x) const;
  // Resets grads to the parameter shapes and fills them; returns the loss.
  double loss_and_gradient(const Matrix& x, Gradients& grads) const;
  ParamViews parameters();

 private:
  std::vector<DenseLayer> layers_;
};

class LstmAutoencoder {
 public:
  using Batch = std::vector<Matrix>;  // one width x batch matrix per step

  LstmAutoencoder() = default;
  LstmAutoencoder(const LstmAeSpec& spec, std::uint64_t seed);
  LstmAutoencoder(std::vector<LstmLayer> encoder, std::vector<LstmLayer> decoder, DenseLayer output);

  const std::vector<LstmLayer>& encoder() const noexcept { return encoder_; }
  const std::vector<LstmLayer>& decoder() const noexcept { return decoder_; }
  const DenseLayer& output() const noexcept { return output_; }
  std::vector<LstmLayer>& encoder() noexcept { return encoder_; }
  std::vector<LstmLayer>& decoder() noexcept { return decoder_; }
  DenseLayer& output() noexcept { return output_; }
  Index width() const noexcept { return encoder_.empty() ? 0 : encoder_.front().in(); }

  Batch reconstruct(const Batch& x) const;
  double loss(const Batch& x) const;
  double loss_and_gradient(const Batch& x, Gradients& grads) const;
  ParamViews parameters();

 private:
  std::vector<LstmLayer> encoder_;
  std::vector<LstmLayer> decoder_;
  DenseLayer output_;
};

// Step-major batch flattened to width x (T*B).
Matrix concat_steps(const std::vector<Matrix>& steps);

}  // namespace vad::nn
