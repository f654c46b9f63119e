#include "vad/nn/autoencoders.hpp"

#include <cmath>

#include "vad/errors.hpp"
#include "vad/rng.hpp"

namespace vad::nn {

namespace {

void glorot_fill(Matrix& m, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-limit, limit);
  }
}

DenseLayer make_dense(Index in, Index out, Activation act, Rng& rng) {
  DenseLayer l;
  l.W.resize(out, in);
  glorot_fill(l.W, static_cast<double>(in), static_cast<double>(out), rng);
  l.b = Vector::Zero(out);
  l.activation = act;
  return l;
}

LstmLayer make_lstm(Index in, Index hidden, bool return_sequences, Rng& rng) {
  LstmLayer l = LstmLayer::zeros(in, hidden, return_sequences);
  glorot_fill(l.W, static_cast<double>(in), static_cast<double>(4 * hidden), rng);
  glorot_fill(l.U, static_cast<double>(hidden), static_cast<double>(4 * hidden), rng);
  l.b_gate(Gate::Forget).setOnes();
  return l;
}

std::span<double> view(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> view(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

Matrix concat_steps(const std::vector<Matrix>& steps) {
  if (steps.empty()) return {};
  const Index B = steps.front().cols();
  Matrix out(steps.front().rows(), B * static_cast<Index>(steps.size()));
  for (std::size_t t = 0; t < steps.size(); ++t) out.middleCols(static_cast<Index>(t) * B, B) = steps[t];
  return out;
}

// ---------------------------------------------------------------------------
// Dense autoencoder

DenseAutoencoder::DenseAutoencoder(const VanillaAeSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  Index prev = spec.input_width;
  for (int w : spec.encoder) {
    layers_.push_back(make_dense(prev, w, Activation::ReLU, rng));
    prev = w;
  }
  for (int w : spec.decoder) {
    layers_.push_back(make_dense(prev, w, Activation::ReLU, rng));
    prev = w;
  }
  layers_.push_back(make_dense(prev, spec.input_width, Activation::Sigmoid, rng));
}

DenseAutoencoder::DenseAutoencoder(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].in() != layers_[i - 1].out()) throw ShapeError("dense autoencoder: layer widths do not chain");
  }
  if (!layers_.empty() && layers_.back().out() != layers_.front().in()) {
    throw ShapeError("dense autoencoder: output width must equal input width");
  }
}

Matrix DenseAutoencoder::reconstruct(const Matrix& x) const {
  Matrix a = x;
  for (const auto& l : layers_) a = l.forward(a);
  return a;
}

double DenseAutoencoder::loss(const Matrix& x) const { return mse(reconstruct(x), x); }

double DenseAutoencoder::loss_and_gradient(const Matrix& x, Gradients& grads) const {
  std::vector<Matrix> acts;
  acts.reserve(layers_.size() + 1);
  acts.push_back(x);
  for (const auto& l : layers_) acts.push_back(l.forward(acts.back()));
  const Matrix& y = acts.back();
  const double loss = mse(y, x);

  grads.resize(2 * layers_.size());
  Matrix d = (2.0 / static_cast<double>(y.size())) * (y - x);
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    DenseGrads g{Matrix::Zero(l.out(), l.in()), Vector::Zero(l.out())};
    d = l.backward(acts[k], acts[k + 1], d, g);
    grads[2 * k] = Eigen::Map<const Vector>(g.W.data(), g.W.size());
    grads[2 * k + 1] = std::move(g.b);
  }
  return loss;
}

ParamViews DenseAutoencoder::parameters() {
  ParamViews p;
  for (auto& l : layers_) {
    p.push_back(view(l.W));
    p.push_back(view(l.b));
  }
  return p;
}

// ---------------------------------------------------------------------------
// LSTM autoencoder

LstmAutoencoder::LstmAutoencoder(const LstmAeSpec& spec, std::uint64_t seed) {
  if (spec.encoder.empty() || spec.decoder.empty()) throw ParameterError("lstm autoencoder needs encoder and decoder layers");
  Rng rng(seed);
  Index prev = spec.input_width;
  for (std::size_t i = 0; i < spec.encoder.size(); ++i) {
    const bool last = i + 1 == spec.encoder.size();
    encoder_.push_back(make_lstm(prev, spec.encoder[i], !last, rng));
    prev = spec.encoder[i];
  }
  for (int w : spec.decoder) {
    decoder_.push_back(make_lstm(prev, w, true, rng));
    prev = w;
  }
  output_ = make_dense(prev, spec.input_width, Activation::Identity, rng);
}

LstmAutoencoder::LstmAutoencoder(std::vector<LstmLayer> encoder, std::vector<LstmLayer> decoder, DenseLayer output)
    : encoder_(std::move(encoder)), decoder_(std::move(decoder)), output_(std::move(output)) {
  if (encoder_.empty() || decoder_.empty()) throw ShapeError("lstm autoencoder needs encoder and decoder layers");
  Index prev = encoder_.front().in();
  for (std::size_t i = 0; i < encoder_.size(); ++i) {
    if (encoder_[i].in() != prev) throw ShapeError("lstm autoencoder: encoder widths do not chain");
    if (encoder_[i].return_sequences == (i + 1 == encoder_.size())) {
      throw ShapeError("lstm autoencoder: only the last encoder layer may drop the sequence");
    }
    prev = encoder_[i].hidden();
  }
  for (const auto& l : decoder_) {
    if (l.in() != prev || !l.return_sequences) throw ShapeError("lstm autoencoder: decoder widths do not chain");
    prev = l.hidden();
  }
  if (output_.in() != prev || output_.out() != encoder_.front().in()) {
    throw ShapeError("lstm autoencoder: output layer shape mismatch");
  }
}

LstmAutoencoder::Batch LstmAutoencoder::reconstruct(const Batch& x) const {
  if (x.empty()) throw ShapeError("lstm autoencoder: empty sequence");
  std::vector<Matrix> a = x;
  for (const auto& l : encoder_) a = l.forward(a);
  std::vector<Matrix> seq(x.size(), a.front());
  for (const auto& l : decoder_) seq = l.forward(seq);
  const Index B = x.front().cols();
  const Matrix y = output_.forward(concat_steps(seq));
  Batch out(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) out[t] = y.middleCols(static_cast<Index>(t) * B, B);
  return out;
}

double LstmAutoencoder::loss(const Batch& x) const { return mse(concat_steps(reconstruct(x)), concat_steps(x)); }

double LstmAutoencoder::loss_and_gradient(const Batch& x, Gradients& grads) const {
  if (x.empty()) throw ShapeError("lstm autoencoder: empty sequence");
  const std::size_t T = x.size();
  const Index B = x.front().cols();

  std::vector<LstmCache> enc_cache(encoder_.size());
  std::vector<LstmCache> dec_cache(decoder_.size());
  std::vector<Matrix> a = x;
  for (std::size_t k = 0; k < encoder_.size(); ++k) a = encoder_[k].forward(a, &enc_cache[k]);
  std::vector<Matrix> seq(T, a.front());
  for (std::size_t k = 0; k < decoder_.size(); ++k) seq = decoder_[k].forward(seq, &dec_cache[k]);
  const Matrix hidden = concat_steps(seq);
  const Matrix y = output_.forward(hidden);
  const Matrix target = concat_steps(x);
  const double loss = mse(y, target);

  // Gradient slots: encoder layers (W, U, b), decoder layers (W, U, b), output (W, b).
  const std::size_t n_slots = 3 * (encoder_.size() + decoder_.size()) + 2;
  grads.resize(n_slots);

  DenseGrads og{Matrix::Zero(output_.out(), output_.in()), Vector::Zero(output_.out())};
  const Matrix dy = (2.0 / static_cast<double>(y.size())) * (y - target);
  const Matrix dhidden = output_.backward(hidden, y, dy, og);
  grads[n_slots - 2] = Eigen::Map<const Vector>(og.W.data(), og.W.size());
  grads[n_slots - 1] = std::move(og.b);

  std::vector<Matrix> d(T);
  for (std::size_t t = 0; t < T; ++t) d[t] = dhidden.middleCols(static_cast<Index>(t) * B, B);

  auto store = [&](std::size_t slot, LstmGrads& g) {
    grads[slot] = Eigen::Map<const Vector>(g.W.data(), g.W.size());
    grads[slot + 1] = Eigen::Map<const Vector>(g.U.data(), g.U.size());
    grads[slot + 2] = std::move(g.b);
  };

  for (std::size_t k = decoder_.size(); k-- > 0;) {
    const auto& l = decoder_[k];
    LstmGrads g{Matrix::Zero(l.W.rows(), l.W.cols()), Matrix::Zero(l.U.rows(), l.U.cols()), Vector::Zero(l.b.size())};
    d = l.backward(dec_cache[k], d, g);
    store(3 * (encoder_.size() + k), g);
  }
  // The repeated code feeds every decoder step.
  Matrix dcode = d.front();
  for (std::size_t t = 1; t < T; ++t) dcode += d[t];
  d.assign(1, std::move(dcode));
  for (std::size_t k = encoder_.size(); k-- > 0;) {
    const auto& l = encoder_[k];
    LstmGrads g{Matrix::Zero(l.W.rows(), l.W.cols()), Matrix::Zero(l.U.rows(), l.U.cols()), Vector::Zero(l.b.size())};
    d = l.backward(enc_cache[k], d, g);
    store(3 * k, g);
  }
  return loss;
}

ParamViews LstmAutoencoder::parameters() {
  ParamViews p;
  for (auto* group : {&encoder_, &decoder_}) {
    for (auto& l : *group) {
      p.push_back(view(l.W));
      p.push_back(view(l.U));
      p.push_back(view(l.b));
    }
  }
  p.push_back(view(output_.W));
  p.push_back(view(output_.b));
  return p;
}

}  // namespace vad::nn
