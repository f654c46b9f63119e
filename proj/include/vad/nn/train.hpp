#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "vad/errors.hpp"
#include "vad/nn/autoencoders.hpp"
#include "vad/nn/optim.hpp"
#include "vad/rng.hpp"

namespace vad::nn {

struct TrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct TrainResult {
  std::vector<double> loss_history;        // sample-weighted mean batch loss per epoch
  std::vector<double> validation_history;  // empty when no validation set is given
};

// Samples are the rows of a (n x width) matrix.
class RowDataset {
 public:
  explicit RowDataset(const Matrix& rows) : rows_(&rows) {}
  std::size_t size() const noexcept { return static_cast<std::size_t>(rows_->rows()); }
  Matrix gather(std::span<const std::size_t> indices) const;

 private:
  const Matrix* rows_;
};

// Samples are length-L windows of consecutive rows starting at the given rows.
class WindowDataset {
 public:
  WindowDataset(const Matrix& rows, std::vector<std::size_t> starts, int length)
      : rows_(&rows), starts_(std::move(starts)), length_(length) {}
  std::size_t size() const noexcept { return starts_.size(); }
  int length() const noexcept { return length_; }
  const std::vector<std::size_t>& starts() const noexcept { return starts_; }
  std::vector<Matrix> gather(std::span<const std::size_t> indices) const;

 private:
  const Matrix* rows_;
  std::vector<std::size_t> starts_;
  int length_;
};

template <class Model, class Dataset>
double mean_loss(const Model& model, const Dataset& data, std::size_t batch_size = 256) {
  if (data.size() == 0) return 0.0;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double total = 0.0;
  for (std::size_t s = 0; s < idx.size(); s += batch_size) {
    const std::size_t n = std::min(batch_size, idx.size() - s);
    total += model.loss(data.gather(std::span(idx).subspan(s, n))) * static_cast<double>(n);
  }
  return total / static_cast<double>(data.size());
}

// Minibatch Adam on the reconstruction MSE. The sample order is reshuffled
// every epoch (Fisher-Yates from Rng(seed)); the final partial batch is kept.
template <class Model, class Dataset>
TrainResult train(Model& model, const Dataset& data, const TrainConfig& config, const Dataset* validation = nullptr) {
  if (config.epochs < 0 || config.batch_size < 1) throw ParameterError("epochs must be >= 0 and batch_size >= 1");
  if (data.size() == 0) throw EmptyInputError("training set is empty");

  TrainResult result;
  const ParamViews params = model.parameters();
  AdamState adam = AdamState::for_params(params, AdamConfig{.learning_rate = config.learning_rate});
  Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Gradients grads;
  const auto bs = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t s = 0; s < order.size(); s += bs) {
      const std::size_t n = std::min(bs, order.size() - s);
      const double loss = model.loss_and_gradient(data.gather(std::span(order).subspan(s, n)), grads);
      if (!std::isfinite(loss)) {
        throw DivergenceError(static_cast<std::size_t>(epoch + 1), "training loss became non-finite in epoch " +
                                                                       std::to_string(epoch + 1));
      }
      adam_step(adam, params, grads);
      total += loss * static_cast<double>(n);
    }
    result.loss_history.push_back(total / static_cast<double>(order.size()));
    if (validation && validation->size() > 0) result.validation_history.push_back(mean_loss(model, *validation));
  }
  return result;
}

}  // namespace vad::nn
