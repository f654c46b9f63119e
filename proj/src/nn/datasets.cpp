#include "vad/nn/train.hpp"

namespace vad::nn {

Matrix RowDataset::gather(std::span<const std::size_t> indices) const {
  Matrix out(rows_->cols(), static_cast<Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    out.col(static_cast<Index>(j)) = rows_->row(static_cast<Index>(indices[j])).transpose();
  }
  return out;
}

std::vector<Matrix> WindowDataset::gather(std::span<const std::size_t> indices) const {
  std::vector<Matrix> steps(static_cast<std::size_t>(length_), Matrix(rows_->cols(), static_cast<Index>(indices.size())));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const std::size_t start = starts_[indices[j]];
    for (int t = 0; t < length_; ++t) {
      steps[static_cast<std::size_t>(t)].col(static_cast<Index>(j)) =
          rows_->row(static_cast<Index>(start) + t).transpose();
    }
  }
  return steps;
}

}  // namespace vad::nn
