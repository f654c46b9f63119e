#include "vad/embed.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "parallel.hpp"
#include "vad/errors.hpp"
#include "vad/rng.hpp"

namespace vad {

namespace {

using Eigen::MatrixXd;

constexpr int kSearchSteps = 50;
constexpr double kPerplexityTolerance = 1e-5;

MatrixXd squared_distances(const MatrixXd& X) {
  const Eigen::VectorXd norms = X.rowwise().squaredNorm();
  MatrixXd D = (-2.0 * X * X.transpose()).colwise() + norms;
  D.rowwise() += norms.transpose();
  D = D.cwiseMax(0.0);
  D.diagonal().setZero();
  return D;
}

// Fills row i of P with exp(-beta (d - d_min)) normalized; returns 2^H.
double fill_row(const MatrixXd& D, Eigen::Index i, double beta, MatrixXd& P) {
  const Eigen::Index n = D.rows();
  double dmin = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j != i) dmin = std::min(dmin, D(i, j));
  }
  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double v = j == i ? 0.0 : std::exp(-beta * (D(i, j) - dmin));
    P(i, j) = v;
    sum += v;
  }
  double entropy = 0.0;  // nats
  for (Eigen::Index j = 0; j < n; ++j) {
    P(i, j) /= sum;
    if (P(i, j) > 0.0) entropy -= P(i, j) * std::log(P(i, j));
  }
  return std::exp(entropy);
}

void check_finite(const MatrixXd& Y, std::size_t iteration) {
  if (!Y.allFinite()) throw DivergenceError(iteration, "t-SNE produced non-finite coordinates");
}

// Row-parallel kernel shared by the optimizer: W_ij = 1 / (1 + |y_i - y_j|^2)
// with a zero diagonal, plus its total.
double student_kernel(const MatrixXd& Y, MatrixXd& W) {
  const Eigen::Index n = Y.rows();
  W.resize(n, n);
  std::vector<double> row_sums(static_cast<std::size_t>(n), 0.0);
  detail::parallel_chunks(static_cast<std::size_t>(n), 64, [&](std::size_t begin, std::size_t end) {
    for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) {
          W(j, i) = 0.0;
          continue;
        }
        const double dx = Y(i, 0) - Y(j, 0);
        const double dy = Y(i, 1) - Y(j, 1);
        const double w = 1.0 / (1.0 + dx * dx + dy * dy);
        W(j, i) = w;
        s += w;
      }
      row_sums[static_cast<std::size_t>(i)] = s;
    }
  });
  double z = 0.0;
  for (double s : row_sums) z += s;
  return z;
}

// grad_i = 4 sum_j (scale * p_ij - w_ij / z) w_ij (y_i - y_j)
void gradient_into(const MatrixXd& P, double scale, const MatrixXd& Y, const MatrixXd& W, double z, MatrixXd& grad) {
  const Eigen::Index n = Y.rows();
  grad.resize(n, 2);
  detail::parallel_chunks(static_cast<std::size_t>(n), 64, [&](std::size_t begin, std::size_t end) {
    for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
      double gx = 0.0, gy = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double w = W(j, i);
        const double q = std::max(w / z, kAffinityFloor);
        const double m = (scale * P(j, i) - q) * w;
        gx += m * (Y(i, 0) - Y(j, 0));
        gy += m * (Y(i, 1) - Y(j, 1));
      }
      grad(i, 0) = 4.0 * gx;
      grad(i, 1) = 4.0 * gy;
    }
  });
}

double kl_from_kernel(const MatrixXd& P, const MatrixXd& W, double z) {
  const Eigen::Index n = P.rows();
  double kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double p = std::max(P(j, i), kAffinityFloor);
      const double q = std::max(W(j, i) / z, kAffinityFloor);
      kl += p * std::log(p / q);
    }
  }
  return kl;
}

MatrixXd uniform_affinities(Eigen::Index n) {
  MatrixXd P = MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n * (n - 1)));
  P.diagonal().setZero();
  return P;
}

}  // namespace

ConditionalAffinities conditional_affinities(const MatrixXd& points, double perplexity) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw InsufficientDataError("conditional affinities need at least 2 points");
  if (!(perplexity > 0.0)) throw ParameterError("perplexity must be positive");
  const MatrixXd D = squared_distances(points);
  ConditionalAffinities out;
  out.P = MatrixXd::Zero(n, n);
  out.precision.assign(static_cast<std::size_t>(n), 1.0);
  detail::parallel_chunks(static_cast<std::size_t>(n), 32, [&](std::size_t begin, std::size_t end) {
    for (auto i = static_cast<Eigen::Index>(begin); i < static_cast<Eigen::Index>(end); ++i) {
      // Search in log(beta): double/halve until the target is bracketed, then bisect.
      double lo = -std::numeric_limits<double>::infinity();
      double hi = std::numeric_limits<double>::infinity();
      double log_beta = 0.0;
      for (int step = 0; step < kSearchSteps; ++step) {
        const double perp = fill_row(D, i, std::exp(log_beta), out.P);
        if (std::abs(perp - perplexity) <= kPerplexityTolerance) break;
        if (perp > perplexity) {
          lo = log_beta;  // too flat: sharpen
          log_beta = std::isinf(hi) ? log_beta + 2.0 : 0.5 * (log_beta + hi);
        } else {
          hi = log_beta;
          log_beta = std::isinf(lo) ? log_beta - 2.0 : 0.5 * (log_beta + lo);
        }
        if (step + 1 == kSearchSteps) fill_row(D, i, std::exp(log_beta), out.P);
      }
      out.precision[static_cast<std::size_t>(i)] = std::exp(log_beta);
    }
  });
  return out;
}

AffinityMatrix pairwise_affinities(const MatrixXd& points, double perplexity) {
  const Eigen::Index n = points.rows();
  if (n < 4) throw InsufficientDataError("t-SNE needs at least 4 points, got " + std::to_string(n));
  if (!(perplexity < static_cast<double>(n))) {
    throw ParameterError("perplexity " + format_double(perplexity) + " must be smaller than the point count " +
                         std::to_string(n));
  }
  const MatrixXd cond = conditional_affinities(points, perplexity).P;
  AffinityMatrix out;
  out.perplexity = perplexity;
  out.P = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
  out.P = out.P.cwiseMax(kAffinityFloor);
  out.P.diagonal().setZero();
  out.P /= out.P.sum();
  return out;
}

MatrixXd low_dim_affinities(const MatrixXd& Y) {
  MatrixXd W;
  const double z = student_kernel(Y, W);
  MatrixXd Q = (W / z).cwiseMax(kAffinityFloor);
  Q.diagonal().setZero();
  return Q;
}

double kl_divergence(const MatrixXd& P, const MatrixXd& Q) {
  if (P.rows() != Q.rows() || P.cols() != Q.cols()) {
    throw ShapeError("KL divergence of mismatched matrices");
  }
  double kl = 0.0;
  for (Eigen::Index j = 0; j < P.cols(); ++j) {
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      if (i == j) continue;
      const double p = std::max(P(i, j), kAffinityFloor);
      const double q = std::max(Q(i, j), kAffinityFloor);
      kl += p * std::log(p / q);
    }
  }
  return kl;
}

double tsne_objective(const MatrixXd& P, const MatrixXd& Y) { return kl_divergence(P, low_dim_affinities(Y)); }

MatrixXd tsne_gradient(const MatrixXd& P, const MatrixXd& Y) {
  MatrixXd W, grad;
  const double z = student_kernel(Y, W);
  gradient_into(P, 1.0, Y, W, z, grad);
  return grad;
}

Embedding tsne(const MatrixXd& points, const TsneConfig& config) {
  const Eigen::Index n = points.rows();
  if (n < 2) throw InsufficientDataError("t-SNE needs at least 2 points");
  if (config.iterations < 0) throw ParameterError("iterations must be >= 0");
  const MatrixXd P = n < 4 ? uniform_affinities(n) : pairwise_affinities(points, config.perplexity).P;

  Embedding out;
  Rng rng(config.seed);
  out.Y.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.Y(i, 0) = rng.normal(0.0, config.init_sigma);
    out.Y(i, 1) = rng.normal(0.0, config.init_sigma);
  }
  MatrixXd velocity = MatrixXd::Zero(n, 2);
  MatrixXd W, grad;
  out.kl_history.reserve(static_cast<std::size_t>(config.iterations));
  for (int it = 0; it < config.iterations; ++it) {
    const double z = student_kernel(out.Y, W);
    out.kl_history.push_back(kl_from_kernel(P, W, z));
    const double scale = it < config.exaggeration_iterations ? config.exaggeration : 1.0;
    gradient_into(P, scale, out.Y, W, z, grad);
    const double momentum = it < config.momentum_switch ? config.initial_momentum : config.final_momentum;
    velocity = momentum * velocity - config.learning_rate * grad;
    out.Y += velocity;
    out.Y.rowwise() -= out.Y.colwise().mean();
    check_finite(out.Y, static_cast<std::size_t>(it + 1));
  }
  return out;
}

}  // namespace vad
