#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vad/detector.hpp"

namespace vad {

inline constexpr double kAffinityFloor = 1e-12;

// Symmetric joint probabilities over the rows of the input: non-negative,
// unit sum, zero diagonal.
struct AffinityMatrix {
  Eigen::MatrixXd P;
  double perplexity = 0.0;
};

// Row-conditional Gaussian affinities p_{j|i} and the precision (1 / 2 sigma^2)
// found for each row.
struct ConditionalAffinities {
  Eigen::MatrixXd P;
  std::vector<double> precision;
};

// Binary search per row (<= 50 steps) for 2^H = perplexity within 1e-5.
ConditionalAffinities conditional_affinities(const Eigen::MatrixXd& points, double perplexity);

// Needs >= 4 rows and perplexity < rows.
AffinityMatrix pairwise_affinities(const Eigen::MatrixXd& points, double perplexity);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iterations = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch = 250;
  double init_sigma = 1e-4;
  std::uint64_t seed = 0;
};

struct Embedding {
  Eigen::MatrixXd Y;                  // n x 2
  std::vector<Label> labels;          // filled by the caller when known
  std::vector<Timestamp> timestamps;  // likewise
  std::vector<double> kl_history;     // KL(P || Q) at the start of each iteration
};

// Student-t joint affinities of an embedding, floored at 1e-12 off the diagonal.
Eigen::MatrixXd low_dim_affinities(const Eigen::MatrixXd& Y);

// sum_{i != j} p_ij log(p_ij / q_ij), entries floored at 1e-12.
double kl_divergence(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q);

// Objective KL(P || Q(Y)) and its analytic gradient with respect to Y.
double tsne_objective(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y);
Eigen::MatrixXd tsne_gradient(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Y);

// Exact O(n^2) t-SNE with momentum gradient descent. Two or three points get
// uniform affinities (there is no meaningful bandwidth to calibrate).
Embedding tsne(const Eigen::MatrixXd& points, const TsneConfig& config = {});

// x,y,label,timestamp
std::string format_embedding_csv(const Embedding& embedding);
std::string render_map_svg(const Embedding& embedding);

// Writes embedding.csv and embedding.svg into `directory`.
void export_map(const Embedding& embedding, const std::filesystem::path& directory);

// Reconstruction score over time with the two thresholds and flagged points,
// optionally shading truth-anomalous frames.
std::string render_timeline_svg(std::span<const AnomalyVerdict> verdicts, const Thresholds& thresholds,
                                std::span<const TruthEntry> truth = {}, int cadence_seconds = kDefaultCadenceSeconds);

// Fill colours shared by both plots.
std::string_view label_colour(Label label) noexcept;

}  // namespace vad
