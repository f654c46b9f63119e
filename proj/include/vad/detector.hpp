#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "vad/ingest.hpp"
#include "vad/nn/autoencoders.hpp"
#include "vad/nn/train.hpp"
#include "vad/synth.hpp"

namespace vad {

enum class DetectorKind { Vanilla, Lstm };

std::string_view detector_kind_name(DetectorKind kind) noexcept;
DetectorKind detector_kind_from_name(std::string_view name);

enum class Label : std::uint8_t { Normal = 0, Potential = 1, HighScore = 2 };

inline constexpr std::size_t kNumLabels = 3;

// normal / potential / high
std::string_view label_name(Label label) noexcept;
Label label_from_name(std::string_view name);

// Thresholds recorded for the original vessel's detectors; calibration always
// recomputes tau from the data at hand.
inline constexpr double kReferenceLstmTau = 0.036;
inline constexpr double kReferenceVanillaTau = 0.013;
inline constexpr double kDefaultHighCut = 0.05;
inline constexpr double kDefaultPercentile = 95.0;
inline constexpr int kDefaultToleranceSeconds = 60;

struct Thresholds {
  double tau = 0.0;
  double high_cut = kDefaultHighCut;

  // The three-band scheme needs 0 <= tau <= high_cut.
  bool banded() const noexcept { return tau >= 0.0 && tau <= high_cut; }
};

struct AnomalyVerdict {
  Timestamp timestamp;
  double score = 0.0;
  Label label = Label::Normal;

  bool operator==(const AnomalyVerdict&) const = default;
};

struct TrainingInfo {
  std::uint64_t seed = 0;
  int epochs = 0;
  int batch_size = 0;
  double final_loss = 0.0;
};

struct ModelParams {
  std::variant<nn::VanillaAeSpec, nn::LstmAeSpec> architecture;
  std::variant<nn::DenseAutoencoder, nn::LstmAutoencoder> network;
  Scaler scaler;
  Thresholds thresholds;
  TrainingInfo training;

  DetectorKind kind() const noexcept {
    return std::holds_alternative<nn::LstmAeSpec>(architecture) ? DetectorKind::Lstm : DetectorKind::Vanilla;
  }
  // Rows consumed per score: 1 for the dense detector.
  int window_length() const noexcept;
  int stride() const noexcept;
};

// Windows never span a gap: a segment is a maximal run of frames spaced
// exactly one cadence apart.
struct WindowSet {
  std::vector<std::size_t> starts;    // first row of each window
  std::vector<std::size_t> end_rows;  // last row of each window
  int length = 0;
};

std::vector<std::pair<std::size_t, std::size_t>> contiguous_segments(std::span<const Timestamp> timestamps,
                                                                     int cadence_seconds);

// Per segment: floor((rows - length) / stride) + 1 windows, each attributed
// to its last row.
WindowSet make_windows(std::span<const Timestamp> timestamps, int cadence_seconds, int length, int stride);

std::vector<Timestamp> timestamps_of(const FrameSeries& series);

// Per-row MSE over the feature width.
std::vector<double> row_scores(const nn::DenseAutoencoder& model, const Eigen::MatrixXd& rows);
// Per-window MSE over length x width elements.
std::vector<double> window_scores(const nn::LstmAutoencoder& model, const Eigen::MatrixXd& rows,
                                  const WindowSet& windows);

struct ScoredSeries {
  std::vector<std::size_t> rows;  // source row of each score (window end for LSTM)
  std::vector<double> scores;
};

// Normalizes with the model's scaler (nulls -> 0), windows if needed, scores.
ScoredSeries reconstruction_errors(const ModelParams& model, const FrameSeries& series);

// Nearest-rank percentile: the ceil(p/100 * n)-th smallest score (1-based).
double calibrate_threshold(std::span<const double> train_scores, double percentile = kDefaultPercentile);

// score <= tau -> Normal; otherwise score > high_cut -> HighScore; otherwise Potential.
Label classify(double score, const Thresholds& thresholds) noexcept;

std::vector<AnomalyVerdict> verdicts(const ModelParams& model, const FrameSeries& series);

struct Evaluation {
  std::size_t detections = 0;
  std::size_t true_positives = 0;   // detections with a truth-true frame within tolerance
  std::size_t false_positives = 0;
  std::size_t truth_positives = 0;  // truth-true frames
  std::size_t matched_truth = 0;    // truth-true frames with a detection within tolerance
  std::size_t false_negatives = 0;
  std::size_t true_negatives = 0;   // Normal verdicts with no truth-true frame within tolerance
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = false;  // false when there are no detections (precision reported as 0)
};

Evaluation evaluate(std::span<const AnomalyVerdict> verdicts, std::span<const TruthEntry> truth,
                    int tolerance_seconds = kDefaultToleranceSeconds);

struct DetectorTrainOptions {
  DetectorKind kind = DetectorKind::Lstm;
  nn::VanillaAeSpec vanilla;
  nn::LstmAeSpec lstm;
  nn::TrainConfig train;  // train.seed is the master seed
  double percentile = kDefaultPercentile;
  double high_cut = kDefaultHighCut;
  double validation_fraction = 0.1;
};

struct DetectorTrainOutcome {
  ModelParams model;
  nn::TrainResult history;
  std::vector<double> train_scores;
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::vector<std::string> warnings;
};

// Chronological split -> scaler fit on the training part -> train -> tau from
// the training scores. The series is expected to be preprocessed already.
DetectorTrainOutcome train_detector(const FrameSeries& series, const DetectorTrainOptions& options);

}  // namespace vad
