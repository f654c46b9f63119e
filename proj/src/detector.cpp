#include "vad/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vad/errors.hpp"
#include "vad/rng.hpp"

namespace vad {

std::string_view detector_kind_name(DetectorKind kind) noexcept {
  return kind == DetectorKind::Lstm ? "lstm" : "vanilla";
}

DetectorKind detector_kind_from_name(std::string_view name) {
  if (name == "lstm") return DetectorKind::Lstm;
  if (name == "vanilla") return DetectorKind::Vanilla;
  throw ParameterError("detector must be 'vanilla' or 'lstm', got '" + std::string(name) + "'");
}

std::string_view label_name(Label label) noexcept {
  switch (label) {
    case Label::Normal:
      return "normal";
    case Label::Potential:
      return "potential";
    case Label::HighScore:
      return "high";
  }
  return "normal";
}

Label label_from_name(std::string_view name) {
  if (name == "normal") return Label::Normal;
  if (name == "potential") return Label::Potential;
  if (name == "high") return Label::HighScore;
  throw DataError("unknown verdict label '" + std::string(name) + "'");
}

int ModelParams::window_length() const noexcept {
  if (const auto* spec = std::get_if<nn::LstmAeSpec>(&architecture)) return spec->sequence_length;
  return 1;
}

int ModelParams::stride() const noexcept {
  if (const auto* spec = std::get_if<nn::LstmAeSpec>(&architecture)) return spec->stride;
  return 1;
}

std::vector<Timestamp> timestamps_of(const FrameSeries& series) {
  std::vector<Timestamp> ts;
  ts.reserve(series.size());
  for (const auto& f : series.frames) ts.push_back(f.timestamp);
  return ts;
}

std::vector<std::pair<std::size_t, std::size_t>> contiguous_segments(std::span<const Timestamp> timestamps,
                                                                     int cadence_seconds) {
  std::vector<std::pair<std::size_t, std::size_t>> segments;  // [begin, end)
  if (timestamps.empty()) return segments;
  const std::chrono::microseconds step = std::chrono::seconds{cadence_seconds};
  std::size_t begin = 0;
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] - timestamps[i - 1] != step) {
      segments.emplace_back(begin, i);
      begin = i;
    }
  }
  segments.emplace_back(begin, timestamps.size());
  return segments;
}

WindowSet make_windows(std::span<const Timestamp> timestamps, int cadence_seconds, int length, int stride) {
  if (length < 1 || stride < 1) throw ParameterError("window length and stride must be >= 1");
  WindowSet w;
  w.length = length;
  const auto L = static_cast<std::size_t>(length);
  const auto S = static_cast<std::size_t>(stride);
  for (const auto& [begin, end] : contiguous_segments(timestamps, cadence_seconds)) {
    const std::size_t rows = end - begin;
    if (rows < L) continue;
    for (std::size_t s = begin; s + L <= end; s += S) {
      w.starts.push_back(s);
      w.end_rows.push_back(s + L - 1);
    }
  }
  if (w.starts.empty()) {
    throw InsufficientDataError("no contiguous segment has at least " + std::to_string(length) + " rows");
  }
  return w;
}

namespace {

constexpr std::size_t kScoreBatch = 256;

void check_width(Eigen::Index model_width, const Eigen::MatrixXd& rows) {
  if (model_width != static_cast<Eigen::Index>(kNumSignals) || rows.cols() != model_width) {
    throw ShapeError("model width " + std::to_string(model_width) + " does not match feature count " +
                     std::to_string(rows.cols()));
  }
}

}  // namespace

std::vector<double> row_scores(const nn::DenseAutoencoder& model, const Eigen::MatrixXd& rows) {
  check_width(model.width(), rows);
  std::vector<double> scores(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index s = 0; s < rows.rows(); s += kScoreBatch) {
    const Eigen::Index n = std::min<Eigen::Index>(kScoreBatch, rows.rows() - s);
    const nn::Matrix x = rows.middleRows(s, n).transpose();
    const nn::Matrix y = model.reconstruct(x);
    const Eigen::RowVectorXd per = (y - x).colwise().squaredNorm() / static_cast<double>(x.rows());
    for (Eigen::Index j = 0; j < n; ++j) scores[static_cast<std::size_t>(s + j)] = per(j);
  }
  return scores;
}

std::vector<double> window_scores(const nn::LstmAutoencoder& model, const Eigen::MatrixXd& rows,
                                  const WindowSet& windows) {
  check_width(model.width(), rows);
  nn::WindowDataset data(rows, windows.starts, windows.length);
  std::vector<double> scores(windows.starts.size());
  std::vector<std::size_t> idx(windows.starts.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t s = 0; s < idx.size(); s += kScoreBatch) {
    const std::size_t n = std::min(kScoreBatch, idx.size() - s);
    const auto x = data.gather(std::span(idx).subspan(s, n));
    const auto y = model.reconstruct(x);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t t = 0; t < x.size(); ++t) acc += (y[t] - x[t]).colwise().squaredNorm();
    acc /= static_cast<double>(x.size() * static_cast<std::size_t>(x.front().rows()));
    for (std::size_t j = 0; j < n; ++j) scores[s + j] = acc(static_cast<Eigen::Index>(j));
  }
  return scores;
}

ScoredSeries reconstruction_errors(const ModelParams& model, const FrameSeries& series) {
  ScoredSeries out;
  if (series.empty()) return out;
  const Eigen::MatrixXd rows = apply_scaler(model.scaler, series, 0.0);
  if (const auto* dense = std::get_if<nn::DenseAutoencoder>(&model.network)) {
    out.scores = row_scores(*dense, rows);
    out.rows.resize(out.scores.size());
    std::iota(out.rows.begin(), out.rows.end(), std::size_t{0});
  } else {
    const auto& lstm = std::get<nn::LstmAutoencoder>(model.network);
    const auto ts = timestamps_of(series);
    const WindowSet w = make_windows(ts, series.cadence_seconds, model.window_length(), model.stride());
    out.scores = window_scores(lstm, rows, w);
    out.rows = w.end_rows;
  }
  return out;
}

double calibrate_threshold(std::span<const double> train_scores, double percentile) {
  if (!(percentile > 0.0 && percentile <= 100.0)) throw ParameterError("percentile must lie in (0, 100]");
  if (train_scores.empty()) throw EmptyInputError("cannot calibrate on an empty score set");
  std::vector<double> sorted(train_scores.begin(), train_scores.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

Label classify(double score, const Thresholds& thresholds) noexcept {
  if (score <= thresholds.tau) return Label::Normal;
  if (score > thresholds.high_cut) return Label::HighScore;
  return Label::Potential;
}

std::vector<AnomalyVerdict> verdicts(const ModelParams& model, const FrameSeries& series) {
  std::vector<AnomalyVerdict> out;
  if (series.empty()) return out;
  const ScoredSeries scored = reconstruction_errors(model, series);
  out.reserve(scored.scores.size());
  for (std::size_t i = 0; i < scored.scores.size(); ++i) {
    out.push_back({series.frames[scored.rows[i]].timestamp, scored.scores[i],
                   classify(scored.scores[i], model.thresholds)});
  }
  return out;
}

Evaluation evaluate(std::span<const AnomalyVerdict> verdicts, std::span<const TruthEntry> truth,
                    int tolerance_seconds) {
  const std::chrono::microseconds tol = std::chrono::seconds{tolerance_seconds};
  std::vector<Timestamp> positives;
  for (const auto& t : truth) {
    if (t.anomalous) positives.push_back(t.timestamp);
  }
  std::sort(positives.begin(), positives.end());
  std::vector<Timestamp> detections;
  for (const auto& v : verdicts) {
    if (v.label != Label::Normal) detections.push_back(v.timestamp);
  }
  std::sort(detections.begin(), detections.end());

  auto near_any = [&](const std::vector<Timestamp>& sorted, Timestamp t) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), t - tol);
    return it != sorted.end() && *it <= t + tol;
  };

  Evaluation e;
  e.detections = detections.size();
  e.truth_positives = positives.size();
  for (const auto& v : verdicts) {
    const bool near_truth = near_any(positives, v.timestamp);
    if (v.label != Label::Normal) {
      (near_truth ? e.true_positives : e.false_positives) += 1;
    } else if (!near_truth) {
      e.true_negatives += 1;
    }
  }
  for (const auto& p : positives) {
    if (near_any(detections, p)) e.matched_truth += 1;
  }
  e.false_negatives = e.truth_positives - e.matched_truth;
  e.precision_defined = e.detections > 0;
  e.precision = e.precision_defined ? static_cast<double>(e.true_positives) / static_cast<double>(e.detections) : 0.0;
  e.recall = e.truth_positives > 0 ? static_cast<double>(e.matched_truth) / static_cast<double>(e.truth_positives) : 0.0;
  e.f1 = (e.precision + e.recall) > 0.0 ? 2.0 * e.precision * e.recall / (e.precision + e.recall) : 0.0;
  return e;
}

DetectorTrainOutcome train_detector(const FrameSeries& series, const DetectorTrainOptions& options) {
  if (series.empty()) throw EmptyInputError("no frames left to train on");
  if (!(options.validation_fraction >= 0.0 && options.validation_fraction < 1.0)) {
    throw ParameterError("validation_fraction must lie in [0, 1)");
  }
  const std::size_t n = series.size();
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * options.validation_fraction));
  const std::size_t n_train = n - n_val;

  FrameSeries train_part;
  train_part.cadence_seconds = series.cadence_seconds;
  train_part.frames.assign(series.frames.begin(), series.frames.begin() + static_cast<std::ptrdiff_t>(n_train));
  FrameSeries val_part;
  val_part.cadence_seconds = series.cadence_seconds;
  val_part.frames.assign(series.frames.begin() + static_cast<std::ptrdiff_t>(n_train), series.frames.end());

  DetectorTrainOutcome out;
  out.train_rows = n_train;
  out.validation_rows = n_val;
  ModelParams& model = out.model;
  model.scaler = fit_scaler(train_part);
  model.thresholds.high_cut = options.high_cut;

  nn::TrainConfig cfg = options.train;
  const std::uint64_t master = cfg.seed;
  cfg.seed = master + seed_offset::kShuffle;

  const Eigen::MatrixXd train_rows = apply_scaler(model.scaler, train_part, 0.0);
  const Eigen::MatrixXd val_rows = apply_scaler(model.scaler, val_part, 0.0);

  if (options.kind == DetectorKind::Vanilla) {
    model.architecture = options.vanilla;
    nn::DenseAutoencoder ae(options.vanilla, master + seed_offset::kInit);
    nn::RowDataset train_data(train_rows);
    nn::RowDataset val_data(val_rows);
    out.history = nn::train(ae, train_data, cfg, val_rows.rows() > 0 ? &val_data : nullptr);
    out.train_scores = row_scores(ae, train_rows);
    model.training.final_loss = nn::mean_loss(ae, train_data);
    model.network = std::move(ae);
  } else {
    model.architecture = options.lstm;
    const int L = options.lstm.sequence_length;
    const auto train_ts = timestamps_of(train_part);
    const WindowSet train_w = make_windows(train_ts, series.cadence_seconds, L, options.lstm.stride);
    nn::LstmAutoencoder ae(options.lstm, master + seed_offset::kInit);
    nn::WindowDataset train_data(train_rows, train_w.starts, L);
    std::vector<std::size_t> val_starts;
    if (!val_part.empty()) {
      const auto val_ts = timestamps_of(val_part);
      for (const auto& [b, e] : contiguous_segments(val_ts, series.cadence_seconds)) {
        for (std::size_t s = b; s + static_cast<std::size_t>(L) <= e; s += static_cast<std::size_t>(options.lstm.stride)) {
          val_starts.push_back(s);
        }
      }
    }
    nn::WindowDataset val_data(val_rows, val_starts, L);
    out.history = nn::train(ae, train_data, cfg, val_starts.empty() ? nullptr : &val_data);
    out.train_scores = window_scores(ae, train_rows, train_w);
    model.training.final_loss = nn::mean_loss(ae, train_data);
    model.network = std::move(ae);
  }

  model.thresholds.tau = calibrate_threshold(out.train_scores, options.percentile);
  model.training.seed = master;
  model.training.epochs = options.train.epochs;
  model.training.batch_size = options.train.batch_size;

  if (options.train.epochs == 0) out.warnings.push_back("epochs = 0: model persisted untrained");
  if (!model.thresholds.banded()) {
    out.warnings.push_back("calibration: tau " + format_double(model.thresholds.tau) + " exceeds high_cut " +
                           format_double(model.thresholds.high_cut) + "; the potential-anomaly band is empty");
  }
  return out;
}

}  // namespace vad
